//! Command-line front end.
//!
//! `simulate` writes `<out>.csv` plus the trades it used to
//! `<out>.trades.txt`; `compare` writes one CSV per mechanism, the shared
//! `trades.txt` and a `summary.txt` into the `<out>` directory; `metrics`
//! evaluates single formulas.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::agents::TradeSequence;
use crate::amm::{self, AmmKind, CurveSpec, PoolState};
use crate::engine::{self, Comparison, RunOutput, RunSummary, SimConfig};
use crate::market::{PriceSchedule, DEFAULT_P_MIN};
use crate::metrics;

#[derive(Debug, Parser)]
#[command(
    name = "amm-sim",
    version,
    about = "Static and market-tracking AMM simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one mechanism and write `<out>.csv`.
    Simulate {
        #[arg(long, value_parser = parse_kind)]
        amm: AmmKind,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run all four mechanisms on one shared trade sequence.
    Compare {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Evaluate a single formula.
    Metrics {
        #[command(subcommand)]
        metric: Metric,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.02)]
    pub fee: f64,
    /// `linear:<p0>:<p1>`, `constant:<p>` or `file:<path>`.
    #[arg(long, default_value = "linear:0:10")]
    pub price_schedule: String,
    /// Trade amounts to replay instead of drawing from `--seed`.
    #[arg(long)]
    pub replay_file: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_P_MIN)]
    pub p_min: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Metric {
    /// Constant-product divergence loss for a price ratio.
    DivergenceLoss {
        #[arg(long)]
        rho: f64,
    },
    /// Relative value change between two holdings at a price.
    DivergenceLossGeneral {
        #[arg(long)]
        price: f64,
        #[arg(long)]
        x0: f64,
        #[arg(long)]
        y0: f64,
        #[arg(long)]
        x1: f64,
        #[arg(long)]
        y1: f64,
    },
    /// Slippage of a trade on a curve through (x, y) priced at `--price`.
    Slippage {
        #[arg(long, value_parser = parse_kind)]
        amm: AmmKind,
        #[arg(long)]
        x: f64,
        #[arg(long)]
        y: f64,
        #[arg(long, allow_hyphen_values = true)]
        dx: f64,
        /// Market price a dynamic curve is tuned to.
        #[arg(long, default_value_t = 1.0)]
        price: f64,
    },
    /// `p·x + y`.
    PoolValue {
        #[arg(long)]
        x: f64,
        #[arg(long)]
        y: f64,
        #[arg(long)]
        price: f64,
    },
}

fn parse_kind(s: &str) -> Result<AmmKind, String> {
    s.parse::<AmmKind>().map_err(|e| e.to_string())
}

impl RunArgs {
    fn config(&self, amm: AmmKind) -> Result<SimConfig> {
        let schedule = self
            .price_schedule
            .parse::<PriceSchedule>()?
            .with_floor(self.p_min)?;
        let config = SimConfig {
            steps: self.steps,
            seed: self.seed,
            fee_rate: self.fee,
            schedule,
            ..SimConfig::new(amm)
        };
        config.validate()?;
        Ok(config)
    }

    fn trades(&self) -> Result<Option<TradeSequence>> {
        self.replay_file
            .as_ref()
            .map(|p| TradeSequence::load(p).map_err(Into::into))
            .transpose()
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn with_suffix(out: &Path, suffix: &str) -> PathBuf {
    let base = out.to_string_lossy();
    let base = base.strip_suffix(".csv").unwrap_or(&base);
    PathBuf::from(format!("{base}{suffix}"))
}

fn simulate(amm: AmmKind, args: &RunArgs) -> Result<RunOutput> {
    let config = args.config(amm)?;
    let trades = match args.trades()? {
        Some(t) => t,
        None => crate::agents::generate_trade_sequence(config.seed, config.steps),
    };
    let output = engine::run_with_trades(&config, &trades)?;
    let csv_path = with_suffix(&args.out, ".csv");
    write(&csv_path, &output.to_csv())?;
    write(
        &with_suffix(&args.out, ".trades.txt"),
        &trades.to_replay_string(),
    )?;
    print!("{}", summary_text(std::slice::from_ref(&output.summary)));
    Ok(output)
}

fn compare(args: &RunArgs) -> Result<Comparison> {
    let base = args.config(AmmKind::StaticSum)?;
    let comparison = engine::run_comparison(&base, args.trades()?)?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    for run in &comparison.runs {
        let path = args.out.join(format!("{}.csv", run.config.amm));
        write(&path, &run.to_csv())?;
    }
    write(
        &args.out.join("trades.txt"),
        &comparison.trades.to_replay_string(),
    )?;
    let summaries: Vec<RunSummary> = comparison.runs.iter().map(|r| r.summary.clone()).collect();
    let text = summary_text(&summaries);
    write(&args.out.join("summary.txt"), &text)?;
    print!("{text}");
    Ok(comparison)
}

/// Human-readable summary. Values are marked at each run's final price.
pub fn summary_text(summaries: &[RunSummary]) -> String {
    let mut out = String::new();
    for s in summaries {
        let _ = writeln!(out, "[{}]", s.kind);
        let _ = writeln!(out, "  final market price        {:.6}", s.final_price);
        let _ = writeln!(
            out,
            "  final value  LP / trader / arbitrageur   {:.6} / {:.6} / {:.6}",
            s.final_values.lp, s.final_values.trader, s.final_values.arbitrageur
        );
        let _ = writeln!(
            out,
            "  initial holdings at final price          {:.6} / {:.6} / {:.6}",
            s.initial_values.lp, s.initial_values.trader, s.initial_values.arbitrageur
        );
        let _ = writeln!(out, "  collected fees            {:.6}", s.total_fees);
        let _ = writeln!(out, "  trader slippage           {:.6}", s.total_slippage);
        let _ = writeln!(out, "  declined trades           {}", s.total_declines);
        let _ = writeln!(out, "  arbitrage trades          {}", s.arbitrage_trades);
        let _ = writeln!(
            out,
            "  min pool reserve x / y    {:.6} / {:.6}",
            s.min_pool_x_fraction, s.min_pool_y_fraction
        );
    }
    out
}

fn metric(m: &Metric) -> Result<f64> {
    Ok(match *m {
        Metric::DivergenceLoss { rho } => metrics::divergence_loss_constant_product(rho)?,
        Metric::DivergenceLossGeneral {
            price,
            x0,
            y0,
            x1,
            y1,
        } => metrics::divergence_loss_general(price, x0, y0, x1, y1)?,
        Metric::Slippage {
            amm: kind,
            x,
            y,
            dx,
            price,
        } => {
            let pool = PoolState::new(x, y);
            let curve = amm::retune(&CurveSpec::through(kind, pool), pool, price)?;
            metrics::slippage(&curve, pool, dx)?
        }
        Metric::PoolValue { x, y, price } => metrics::pool_value(x, y, price),
    })
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate { amm, run } => simulate(*amm, run).map(drop),
        Command::Compare { run } => compare(run).map(drop),
        Command::Metrics { metric: m } => {
            println!("{}", metric(m)?);
            Ok(())
        }
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
