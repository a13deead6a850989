//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails.

use std::fs;
use std::process::{Command, ExitCode};
use std::time::Instant;

use amm_sim::agents::Agent;
use amm_sim::amm::{self, AmmKind, CurveSpec, PoolState};
use amm_sim::engine::{self, RunOutput, SimConfig};
use amm_sim::market::PriceSchedule;
use amm_sim::metrics;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

/// Seeds for the multi-seed sweeps: the default seed and the 19 after it.
const SWEEP_SEEDS: std::ops::Range<u64> = 42..62;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn defaults(kind: AmmKind) -> SimConfig {
    SimConfig::new(kind)
}

fn run(cfg: &SimConfig) -> RunOutput {
    engine::run(cfg).expect("valid configuration")
}

fn sweep(kind: AmmKind) -> Vec<RunOutput> {
    SWEEP_SEEDS
        .map(|seed| {
            run(&SimConfig {
                seed,
                ..defaults(kind)
            })
        })
        .collect()
}

fn retuning_identities() -> Outcome {
    let mut rng = Pcg64::seed_from_u64(1);
    let (mut worst_price, mut worst_curve) = (0.0f64, 0.0f64);
    for kind in [AmmKind::DynamicSum, AmmKind::DynamicProduct] {
        for _ in 0..1000 {
            let origin = PoolState::new(rng.gen_range(1.0..1e4), rng.gen_range(1.0..1e4));
            let pool = PoolState::new(rng.gen_range(1.0..1e4), rng.gen_range(1.0..1e4));
            let p = rng.gen_range(0.01..100.0);
            let curve = amm::retune(&CurveSpec::through(kind, origin), pool, p).unwrap();
            let spot = amm::spot_price(&curve, pool).unwrap();
            worst_price = worst_price.max((spot - p).abs() / p);
            worst_curve = worst_curve.max(curve.residual(pool));
        }
    }
    outcome(
        worst_price <= 1e-9 && worst_curve <= 1e-9,
        format!(
            "max rel price err {worst_price:.2e}, max rel curve err {worst_curve:.2e} (tol 1e-9)"
        ),
    )
}

fn divergence_closed_form() -> Outcome {
    let mut rng = Pcg64::seed_from_u64(2);
    let k = 1e6;
    let state = |p: f64| ((k / p).sqrt(), (k * p).sqrt());
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let rho = (rng.gen_range(0.01f64.ln()..100f64.ln())).exp();
        let p_o = rng.gen_range(0.1..10.0);
        let p_n = rho * p_o;
        let (x_o, y_o) = state(p_o);
        let (x_n, y_n) = state(p_n);
        let general = metrics::divergence_loss_general(p_n, x_o, y_o, x_n, y_n).unwrap();
        let closed = metrics::divergence_loss_constant_product(rho).unwrap();
        worst = worst.max((general - closed).abs());
    }
    let d = |r| metrics::divergence_loss_constant_product(r).unwrap();
    let fixed = d(1.0) == 0.0 && (d(4.0) + 0.2).abs() <= 1e-12 && (d(0.25) + 0.2).abs() <= 1e-12;
    outcome(
        worst <= 1e-12 && fixed,
        format!(
            "max |closed - general| {worst:.2e} (tol 1e-12); d(1)={}, d(4)={}, d(0.25)={}",
            d(1.0),
            d(4.0),
            d(0.25)
        ),
    )
}

fn slippage_gain() -> Outcome {
    let mut pass = true;
    let mut details = Vec::new();
    for price in [1.0, 2.5] {
        let cfg = SimConfig {
            fee_rate: 0.0,
            schedule: PriceSchedule::constant(price),
            ..defaults(AmmKind::DynamicProduct)
        };
        let out = run(&cfg);
        let mut prev_value = metrics::pool_value(1000.0, 1000.0, price);
        let mut prev_slip = 0.0;
        let mut worst = 0.0f64;
        let mut filled = 0;
        for r in out.records() {
            let gain = r.lp_value - prev_value;
            let slip = r.slippage_cum - prev_slip;
            worst = worst.max((gain - slip).abs());
            prev_value = r.lp_value;
            prev_slip = r.slippage_cum;
        }
        for rep in &out.reports {
            if rep.trader.fill().is_some() {
                filled += 1;
            }
        }
        let v0 = metrics::pool_value(1000.0, 1000.0, price);
        let cumulative = (out.final_state.lp_value(price) - v0 - out.summary.total_slippage).abs();
        pass &= worst <= 1e-9 && cumulative <= 1e-6 && filled > 0;
        details.push(format!(
            "p={price}: {filled} fills, max per-trade gap {worst:.2e}, cumulative gap {cumulative:.2e}, total slippage {:.4}",
            out.summary.total_slippage
        ));
    }
    outcome(pass, details.join("; "))
}

fn zero_sum_slippage() -> Outcome {
    let mut rng = Pcg64::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut evaluated = 0;
    for kind in [AmmKind::StaticSum, AmmKind::DynamicSum] {
        for _ in 0..1000 {
            let pool = PoolState::new(rng.gen_range(1.0..1e4), rng.gen_range(1.0..1e4));
            let p = rng.gen_range(0.01..100.0);
            let curve = amm::retune(&CurveSpec::through(kind, pool), pool, p).unwrap();
            let dx: f64 = rng.gen_range(-1.0..1.0) * pool.x;
            if let Ok(s) = metrics::slippage(&curve, pool, dx) {
                worst = worst.max(s.abs());
                evaluated += 1;
            }
        }
        let out = run(&defaults(kind));
        for fill in out.fills() {
            worst = worst.max(fill.slippage.abs());
            evaluated += 1;
        }
        worst = worst.max(out.summary.total_slippage.abs());
    }
    outcome(
        worst <= 1e-12 && evaluated >= 2000,
        format!("{evaluated} trades, max |slippage| {worst:.2e} (tol 1e-12)"),
    )
}

fn liquidity_retention() -> Outcome {
    let ds = run(&defaults(AmmKind::DynamicSum)).summary;
    let dp = run(&defaults(AmmKind::DynamicProduct)).summary;
    let ds_min = ds.min_pool_x_fraction.min(ds.min_pool_y_fraction);
    let dp_min = dp.min_pool_x_fraction.min(dp.min_pool_y_fraction);
    let mut sweep_min = f64::INFINITY;
    let mut below = Vec::new();
    for kind in [AmmKind::DynamicSum, AmmKind::DynamicProduct] {
        for (seed, out) in SWEEP_SEEDS.zip(sweep(kind)) {
            let m = out
                .summary
                .min_pool_x_fraction
                .min(out.summary.min_pool_y_fraction);
            sweep_min = sweep_min.min(m);
            if m < 0.80 {
                below.push(format!("{kind}@{seed}={m:.3}"));
            }
        }
    }
    outcome(
        ds_min >= 0.85 && dp_min >= 0.90 && below.is_empty(),
        format!(
            "seed 42: dynamic-sum min (x {:.3}, y {:.3}) need >= 0.85, dynamic-product min (x {:.3}, y {:.3}) need >= 0.90; \
             20-seed min {sweep_min:.3} need >= 0.80, runs below: [{}]",
            ds.min_pool_x_fraction,
            ds.min_pool_y_fraction,
            dp.min_pool_x_fraction,
            dp.min_pool_y_fraction,
            below.join(", ")
        ),
    )
}

fn static_sum_collapse() -> Outcome {
    let s = run(&defaults(AmmKind::StaticSum)).summary;
    let ratio = s.final_values.lp / s.initial_values.lp;
    let min_reserve = s.min_pool_x_fraction.min(s.min_pool_y_fraction);
    outcome(
        s.initial_values.lp == 11000.0 && ratio <= 0.25 && min_reserve < 0.05 && s.total_declines > 0,
        format!(
            "LP final {:.2} = {ratio:.4} of {} (need <= 0.25); min reserve {min_reserve:.4} (need < 0.05); declines {}",
            s.final_values.lp, s.initial_values.lp, s.total_declines
        ),
    )
}

fn static_product_exhaustion() -> Outcome {
    let out = run(&defaults(AmmKind::StaticProduct));
    let records: Vec<_> = out.records().collect();
    // Earliest step from which both conditions hold through the end.
    let mut start = None;
    for (i, r) in records.iter().enumerate().rev() {
        if r.arb_y < 1.0 && r.p_pool < r.p_mkt {
            start = Some(i);
        } else {
            break;
        }
    }
    match start {
        Some(i) => outcome(
            i + 1 < records.len(),
            format!(
                "from t={} on: arbitrageur y < 1 and pool price < market ({} steps; final pool {:.4} vs market {:.4})",
                records[i].t,
                records.len() - i,
                records.last().unwrap().p_pool,
                records.last().unwrap().p_mkt
            ),
        ),
        None => outcome(false, "arbitrageur never runs out of Y for good".into()),
    }
}

fn no_arbitrage_in_dynamic() -> Outcome {
    let mut arb = 0;
    for kind in [AmmKind::DynamicSum, AmmKind::DynamicProduct] {
        for out in sweep(kind) {
            arb += out
                .fills()
                .filter(|f| f.agent == Agent::Arbitrageur)
                .count();
            arb += out.summary.arbitrage_trades;
        }
    }
    let ds = run(&defaults(AmmKind::DynamicSum)).summary;
    let static_arb: usize = [AmmKind::StaticSum, AmmKind::StaticProduct]
        .into_iter()
        .map(|k| run(&defaults(k)).summary.arbitrage_trades)
        .min()
        .unwrap();
    outcome(
        arb == 0 && ds.total_declines == 0 && static_arb >= 1,
        format!(
            "dynamic arbitrage trades {arb} over 40 runs; dynamic-sum declines {}; static runs >= {static_arb} arbitrage trades",
            ds.total_declines
        ),
    )
}

fn fee_expectation() -> Outcome {
    let mut means = Vec::new();
    for kind in [AmmKind::DynamicSum, AmmKind::DynamicProduct] {
        let runs = sweep(kind);
        let mean = runs.iter().map(|r| r.summary.total_fees).sum::<f64>() / runs.len() as f64;
        means.push((kind, mean));
    }
    let mut worst = 0.0f64;
    for fee_rate in [0.0, 0.005, 0.02, 0.05, 0.2] {
        for kind in AmmKind::ALL {
            let out = run(&SimConfig {
                fee_rate,
                ..defaults(kind)
            });
            let expected = fee_rate
                * out
                    .fills()
                    .map(|f| f.delta_x.abs() * f.p_pool_before)
                    .sum::<f64>();
            worst = worst.max((out.summary.total_fees - expected).abs());
            worst = worst.max((out.final_state.lp_fee_ledger.y - expected).abs());
            if kind.is_dynamic() {
                // The pool sits at the market price whenever the trader trades.
                for (t, rep) in out.reports.iter().enumerate() {
                    if let Some(f) = rep.trader.fill() {
                        let p = out.config.schedule.price_at(t, out.config.steps).unwrap();
                        worst = worst.max((f.p_pool_before - p).abs() / p.max(1.0));
                    }
                }
            }
        }
    }
    let in_band = means.iter().all(|(_, m)| (60.0..=100.0).contains(m));
    outcome(
        in_band && worst <= 1e-9,
        format!(
            "20-seed mean fees: {} (need in [60, 100]); max accounting gap {worst:.2e} (tol 1e-9)",
            means
                .iter()
                .map(|(k, m)| format!("{k} {m:.2}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    )
}

fn cli_compare(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let status = Command::new(env!("CARGO_BIN_EXE_amm-sim"))
        .args(["compare", "--steps", "1000", "--seed", "42", "--out"])
        .arg(dir)
        .output()
        .expect("run amm-sim");
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn conservation_and_determinism() -> Outcome {
    let mut worst = 0.0f64;
    let mut runs = 0;
    for kind in AmmKind::ALL {
        for out in sweep(kind) {
            runs += 1;
            for r in out.records() {
                worst = worst.max((r.pool_x + r.trader_x + r.arb_x - 3000.0).abs());
                worst = worst.max((r.pool_y + r.trader_y + r.arb_y + r.fees_cum - 3000.0).abs());
            }
            let (tx, ty) = out.final_state.token_totals();
            worst = worst.max((tx - 3000.0).abs()).max((ty - 3000.0).abs());
        }
    }
    let tmp = tempfile::tempdir().unwrap();
    let a = cli_compare(&tmp.path().join("a"));
    let b = cli_compare(&tmp.path().join("b"));
    let identical = a == b && a.len() == 6;
    let in_process = (0..2)
        .map(|_| run(&defaults(AmmKind::DynamicProduct)).to_csv())
        .collect::<Vec<_>>();
    let identical = identical && in_process[0] == in_process[1];
    outcome(
        worst <= 1e-6 && identical,
        format!(
            "{runs} runs, max token drift {worst:.2e} (tol 1e-6); repeated CLI compare outputs byte-identical: {identical} ({} files)",
            a.len()
        ),
    )
}

fn runtime() -> Outcome {
    let start = Instant::now();
    let _ = run(&defaults(AmmKind::DynamicProduct));
    let elapsed = start.elapsed();
    outcome(
        elapsed.as_secs_f64() < 1.0,
        format!(
            "one 1000-step run took {:.1} ms",
            elapsed.as_secs_f64() * 1e3
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("1  retuning identities", retuning_identities),
        ("2  divergence-loss closed form", divergence_closed_form),
        ("3  slippage gain equals trader slippage", slippage_gain),
        ("4  zero slippage on sum curves", zero_sum_slippage),
        ("5  liquidity retention", liquidity_retention),
        ("6  static constant-sum collapse", static_sum_collapse),
        (
            "7  static constant-product arbitrage exhaustion",
            static_product_exhaustion,
        ),
        (
            "8  no arbitrage / no declines on dynamic curves",
            no_arbitrage_in_dynamic,
        ),
        ("9  fee expectation and accounting", fee_expectation),
        (
            "10 conservation and determinism",
            conservation_and_determinism,
        ),
        ("-  single-run runtime", runtime),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
