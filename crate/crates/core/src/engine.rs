//! Per-step simulation loop.
//!
//! Each step runs, in order:
//!
//! 1. read the market price for `t`;
//! 2. dynamic curves: retune to the market price;
//! 3. static curves: let the arbitrageur trade once;
//! 4. settle or decline the trader's request;
//! 5. dynamic curves: retune again, so the pool leaves the step at market;
//! 6. emit a [`SimRecord`].
//!
//! Fees are `fee_rate · |Δx| · p_pool` charged in Y to whoever trades and
//! credited to a ledger kept outside the reserves, so the curve never sees
//! them.

use std::thread;

use thiserror::Error;

use crate::agents::{self, Agent, TradeRequest, TradeSequence, Wallet};
use crate::amm::{self, AmmError, AmmKind, CurveSpec, PoolState};
use crate::market::{MarketError, PriceSchedule};
use crate::metrics;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("steps must be positive")]
    NoSteps,
    #[error("fee rate must lie in [0, 1), got {0}")]
    FeeRate(f64),
    #[error("initial holdings must be finite and non-negative")]
    NegativeHoldings,
    #[error("initial pool ({x}, {y}) is invalid for a {kind} curve")]
    InitialPool { kind: AmmKind, x: f64, y: f64 },
    #[error("price schedule has {have} points but the run needs {need}")]
    ScheduleTooShort { have: usize, need: usize },
    #[error("trade sequence has {have} entries but the run needs {need}")]
    SequenceTooShort { have: usize, need: usize },
    #[error(transparent)]
    Market(#[from] MarketError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub amm: AmmKind,
    pub steps: usize,
    pub seed: u64,
    pub fee_rate: f64,
    pub initial_pool: PoolState,
    pub initial_trader: Wallet,
    pub initial_arbitrageur: Wallet,
    pub schedule: PriceSchedule,
}

impl SimConfig {
    /// Three parties with 1000 X and 1000 Y each, a 2% fee and a 0→10 price
    /// ramp over 1000 steps.
    pub fn new(amm: AmmKind) -> Self {
        Self {
            amm,
            steps: 1000,
            seed: 42,
            fee_rate: 0.02,
            initial_pool: PoolState::new(1000.0, 1000.0),
            initial_trader: Wallet::new(1000.0, 1000.0),
            initial_arbitrageur: Wallet::new(1000.0, 1000.0),
            schedule: PriceSchedule::linear(0.0, 10.0),
        }
    }

    pub fn with_kind(&self, amm: AmmKind) -> Self {
        Self {
            amm,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.steps == 0 {
            return Err(ConfigError::NoSteps);
        }
        if !(0.0..1.0).contains(&self.fee_rate) {
            return Err(ConfigError::FeeRate(self.fee_rate));
        }
        let holdings = [
            self.initial_pool.x,
            self.initial_pool.y,
            self.initial_trader.x,
            self.initial_trader.y,
            self.initial_arbitrageur.x,
            self.initial_arbitrageur.y,
        ];
        if holdings.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(ConfigError::NegativeHoldings);
        }
        let PoolState { x, y } = self.initial_pool;
        let ok = if self.amm.is_product() {
            x > 0.0 && y > 0.0
        } else {
            x + y > 0.0
        };
        if !ok {
            return Err(ConfigError::InitialPool {
                kind: self.amm,
                x,
                y,
            });
        }
        if let Some(have) = self.schedule.len_limit() {
            if have < self.steps {
                return Err(ConfigError::ScheduleTooShort {
                    have,
                    need: self.steps,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Cumulative {
    pub fees_y: f64,
    pub trader_slippage_y: f64,
    pub declined_count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: usize,
    pub curve: CurveSpec,
    pub pool: PoolState,
    pub trader: Wallet,
    pub arbitrageur: Wallet,
    pub lp_fee_ledger: Wallet,
    pub cumulative: Cumulative,
    pub p_mkt: f64,
}

impl SimState {
    pub fn initial(config: &SimConfig) -> Self {
        Self {
            t: 0,
            curve: CurveSpec::through(config.amm, config.initial_pool),
            pool: config.initial_pool,
            trader: config.initial_trader,
            arbitrageur: config.initial_arbitrageur,
            lp_fee_ledger: Wallet::default(),
            cumulative: Cumulative::default(),
            p_mkt: 1.0,
        }
    }

    /// Token totals over pool, both agents and the fee ledger.
    pub fn token_totals(&self) -> (f64, f64) {
        let parts = [
            (self.pool.x, self.pool.y),
            (self.trader.x, self.trader.y),
            (self.arbitrageur.x, self.arbitrageur.y),
            (self.lp_fee_ledger.x, self.lp_fee_ledger.y),
        ];
        parts
            .iter()
            .fold((0.0, 0.0), |(sx, sy), (x, y)| (sx + x, sy + y))
    }

    /// Pool reserves plus fee ledger, valued at `price`.
    pub fn lp_value(&self, price: f64) -> f64 {
        metrics::pool_value(self.pool.x, self.pool.y, price)
            + metrics::pool_value(self.lp_fee_ledger.x, self.lp_fee_ledger.y, price)
    }

    fn wallet_mut(&mut self, agent: Agent) -> &mut Wallet {
        match agent {
            Agent::Trader => &mut self.trader,
            Agent::Arbitrageur => &mut self.arbitrageur,
        }
    }
}

/// One row of the observable time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimRecord {
    pub t: usize,
    pub p_mkt: f64,
    pub p_pool: f64,
    pub pool_x: f64,
    pub pool_y: f64,
    pub trader_x: f64,
    pub trader_y: f64,
    pub arb_x: f64,
    pub arb_y: f64,
    pub lp_value: f64,
    pub trader_value: f64,
    pub arb_value: f64,
    pub fees_cum: f64,
    pub slippage_cum: f64,
    pub declined_cum: u64,
}

impl SimRecord {
    pub const CSV_HEADER: &'static str = "t,p_mkt,p_pool,pool_x,pool_y,trader_x,trader_y,arb_x,arb_y,lp_value,trader_value,arb_value,fees_cum,slippage_cum,declined_cum";

    fn of(state: &SimState) -> Self {
        let p = state.p_mkt;
        let p_pool = amm::spot_price(&state.curve, state.pool).unwrap_or(f64::NAN);
        Self {
            t: state.t,
            p_mkt: p,
            p_pool,
            pool_x: state.pool.x,
            pool_y: state.pool.y,
            trader_x: state.trader.x,
            trader_y: state.trader.y,
            arb_x: state.arbitrageur.x,
            arb_y: state.arbitrageur.y,
            lp_value: state.lp_value(p),
            trader_value: metrics::pool_value(state.trader.x, state.trader.y, p),
            arb_value: metrics::pool_value(state.arbitrageur.x, state.arbitrageur.y, p),
            fees_cum: state.cumulative.fees_y,
            slippage_cum: state.cumulative.trader_slippage_y,
            declined_cum: state.cumulative.declined_count,
        }
    }

    /// CSV row; floats use the shortest text that round-trips exactly.
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.t,
            self.p_mkt,
            self.p_pool,
            self.pool_x,
            self.pool_y,
            self.trader_x,
            self.trader_y,
            self.arb_x,
            self.arb_y,
            self.lp_value,
            self.trader_value,
            self.arb_value,
            self.fees_cum,
            self.slippage_cum,
            self.declined_cum
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeclineReason {
    /// The pool cannot supply the requested side.
    PoolInfeasible,
    /// The agent cannot cover the trade plus fee.
    Budget,
    /// Reserves would leave the curve's domain.
    Domain,
    /// Zero or non-finite request.
    Invalid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fill {
    pub agent: Agent,
    pub delta_x: f64,
    pub delta_y: f64,
    pub fee: f64,
    pub slippage: f64,
    pub p_pool_before: f64,
    pub pool_before: PoolState,
    pub pool_after: PoolState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TradeOutcome {
    Filled(Fill),
    Declined {
        agent: Agent,
        delta_x: f64,
        reason: DeclineReason,
    },
}

impl TradeOutcome {
    pub fn fill(&self) -> Option<&Fill> {
        match self {
            TradeOutcome::Filled(f) => Some(f),
            TradeOutcome::Declined { .. } => None,
        }
    }
}

fn decline_reason(err: AmmError) -> DeclineReason {
    match err {
        AmmError::InsufficientPoolX { .. } | AmmError::InsufficientPoolY { .. } => {
            DeclineReason::PoolInfeasible
        }
        AmmError::ZeroTrade(_) => DeclineReason::Invalid,
        _ => DeclineReason::Domain,
    }
}

/// Fills `request` in full or declines it; declines leave the state untouched
/// apart from the trader's decline counter.
pub fn settle_trade(
    state: &mut SimState,
    request: TradeRequest,
    config: &SimConfig,
) -> TradeOutcome {
    let agent = request.agent;
    let declined = |state: &mut SimState, reason| {
        if agent == Agent::Trader {
            state.cumulative.declined_count += 1;
        }
        TradeOutcome::Declined {
            agent,
            delta_x: request.delta_x,
            reason,
        }
    };

    let quote = match amm::quote(&state.curve, state.pool, request.delta_x) {
        Ok(q) => q,
        Err(e) => return declined(state, decline_reason(e)),
    };
    let fee = config.fee_rate * quote.delta_x.abs() * quote.spot_price_before;
    let wallet = *state.wallet_mut(agent);
    let next_wallet = Wallet::new(wallet.x + quote.delta_x, wallet.y - quote.delta_y - fee);
    if next_wallet.x < 0.0 || next_wallet.y < 0.0 {
        return declined(state, DeclineReason::Budget);
    }
    let pool_before = state.pool;
    state.pool = match amm::execute_swap(state.pool, &quote) {
        Ok(p) => p,
        Err(e) => return declined(state, decline_reason(e)),
    };
    *state.wallet_mut(agent) = next_wallet;
    state.lp_fee_ledger.y += fee;
    state.cumulative.fees_y += fee;

    let slippage = metrics::slippage_of(&quote);
    if agent == Agent::Trader {
        state.cumulative.trader_slippage_y += slippage;
    }
    TradeOutcome::Filled(Fill {
        agent,
        delta_x: quote.delta_x,
        delta_y: quote.delta_y,
        fee,
        slippage,
        p_pool_before: quote.spot_price_before,
        pool_before,
        pool_after: state.pool,
    })
}

/// Everything that happened in one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub record: SimRecord,
    pub arbitrage: Option<TradeOutcome>,
    pub trader: TradeOutcome,
}

fn retune_in_place(state: &mut SimState) {
    // A failed retune only happens on a degenerate pool; keep the old curve.
    if let Ok(curve) = amm::retune(&state.curve, state.pool, state.p_mkt) {
        state.curve = curve;
    }
}

/// Advances `state` by one step with the trader requesting `trade` X.
pub fn step(
    mut state: SimState,
    config: &SimConfig,
    trade: f64,
) -> Result<(SimState, StepReport), MarketError> {
    state.p_mkt = config.schedule.price_at(state.t, config.steps)?;
    let dynamic = config.amm.is_dynamic();

    if dynamic {
        retune_in_place(&mut state);
    }

    let arbitrage = if dynamic {
        None
    } else {
        agents::arbitrage_decide(
            &state.curve,
            state.pool,
            state.p_mkt,
            state.arbitrageur,
            config.fee_rate,
        )
        .map(|req| settle_trade(&mut state, req, config))
    };

    let trader = match TradeRequest::new(Agent::Trader, trade) {
        Some(req) => settle_trade(&mut state, req, config),
        None => {
            state.cumulative.declined_count += 1;
            TradeOutcome::Declined {
                agent: Agent::Trader,
                delta_x: trade,
                reason: DeclineReason::Invalid,
            }
        }
    };

    if dynamic {
        retune_in_place(&mut state);
    }

    let record = SimRecord::of(&state);
    state.t += 1;
    Ok((
        state,
        StepReport {
            record,
            arbitrage,
            trader,
        },
    ))
}

/// Party values at the final market price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinalValues {
    pub lp: f64,
    pub trader: f64,
    pub arbitrageur: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub kind: AmmKind,
    pub final_price: f64,
    pub final_values: FinalValues,
    /// Starting holdings valued at the final price.
    pub initial_values: FinalValues,
    pub total_fees: f64,
    pub total_slippage: f64,
    pub total_declines: u64,
    pub arbitrage_trades: usize,
    pub min_pool_x_fraction: f64,
    pub min_pool_y_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub config: SimConfig,
    pub reports: Vec<StepReport>,
    pub final_state: SimState,
    pub summary: RunSummary,
}

impl RunOutput {
    pub fn records(&self) -> impl Iterator<Item = &SimRecord> {
        self.reports.iter().map(|r| &r.record)
    }

    pub fn fills(&self) -> impl Iterator<Item = &Fill> {
        self.reports.iter().flat_map(|r| {
            r.arbitrage
                .iter()
                .chain(std::iter::once(&r.trader))
                .filter_map(TradeOutcome::fill)
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity((self.reports.len() + 1) * 256);
        out.push_str(SimRecord::CSV_HEADER);
        out.push('\n');
        for r in self.records() {
            out.push_str(&r.to_csv_row());
            out.push('\n');
        }
        out
    }
}

fn fraction(v: f64, of: f64) -> f64 {
    if of > 0.0 {
        v / of
    } else {
        f64::NAN
    }
}

/// Runs with a trade sequence generated from `config.seed`.
pub fn run(config: &SimConfig) -> Result<RunOutput, ConfigError> {
    config.validate()?;
    let trades = agents::generate_trade_sequence(config.seed, config.steps);
    run_with_trades(config, &trades)
}

pub fn run_with_trades(
    config: &SimConfig,
    trades: &TradeSequence,
) -> Result<RunOutput, ConfigError> {
    config.validate()?;
    if trades.len() < config.steps {
        return Err(ConfigError::SequenceTooShort {
            have: trades.len(),
            need: config.steps,
        });
    }

    let mut state = SimState::initial(config);
    let mut reports = Vec::with_capacity(config.steps);
    let (mut min_x, mut min_y) = (state.pool.x, state.pool.y);
    for &trade in &trades.draws[..config.steps] {
        let (next, report) = step(state, config, trade)?;
        state = next;
        min_x = min_x.min(state.pool.x);
        min_y = min_y.min(state.pool.y);
        reports.push(report);
    }

    let p = state.p_mkt;
    let value = |w: Wallet| metrics::pool_value(w.x, w.y, p);
    let summary = RunSummary {
        kind: config.amm,
        final_price: p,
        final_values: FinalValues {
            lp: state.lp_value(p),
            trader: value(state.trader),
            arbitrageur: value(state.arbitrageur),
        },
        initial_values: FinalValues {
            lp: metrics::pool_value(config.initial_pool.x, config.initial_pool.y, p),
            trader: value(config.initial_trader),
            arbitrageur: value(config.initial_arbitrageur),
        },
        total_fees: state.cumulative.fees_y,
        total_slippage: state.cumulative.trader_slippage_y,
        total_declines: state.cumulative.declined_count,
        arbitrage_trades: reports
            .iter()
            .filter(|r| matches!(r.arbitrage, Some(TradeOutcome::Filled(_))))
            .count(),
        min_pool_x_fraction: fraction(min_x, config.initial_pool.x),
        min_pool_y_fraction: fraction(min_y, config.initial_pool.y),
    };
    Ok(RunOutput {
        config: config.clone(),
        reports,
        final_state: state,
        summary,
    })
}

/// All four mechanisms driven by one shared trade sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub trades: TradeSequence,
    pub runs: Vec<RunOutput>,
}

/// Runs every [`AmmKind`] against the same trades, concurrently. Uses
/// `trades` when given, otherwise draws from `base.seed`.
pub fn run_comparison(
    base: &SimConfig,
    trades: Option<TradeSequence>,
) -> Result<Comparison, ConfigError> {
    base.validate()?;
    let trades = trades.unwrap_or_else(|| agents::generate_trade_sequence(base.seed, base.steps));
    let runs = thread::scope(|s| {
        let handles: Vec<_> = AmmKind::ALL
            .iter()
            .map(|&kind| {
                let cfg = base.with_kind(kind);
                let trades = &trades;
                s.spawn(move || run_with_trades(&cfg, trades))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(Comparison { trades, runs })
}
