//! Trader and arbitrageur behaviour.
//!
//! The trader's requests come from a [`TradeSequence`]: standard-normal draws
//! produced by the Marsaglia polar method over a PCG-XSL-RR 128/64 generator
//! (`rand_pcg::Pcg64`) seeded with `seed_from_u64`. Each uniform is
//! `Rng::gen::<f64>()` mapped to `[-1, 1)`, and both polar outputs are used
//! in order. Sequences can be written to and replayed from a text file, one
//! signed decimal per line, which is what makes runs reproducible across
//! implementations.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use thiserror::Error;

use crate::amm::{self, CurveSpec, PoolState};

/// Shrink factor applied when rounding pushes a clipped trade past its budget.
const BUDGET_SHRINK: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Wallet {
    pub x: f64,
    pub y: f64,
}

impl Wallet {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Agent {
    Trader,
    Arbitrageur,
}

/// Signed X amount an agent asks the pool for (positive buys X).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeRequest {
    pub agent: Agent,
    pub delta_x: f64,
}

impl TradeRequest {
    pub fn new(agent: Agent, delta_x: f64) -> Option<Self> {
        (delta_x != 0.0 && delta_x.is_finite()).then_some(Self { agent, delta_x })
    }
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("line {line}: `{text}` is not a trade amount")]
    BadLine { line: usize, text: String },
    #[error("replay file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Trader request per step. `seed` is `None` for sequences loaded from a
/// replay file.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeSequence {
    pub seed: Option<u64>,
    pub draws: Vec<f64>,
}

impl TradeSequence {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Replay text: one shortest round-trip decimal per line.
    pub fn to_replay_string(&self) -> String {
        let mut out = String::with_capacity(self.draws.len() * 22);
        for d in &self.draws {
            writeln!(out, "{d}").expect("writing to a String cannot fail");
        }
        out
    }

    pub fn parse_replay(text: &str) -> Result<Self, ReplayError> {
        let mut draws = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let body = line.trim();
            if body.is_empty() {
                continue;
            }
            let v: f64 = body
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| ReplayError::BadLine {
                    line: i + 1,
                    text: line.to_string(),
                })?;
            draws.push(v);
        }
        Ok(Self { seed: None, draws })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ReplayError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ReplayError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_replay(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ReplayError> {
        let path = path.as_ref();
        fs::write(path, self.to_replay_string()).map_err(|source| ReplayError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Standard-normal sampler using the Marsaglia polar method.
struct PolarNormal {
    rng: Pcg64,
    spare: Option<f64>,
}

impl PolarNormal {
    fn new(seed: u64) -> Self {
        Self {
            rng: Pcg64::seed_from_u64(seed),
            spare: None,
        }
    }

    fn sample(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.rng.gen::<f64>() - 1.0;
            let v = 2.0 * self.rng.gen::<f64>() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let m = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * m);
                return u * m;
            }
        }
    }
}

pub fn generate_trade_sequence(seed: u64, steps: usize) -> TradeSequence {
    let mut normal = PolarNormal::new(seed);
    TradeSequence {
        seed: Some(seed),
        draws: (0..steps).map(|_| normal.sample()).collect(),
    }
}

/// Gain of a priced trade for the agent, marked at `p_mkt` and net of fee.
fn net_gain(q: &amm::SwapQuote, p_mkt: f64, fee_rate: f64) -> f64 {
    let fee = fee_rate * q.delta_x.abs() * q.spot_price_before;
    p_mkt * q.delta_x - q.delta_y - fee
}

fn affordable(q: &amm::SwapQuote, wallet: Wallet, fee_rate: f64) -> bool {
    let fee = fee_rate * q.delta_x.abs() * q.spot_price_before;
    wallet.x + q.delta_x >= 0.0 && wallet.y - q.delta_y - fee >= 0.0
}

/// Largest static-product buy whose Y cost plus fee fits `budget`.
///
/// Solves `k/(x − d) − y + φ·p₀·d = budget` for `u = x − d`:
/// `φp₀·u² + (budget + y − φp₀·x)·u − k = 0`, taking the positive root in
/// the cancellation-free form `u = 2k / (b + √(b² + 4φp₀k))`.
fn product_budget_buy(k: f64, pool: PoolState, budget: f64, fee_rate: f64) -> f64 {
    let p0 = k / (pool.x * pool.x);
    let qa = fee_rate * p0;
    let b = budget + pool.y - qa * pool.x;
    let u = 2.0 * k / (b + (b * b + 4.0 * qa * k).sqrt());
    pool.x - u
}

/// One clipped arbitrage trade against a static pool, or `None` when no
/// trade gains value at `p_mkt` after fees. Dynamic curves always yield
/// `None`: they sit at the market price after every retune.
pub fn arbitrage_decide(
    curve: &CurveSpec,
    pool: PoolState,
    p_mkt: f64,
    wallet: Wallet,
    fee_rate: f64,
) -> Option<TradeRequest> {
    let desired = match *curve {
        CurveSpec::StaticProduct { k } => {
            let target = (k / p_mkt).sqrt();
            let gap = pool.x - target;
            if gap.abs() <= 1e-12 * pool.x {
                return None;
            }
            if gap > 0.0 {
                let full = gap.min(amm::max_buyable_x(curve, pool));
                let cost = amm::quote(curve, pool, full).ok()?;
                if affordable(&cost, wallet, fee_rate) {
                    full
                } else {
                    product_budget_buy(k, pool, wallet.y, fee_rate).min(full)
                }
            } else {
                -(-gap).min(wallet.x)
            }
        }
        CurveSpec::StaticSum { .. } => {
            let p_pool = amm::spot_price(curve, pool).ok()?;
            if p_mkt > p_pool * (1.0 + fee_rate) {
                amm::max_buyable_x(curve, pool).min(wallet.y / (p_pool * (1.0 + fee_rate)))
            } else if p_mkt < p_pool / (1.0 + fee_rate) {
                -wallet.x.min(pool.y / p_pool)
            } else {
                return None;
            }
        }
        CurveSpec::DynamicSum { .. } | CurveSpec::DynamicProduct { .. } => return None,
    };

    let mut delta_x = desired;
    for _ in 0..8 {
        if delta_x == 0.0 || !delta_x.is_finite() {
            return None;
        }
        let q = amm::quote(curve, pool, delta_x).ok()?;
        if affordable(&q, wallet, fee_rate) {
            return (net_gain(&q, p_mkt, fee_rate) > 0.0)
                .then(|| TradeRequest::new(Agent::Arbitrageur, delta_x))
                .flatten();
        }
        delta_x *= BUDGET_SHRINK;
    }
    None
}
