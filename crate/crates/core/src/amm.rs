//! Two-token AMM curves: static and market-tracking variants of the
//! constant-sum and constant-product invariants.
//!
//! Every curve is written as `y = f(x)` over the pool reserves. The dynamic
//! variants carry extra parameters that are re-solved whenever the market
//! price moves:
//!
//! ```text
//! dynamic sum:      p·(x − a) + y = c
//! dynamic product:  w·(x − a)·y  = k
//! ```
//!
//! Quotes are closed form and fee-free. Fees and wallet settlement live in
//! [`crate::engine`].

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Multiplicative guard that keeps product-curve buys strictly inside the domain.
pub const DOMAIN_GUARD: f64 = 1e-9;

/// Relative tolerance used for every curve identity check.
pub const CURVE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum AmmError {
    #[error("x = {x} is outside the curve domain")]
    Domain { x: f64 },
    #[error("pool cannot supply {requested} X (reserve {available})")]
    InsufficientPoolX { requested: f64, available: f64 },
    #[error("pool cannot pay out {requested} Y (reserve {available})")]
    InsufficientPoolY { requested: f64, available: f64 },
    #[error("trade size must be finite and non-zero, got {0}")]
    ZeroTrade(f64),
    #[error("quote was built on a different pool state")]
    StaleQuote,
    #[error("market price must be positive, got {0}")]
    NonPositivePrice(f64),
    #[error("pool reserves ({x}, {y}) must both be positive")]
    DegeneratePool { x: f64, y: f64 },
    #[error("{op} is not defined for a {kind} curve")]
    WrongKind { op: &'static str, kind: AmmKind },
}

pub type Result<T> = std::result::Result<T, AmmError>;

/// The four mechanisms compared by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AmmKind {
    StaticSum,
    StaticProduct,
    DynamicSum,
    DynamicProduct,
}

impl AmmKind {
    pub const ALL: [AmmKind; 4] = [
        AmmKind::StaticSum,
        AmmKind::StaticProduct,
        AmmKind::DynamicSum,
        AmmKind::DynamicProduct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AmmKind::StaticSum => "static-sum",
            AmmKind::StaticProduct => "static-product",
            AmmKind::DynamicSum => "dynamic-sum",
            AmmKind::DynamicProduct => "dynamic-product",
        }
    }

    pub fn is_dynamic(self) -> bool {
        matches!(self, AmmKind::DynamicSum | AmmKind::DynamicProduct)
    }

    pub fn is_product(self) -> bool {
        matches!(self, AmmKind::StaticProduct | AmmKind::DynamicProduct)
    }
}

impl fmt::Display for AmmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error(
    "unknown AMM kind `{0}` (expected static-sum, static-product, dynamic-sum or dynamic-product)"
)]
pub struct ParseKindError(String);

impl FromStr for AmmKind {
    type Err = ParseKindError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        AmmKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ParseKindError(s.to_string()))
    }
}

/// Pool reserves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolState {
    pub x: f64,
    pub y: f64,
}

impl PoolState {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Active curve together with its live parameters.
///
/// `DynamicSum::slope` is the market price captured at the most recent
/// retune; it is the slope used for quoting until the next retune.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveSpec {
    StaticSum { c: f64 },
    StaticProduct { k: f64 },
    DynamicSum { c: f64, a: f64, slope: f64 },
    DynamicProduct { k: f64, a: f64, w: f64 },
}

impl CurveSpec {
    /// Curve of the given kind passing through `pool` at unit price.
    ///
    /// `c = x + y`, `k = x·y`, `a = 0`, `w = 1`.
    pub fn through(kind: AmmKind, pool: PoolState) -> Self {
        let c = pool.x + pool.y;
        let k = pool.x * pool.y;
        match kind {
            AmmKind::StaticSum => CurveSpec::StaticSum { c },
            AmmKind::StaticProduct => CurveSpec::StaticProduct { k },
            AmmKind::DynamicSum => CurveSpec::DynamicSum {
                c,
                a: 0.0,
                slope: 1.0,
            },
            AmmKind::DynamicProduct => CurveSpec::DynamicProduct { k, a: 0.0, w: 1.0 },
        }
    }

    pub fn kind(&self) -> AmmKind {
        match self {
            CurveSpec::StaticSum { .. } => AmmKind::StaticSum,
            CurveSpec::StaticProduct { .. } => AmmKind::StaticProduct,
            CurveSpec::DynamicSum { .. } => AmmKind::DynamicSum,
            CurveSpec::DynamicProduct { .. } => AmmKind::DynamicProduct,
        }
    }

    /// Horizontal shift `a`; zero for the static curves.
    pub fn shift(&self) -> f64 {
        match *self {
            CurveSpec::DynamicSum { a, .. } | CurveSpec::DynamicProduct { a, .. } => a,
            _ => 0.0,
        }
    }

    /// Relative residual of the curve equation at `pool`.
    ///
    /// Sum kinds are measured against `c`, product kinds against `k`.
    pub fn residual(&self, pool: PoolState) -> f64 {
        let (lhs, rhs) = match *self {
            CurveSpec::StaticSum { c } => (pool.x + pool.y, c),
            CurveSpec::DynamicSum { c, a, slope } => (slope * (pool.x - a) + pool.y, c),
            CurveSpec::StaticProduct { k } => (pool.x * pool.y, k),
            CurveSpec::DynamicProduct { k, a, w } => (w * (pool.x - a) * pool.y, k),
        };
        (lhs - rhs).abs() / rhs.abs().max(1.0)
    }

    pub fn contains(&self, pool: PoolState) -> bool {
        self.residual(pool) <= CURVE_TOLERANCE
    }
}

/// Y reserve on the curve at X reserve `x`.
pub fn curve_y_at(curve: &CurveSpec, x: f64) -> Result<f64> {
    let y = match *curve {
        CurveSpec::StaticSum { c } => c - x,
        CurveSpec::DynamicSum { c, a, slope } => c - slope * (x - a),
        CurveSpec::StaticProduct { k } => {
            if x <= 0.0 {
                return Err(AmmError::Domain { x });
            }
            k / x
        }
        CurveSpec::DynamicProduct { k, a, w } => {
            if x <= a {
                return Err(AmmError::Domain { x });
            }
            (k / w) / (x - a)
        }
    };
    if !y.is_finite() || y < 0.0 {
        return Err(AmmError::Domain { x });
    }
    Ok(y)
}

/// Instantaneous pool price `−dy/dx`, in Y per X.
pub fn spot_price(curve: &CurveSpec, pool: PoolState) -> Result<f64> {
    match *curve {
        CurveSpec::StaticSum { .. } => Ok(1.0),
        CurveSpec::DynamicSum { slope, .. } => Ok(slope),
        CurveSpec::StaticProduct { k } => {
            if pool.x <= 0.0 {
                return Err(AmmError::Domain { x: pool.x });
            }
            Ok(k / (pool.x * pool.x))
        }
        CurveSpec::DynamicProduct { k, a, w } => {
            let d = pool.x - a;
            if d <= 0.0 {
                return Err(AmmError::Domain { x: pool.x });
            }
            Ok((k / w) / (d * d))
        }
    }
}

/// Priced swap against a fixed curve.
///
/// `delta_x > 0` means the trader receives X from the pool; `delta_y` is the
/// Y the trader pays (negative when the trader receives Y).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwapQuote {
    pub delta_x: f64,
    pub delta_y: f64,
    pub origin: PoolState,
    pub new_pool: PoolState,
    pub spot_price_before: f64,
}

pub fn quote(curve: &CurveSpec, pool: PoolState, delta_x: f64) -> Result<SwapQuote> {
    if delta_x == 0.0 || !delta_x.is_finite() {
        return Err(AmmError::ZeroTrade(delta_x));
    }
    let spot_price_before = spot_price(curve, pool)?;
    let x_n = pool.x - delta_x;
    let product = curve.kind().is_product();
    if x_n < 0.0 || (product && x_n == 0.0) {
        return Err(AmmError::InsufficientPoolX {
            requested: delta_x,
            available: pool.x,
        });
    }
    let (delta_y, y_n) = match *curve {
        CurveSpec::StaticSum { c } | CurveSpec::DynamicSum { c, .. } => {
            // Along a line Δy = slope·Δx; stepping by it avoids re-deriving y
            // from c and keeps the fill exactly at the spot price.
            let delta_y = spot_price_before * delta_x;
            let y_n = pool.y + delta_y;
            // Draining the Y side exactly lands a rounding error below zero.
            if y_n < 0.0 && y_n >= -CURVE_TOLERANCE * c.abs().max(1.0) {
                (delta_y, 0.0)
            } else if y_n < 0.0 {
                return Err(AmmError::InsufficientPoolY {
                    requested: -delta_y,
                    available: pool.y,
                });
            } else {
                (delta_y, y_n)
            }
        }
        _ => {
            let y_n = curve_y_at(curve, x_n)?;
            (y_n - pool.y, y_n)
        }
    };
    Ok(SwapQuote {
        delta_x,
        delta_y,
        origin: pool,
        new_pool: PoolState::new(x_n, y_n),
        spot_price_before,
    })
}

/// Applies a quote. The caller settles wallets.
pub fn execute_swap(pool: PoolState, quote: &SwapQuote) -> Result<PoolState> {
    if pool != quote.origin {
        return Err(AmmError::StaleQuote);
    }
    Ok(quote.new_pool)
}

/// Re-solves `a` so the line passes through `pool` with slope `p_mkt`.
pub fn retune_dynamic_sum(curve: &CurveSpec, pool: PoolState, p_mkt: f64) -> Result<CurveSpec> {
    let CurveSpec::DynamicSum { c, .. } = *curve else {
        return Err(AmmError::WrongKind {
            op: "retune_dynamic_sum",
            kind: curve.kind(),
        });
    };
    if p_mkt <= 0.0 || !p_mkt.is_finite() {
        return Err(AmmError::NonPositivePrice(p_mkt));
    }
    let a = pool.x - (c - pool.y) / p_mkt;
    Ok(CurveSpec::DynamicSum { c, a, slope: p_mkt })
}

/// Re-solves `(a, w)` so the hyperbola passes through `pool` with spot price
/// `p_mkt`: `a = x − y/p`, `w = k·p/y²`.
pub fn retune_dynamic_product(curve: &CurveSpec, pool: PoolState, p_mkt: f64) -> Result<CurveSpec> {
    let CurveSpec::DynamicProduct { k, .. } = *curve else {
        return Err(AmmError::WrongKind {
            op: "retune_dynamic_product",
            kind: curve.kind(),
        });
    };
    if p_mkt <= 0.0 || !p_mkt.is_finite() {
        return Err(AmmError::NonPositivePrice(p_mkt));
    }
    if pool.x <= 0.0 || pool.y <= 0.0 || pool.x.is_nan() || pool.y.is_nan() {
        return Err(AmmError::DegeneratePool {
            x: pool.x,
            y: pool.y,
        });
    }
    let a = pool.x - pool.y / p_mkt;
    let w = k * p_mkt / (pool.y * pool.y);
    Ok(CurveSpec::DynamicProduct { k, a, w })
}

/// Retunes a dynamic curve; static curves are returned unchanged.
pub fn retune(curve: &CurveSpec, pool: PoolState, p_mkt: f64) -> Result<CurveSpec> {
    match curve {
        CurveSpec::DynamicSum { .. } => retune_dynamic_sum(curve, pool, p_mkt),
        CurveSpec::DynamicProduct { .. } => retune_dynamic_product(curve, pool, p_mkt),
        _ => Ok(*curve),
    }
}

/// Largest X amount a single buy may take from the pool.
///
/// Product curves never reach their asymptote, so the bound is shrunk by
/// [`DOMAIN_GUARD`]. The reserve itself also caps the dynamic hyperbola when
/// its shift is negative.
pub fn max_buyable_x(curve: &CurveSpec, pool: PoolState) -> f64 {
    match curve {
        CurveSpec::StaticSum { .. } | CurveSpec::DynamicSum { .. } => pool.x.max(0.0),
        CurveSpec::StaticProduct { .. } | CurveSpec::DynamicProduct { .. } => {
            let room = (pool.x - curve.shift()).min(pool.x).max(0.0);
            room * (1.0 - DOMAIN_GUARD)
        }
    }
}
