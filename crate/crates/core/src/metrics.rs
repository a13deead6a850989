//! Pool value, slippage and divergence loss.

use thiserror::Error;

use crate::amm::{self, AmmError, CurveSpec, PoolState, SwapQuote};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum MetricsError {
    #[error("reference value of the original holdings is zero")]
    ZeroBaseValue,
    #[error("price ratio must be positive, got {0}")]
    NonPositiveRho(f64),
    #[error(transparent)]
    Amm(#[from] AmmError),
}

/// Party whose holdings are being valued.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Holder {
    Pool,
    Trader,
    Arbitrageur,
}

/// Holdings marked to a reference price, in Y units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueSnapshot {
    pub holder: Holder,
    pub x_value: f64,
    pub y_value: f64,
    pub total: f64,
    pub reference_price: f64,
}

impl ValueSnapshot {
    pub fn new(holder: Holder, x: f64, y: f64, price: f64) -> Self {
        let x_value = price * x;
        Self {
            holder,
            x_value,
            y_value: y,
            total: x_value + y,
            reference_price: price,
        }
    }
}

/// `p·x + y`.
pub fn pool_value(x: f64, y: f64, p: f64) -> f64 {
    p * x + y
}

/// Slippage of an already-priced trade: `Δy − p₀·Δx`.
///
/// For a buy this is the Y paid above the pre-trade price; for a sell it is
/// the Y received short of it. Both reduce to the same signed expression.
pub fn slippage_of(quote: &SwapQuote) -> f64 {
    quote.delta_y - quote.spot_price_before * quote.delta_x
}

pub fn slippage(curve: &CurveSpec, pool: PoolState, delta_x: f64) -> Result<f64, MetricsError> {
    let q = amm::quote(curve, pool, delta_x)?;
    Ok(slippage_of(&q))
}

/// Relative value change of `(x_n, y_n)` against `(x_o, y_o)`, both valued at
/// `p_n`. Negative means the new holdings are worth less.
pub fn divergence_loss_general(
    p_n: f64,
    x_o: f64,
    y_o: f64,
    x_n: f64,
    y_n: f64,
) -> Result<f64, MetricsError> {
    let base = pool_value(x_o, y_o, p_n);
    if base == 0.0 {
        return Err(MetricsError::ZeroBaseValue);
    }
    Ok((pool_value(x_n, y_n, p_n) - base) / base)
}

/// Closed form for a static constant-product pool: `(2√ρ − 1 − ρ)/(1 + ρ)`
/// with `ρ = p_n / p_o`.
pub fn divergence_loss_constant_product(rho: f64) -> Result<f64, MetricsError> {
    if rho <= 0.0 || !rho.is_finite() {
        return Err(MetricsError::NonPositiveRho(rho));
    }
    Ok((2.0 * rho.sqrt() - 1.0 - rho) / (1.0 + rho))
}
