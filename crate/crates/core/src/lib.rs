//! Static and market-tracking automated market makers.
//!
//! [`amm`] holds the curve math, [`metrics`] the evaluation quantities,
//! [`market`] the price oracle, [`agents`] the trader and arbitrageur,
//! [`engine`] the simulation loop and [`cli`] the command-line front end.

pub mod agents;
pub mod amm;
pub mod cli;
pub mod engine;
pub mod market;
pub mod metrics;

pub use agents::{Agent, TradeRequest, TradeSequence, Wallet};
pub use amm::{AmmError, AmmKind, CurveSpec, PoolState, SwapQuote};
pub use engine::{run, run_comparison, run_with_trades, RunOutput, SimConfig, SimRecord};
pub use market::PriceSchedule;
