//! Intraday trading agents trained with imitation-augmented rewards.
//!
//! The crate is organised bottom-up:
//!
//! - [`market_data`]: minute-bar ingestion, session segmentation and synthetic series.
//! - [`indicators`]: the six price indicators and the 8-dimensional observation.
//! - [`oracle`]: commission-aware oracle trend labels (the expert) and their return math.
//! - [`env`]: the episodic long/flat environment emitting RF, IF and RIF rewards.
//! - [`neural`]: a small tanh actor-critic with analytic gradients and Adam.
//! - [`ppo`]: rollouts, GAE, the clipped surrogate update and early-stopped training.
//! - [`backtest`]: running fixed policies over days and collecting step logs.
//! - [`evaluation`]: rolling windows, grid search, trade/return statistics, reward scatter.
//! - [`pipeline`]: run configuration and the end-to-end workflows driven by the CLI.

pub mod backtest;
pub mod env;
pub mod error;
pub mod evaluation;
pub mod indicators;
pub mod market_data;
pub mod neural;
pub mod oracle;
pub mod pipeline;
pub mod ppo;
pub mod seed;

pub use error::{Error, ErrorKind, Result};

/// One basis point as a fraction.
pub const BPS: f64 = 1e-4;

/// Converts a commission quoted in basis points to a fraction.
pub fn bps(value: f64) -> f64 {
    value * BPS
}
