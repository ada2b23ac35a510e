//! Daily returns and the annualized return statistics.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::env::StepRecord;
use crate::error::{Error, Result};

pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

/// Denominator that turns a day's currency P&L into a return.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReturnBase {
    /// Open price at the day's first decision minute (one unit of the asset).
    #[default]
    DecisionOpen,
    /// A fixed notional in price units.
    Notional { value: f64 },
}

impl ReturnBase {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ReturnBase::DecisionOpen => Ok(()),
            ReturnBase::Notional { value } if value > 0.0 && value.is_finite() => Ok(()),
            ReturnBase::Notional { value } => Err(Error::config(format!("notional must be positive, got {value}"))),
        }
    }

    fn resolve(&self, decision_open: f64) -> f64 {
        match *self {
            ReturnBase::DecisionOpen => decision_open,
            ReturnBase::Notional { value } => value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyReturn {
    pub date: NaiveDate,
    /// Sum of RF rewards over the day, in price units.
    pub pnl: f64,
    pub base: f64,
    pub ret: f64,
}

/// Groups a step log by date. Each day's base is the open of its first logged step.
pub fn daily_returns_with(log: &[StepRecord], base: ReturnBase) -> Vec<DailyReturn> {
    let mut out: Vec<DailyReturn> = Vec::new();
    for r in log {
        match out.last_mut() {
            Some(d) if d.date == r.date() => d.pnl += r.r_rf,
            _ => out.push(DailyReturn {
                date: r.date(),
                pnl: r.r_rf,
                base: base.resolve(r.open),
                ret: 0.0,
            }),
        }
    }
    for d in &mut out {
        d.ret = d.pnl / d.base;
    }
    out
}

pub fn daily_returns(log: &[StepRecord]) -> Vec<DailyReturn> {
    daily_returns_with(log, ReturnBase::DecisionOpen)
}

/// `Π(1 + r) - 1`.
pub fn compounded_return(returns: &[f64]) -> f64 {
    returns.iter().fold(1.0, |acc, r| acc * (1.0 + r)) - 1.0
}

/// Largest peak-to-trough decline of the compounded equity curve starting at 1,
/// as a fraction.
pub fn max_drawdown(returns: &[f64]) -> f64 {
    let mut equity = 1.0;
    let mut peak = 1.0_f64;
    let mut mdd = 0.0_f64;
    for r in returns {
        equity *= 1.0 + r;
        peak = peak.max(equity);
        mdd = mdd.max((peak - equity) / peak);
    }
    mdd
}

/// Annualized daily-return statistics, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnStats {
    pub days: usize,
    pub mean_pct: f64,
    pub volatility_pct: f64,
    pub max_drawdown_pct: f64,
    /// `None` when the volatility is zero.
    pub sharpe: Option<f64>,
}

pub fn return_statistics(returns: &[f64]) -> Result<ReturnStats> {
    if returns.len() < 2 {
        return Err(Error::input(format!(
            "return statistics need at least 2 daily returns, got {}",
            returns.len()
        )));
    }
    if let Some(bad) = returns.iter().find(|r| !r.is_finite()) {
        return Err(Error::NonFinite(format!("daily return {bad}")));
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0);
    let mu = TRADING_DAYS_PER_YEAR * mean;
    let sigma = TRADING_DAYS_PER_YEAR.sqrt() * var.sqrt();
    Ok(ReturnStats {
        days: returns.len(),
        mean_pct: 100.0 * mu,
        volatility_pct: 100.0 * sigma,
        max_drawdown_pct: 100.0 * max_drawdown(returns),
        sharpe: (sigma > 0.0).then(|| mu / sigma),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_zero_returns() {
        let s = return_statistics(&[0.0; 5]).unwrap();
        assert_eq!(s.mean_pct, 0.0);
        assert_eq!(s.volatility_pct, 0.0);
        assert_eq!(s.max_drawdown_pct, 0.0);
        assert_eq!(s.sharpe, None);
    }

    #[test]
    fn up_ten_down_ten() {
        let s = return_statistics(&[0.10, -0.10]).unwrap();
        assert!((s.max_drawdown_pct - 10.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_returns() {
        assert!(return_statistics(&[0.01]).is_err());
    }

    #[test]
    fn compounding() {
        assert!((compounded_return(&[0.1, -0.1]) - (-0.01)).abs() < 1e-15);
        assert_eq!(compounded_return(&[]), 0.0);
    }

    proptest! {
        #[test]
        fn drawdown_ignores_new_highs(rs in prop::collection::vec(-0.05f64..0.05, 1..40)) {
            let before = max_drawdown(&rs);
            let mut equity = 1.0;
            let mut peak = 1.0_f64;
            for r in &rs {
                equity *= 1.0 + r;
                peak = peak.max(equity);
            }
            let mut ext = rs.clone();
            ext.push(peak / equity * 1.01 - 1.0);
            prop_assert_eq!(max_drawdown(&ext), before);
            prop_assert!((0.0..=1.0).contains(&before));
        }

        #[test]
        fn annualization_is_linear(rs in prop::collection::vec(-0.05f64..0.05, 2..40), k in 0.1f64..10.0) {
            let a = return_statistics(&rs).unwrap();
            let scaled: Vec<f64> = rs.iter().map(|r| r * k).collect();
            let b = return_statistics(&scaled).unwrap();
            prop_assert!((b.mean_pct - k * a.mean_pct).abs() <= 1e-9 * (1.0 + a.mean_pct.abs() * k));
            prop_assert!((b.volatility_pct - k * a.volatility_pct).abs() <= 1e-9 * (1.0 + a.volatility_pct * k));
            if let (Some(sa), Some(sb)) = (a.sharpe, b.sharpe) {
                prop_assert!((sa - sb).abs() <= 1e-9 * (1.0 + sa.abs()));
            }
        }
    }
}
