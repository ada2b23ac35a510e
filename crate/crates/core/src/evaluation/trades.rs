//! Round-trip trades recovered from a step log, and their summary statistics.

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::stats::ReturnBase;
use crate::env::StepRecord;
use crate::error::{Error, Result};

/// One long round trip. Prices are the fills at the open after the entry and
/// exit decisions; `pnl` is the sum of the RF rewards from the entry step to
/// the exit step, commissions included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub entry_time: NaiveDateTime,
    pub exit_time: NaiveDateTime,
    pub entry_price: f64,
    pub exit_price: f64,
    pub commission: f64,
    pub pnl: f64,
    /// `pnl` over the equity at entry: the day's base plus P&L realized earlier that day.
    pub ret: f64,
    pub holding_minutes: i64,
    pub forced_exit: bool,
}

struct Open {
    entry_time: NaiveDateTime,
    entry_price: f64,
    equity: f64,
    pnl: f64,
    commission: f64,
}

fn malformed(r: &StepRecord, what: &str) -> Error {
    Error::input(format!("malformed step log at {}: {what}", r.timestamp))
}

/// Splits a log into trades. Returns compound to the day's return: the
/// product of `1 + ret` over a day's trades equals `1 + pnl_day / base`.
pub fn extract_trades(log: &[StepRecord], base: ReturnBase) -> Result<Vec<TradeRecord>> {
    let mut trades = Vec::new();
    let mut open: Option<Open> = None;
    let mut prev: Option<&StepRecord> = None;
    let mut day_base = 0.0;
    let mut realized = 0.0;

    for r in log {
        let new_day = prev.is_none_or(|p| p.date() != r.date());
        if new_day {
            if open.is_some() {
                return Err(malformed(r, "position still open at end of day"));
            }
            if r.prev_action != 0 {
                return Err(malformed(r, "day starts with an open position"));
            }
            day_base = match base {
                ReturnBase::DecisionOpen => r.open,
                ReturnBase::Notional { value } => value,
            };
            realized = 0.0;
        } else {
            let p = prev.expect("not a new day");
            if p.done || r.minute != p.minute + 1 || r.prev_action != p.action {
                return Err(malformed(r, "steps are not consecutive"));
            }
        }
        if r.action > 1 || r.prev_action > 1 {
            return Err(malformed(r, "action outside {0, 1}"));
        }

        let fill_time = r.timestamp + Duration::minutes(1);
        match (r.prev_action, r.action) {
            (0, 1) => {
                open = Some(Open {
                    entry_time: fill_time,
                    entry_price: r.next_open,
                    equity: day_base + realized,
                    pnl: r.r_rf,
                    commission: r.commission,
                });
            }
            (1, a) => {
                let t = open.as_mut().ok_or_else(|| malformed(r, "exit without entry"))?;
                t.pnl += r.r_rf;
                t.commission += r.commission;
                if a == 0 {
                    let t = open.take().expect("checked above");
                    realized += t.pnl;
                    trades.push(TradeRecord {
                        entry_time: t.entry_time,
                        exit_time: fill_time,
                        entry_price: t.entry_price,
                        exit_price: r.next_open,
                        commission: t.commission,
                        pnl: t.pnl,
                        ret: t.pnl / t.equity,
                        holding_minutes: (fill_time - t.entry_time).num_minutes(),
                        forced_exit: r.forced,
                    });
                }
            }
            _ => realized += r.r_rf,
        }
        prev = Some(r);
    }
    if let (Some(_), Some(last)) = (&open, prev) {
        return Err(malformed(last, "log ends with an open position"));
    }
    Ok(trades)
}

/// Trade-level summary in percent and minutes. Empty sign subsets report 0
/// and set the matching flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeStats {
    pub num_trades: usize,
    pub winrate_pct: f64,
    pub mean_positive_pct: f64,
    pub mean_negative_pct: f64,
    pub avg_holding_minutes: f64,
    pub no_trades: bool,
    pub no_positive: bool,
    pub no_negative: bool,
}

pub fn trade_statistics(trades: &[TradeRecord]) -> TradeStats {
    let mean = |v: &[f64]| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let pos: Vec<f64> = trades.iter().filter(|t| t.ret > 0.0).map(|t| t.ret).collect();
    let neg: Vec<f64> = trades.iter().filter(|t| t.ret < 0.0).map(|t| t.ret).collect();
    let holding: Vec<f64> = trades.iter().map(|t| t.holding_minutes as f64).collect();
    let n = trades.len();
    TradeStats {
        num_trades: n,
        winrate_pct: if n == 0 { 0.0 } else { 100.0 * pos.len() as f64 / n as f64 },
        mean_positive_pct: 100.0 * mean(&pos),
        mean_negative_pct: 100.0 * mean(&neg),
        avg_holding_minutes: mean(&holding),
        no_trades: n == 0,
        no_positive: pos.is_empty(),
        no_negative: neg.is_empty(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn trade(ret: f64, hold: i64) -> TradeRecord {
        let t0 = NaiveDate::from_ymd_opt(2023, 1, 3).unwrap().and_hms_opt(10, 0, 0).unwrap();
        TradeRecord {
            entry_time: t0,
            exit_time: t0 + Duration::minutes(hold),
            entry_price: 100.0,
            exit_price: 100.0,
            commission: 0.0,
            pnl: ret * 100.0,
            ret,
            holding_minutes: hold,
            forced_exit: false,
        }
    }

    #[test]
    fn plus_one_minus_one() {
        let s = trade_statistics(&[trade(0.01, 5), trade(-0.01, 15)]);
        assert_eq!(s.num_trades, 2);
        assert_eq!(s.winrate_pct, 50.0);
        assert!((s.mean_positive_pct - 1.0).abs() < 1e-12);
        assert!((s.mean_negative_pct + 1.0).abs() < 1e-12);
        assert_eq!(s.avg_holding_minutes, 10.0);
    }

    #[test]
    fn empty_subsets_are_flagged() {
        let s = trade_statistics(&[trade(0.02, 3)]);
        assert_eq!(s.mean_negative_pct, 0.0);
        assert!(s.no_negative && !s.no_positive);
        let e = trade_statistics(&[]);
        assert!(e.no_trades && e.no_positive && e.no_negative);
        assert_eq!(e.winrate_pct, 0.0);
    }
}
