//! Per-agent backtest summaries and their CSV tables.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::stats::{compounded_return, daily_returns_with, return_statistics, ReturnBase, ReturnStats};
use super::trades::{extract_trades, trade_statistics, TradeStats};
use crate::backtest::label_agreement;
use crate::env::StepRecord;
use crate::error::Result;

pub const TRADE_TABLE_HEADER: &str =
    "agent,num_trades,winrate_pct,mean_positive_return_pct,mean_negative_return_pct,avg_holding_minutes,no_positive,no_negative";
pub const RETURN_TABLE_HEADER: &str = "agent,days,mean_return_pct,volatility_pct,max_drawdown_pct,sharpe,cumulative_return_pct";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentReport {
    pub agent: String,
    pub trades: TradeStats,
    pub returns: ReturnStats,
    pub cumulative_return_pct: f64,
    /// Share of non-forced decisions matching the oracle label.
    pub label_agreement: f64,
}

/// Summarizes one agent's test-period step log.
pub fn agent_report(agent: &str, log: &[StepRecord], base: ReturnBase) -> Result<AgentReport> {
    let trades = extract_trades(log, base)?;
    let daily: Vec<f64> = daily_returns_with(log, base).iter().map(|d| d.ret).collect();
    Ok(AgentReport {
        agent: agent.to_string(),
        trades: trade_statistics(&trades),
        returns: return_statistics(&daily)?,
        cumulative_return_pct: 100.0 * compounded_return(&daily),
        label_agreement: label_agreement(log),
    })
}

/// First line of every generated CSV.
pub fn provenance_line(config_hash: &str, seed: u64) -> String {
    format!("# config_hash={config_hash} seed={seed}\n")
}

pub fn trade_table_csv(rows: &[AgentReport], provenance: &str) -> String {
    let mut s = format!("{provenance}{TRADE_TABLE_HEADER}\n");
    for r in rows {
        let t = &r.trades;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.agent,
            t.num_trades,
            t.winrate_pct,
            t.mean_positive_pct,
            t.mean_negative_pct,
            t.avg_holding_minutes,
            t.no_positive,
            t.no_negative
        );
    }
    s
}

pub fn return_table_csv(rows: &[AgentReport], provenance: &str) -> String {
    let mut s = format!("{provenance}{RETURN_TABLE_HEADER}\n");
    for r in rows {
        let m = &r.returns;
        let sharpe = m.sharpe.map_or_else(|| "undefined".to_string(), |v| v.to_string());
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.agent, m.days, m.mean_pct, m.volatility_pct, m.max_drawdown_pct, sharpe, r.cumulative_return_pct
        );
    }
    s
}
