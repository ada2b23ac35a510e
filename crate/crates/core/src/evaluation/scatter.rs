//! RF versus RIF reward pairs under a uniformly random policy.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::backtest::{Policy, RandomPolicy};
use crate::env::{EnvConfig, PreparedDay, TradingEnv};
use crate::error::{Error, Result};
use crate::indicators::IndicatorConfig;
use crate::seed::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub r_rf: f64,
    pub r_rif: f64,
    pub label: u8,
    pub action: u8,
    pub prev_label: u8,
    pub prev_action: u8,
    pub commission: f64,
}

/// Steps a random policy through `days` (cycling as needed) until `n_steps`
/// pairs are logged.
pub fn reward_scatter(
    days: &[PreparedDay],
    env: &EnvConfig,
    indicators: &IndicatorConfig,
    n_steps: usize,
    seed: u64,
) -> Result<Vec<ScatterPoint>> {
    if days.is_empty() {
        return Err(Error::input("scatter needs at least one labelled day"));
    }
    let mut policy = RandomPolicy { rng: rng_from(seed) };
    let mut points = Vec::with_capacity(n_steps);
    'outer: for day in days.iter().cycle() {
        let (mut e, mut obs) = TradingEnv::reset(day, env, indicators)?;
        loop {
            if points.len() == n_steps {
                break 'outer;
            }
            let ctx = crate::backtest::DecisionContext {
                minute: e.minute(),
                first_minute: day.span.first,
                label: e.current_label(),
            };
            let a = policy.act(&obs, &ctx)?;
            let out = e.step(a)?;
            let r = out.record;
            points.push(ScatterPoint {
                r_rf: r.r_rf,
                r_rif: r.r_rif,
                label: r.label,
                action: r.action,
                prev_label: r.prev_label,
                prev_action: r.prev_action,
                commission: r.commission,
            });
            match out.observation {
                Some(o) => obs = o,
                None => break,
            }
        }
    }
    Ok(points)
}

pub fn scatter_csv(points: &[ScatterPoint], header_comment: &str) -> String {
    let mut s = String::with_capacity(points.len() * 32);
    s.push_str(header_comment);
    s.push_str("r_rf,r_rif,y,a\n");
    for p in points {
        let _ = writeln!(s, "{},{},{},{}", p.r_rf, p.r_rif, p.label, p.action);
    }
    s
}
