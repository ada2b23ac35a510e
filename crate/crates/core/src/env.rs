//! The intraday long/flat environment.
//!
//! One episode is one trading day, stepping minute by minute from the first
//! decision minute (10:32) through the forced exit (16:58). At minute `t` the
//! agent picks `a_t ∈ {0, 1}`, the target position for the next minute, and
//! the step pays out on bar `t + 1`:
//!
//! ```text
//! p_exec = O[t+1] if a_t != a_{t-1} else C[t]
//! c      = φ · O[t+1] · |a_t - a_{t-1}|
//! r_RF   = a_t · (C[t+1] - p_exec) - c
//! r_IF   = y_t · (C[t+1] - p_exec(y))        (same rule keyed on y_t != y_{t-1})
//! r_RIF  = r_RF - r_IF
//! ```
//!
//! Rewards are profits per unit position in price units. The commission is
//! rounded to the floating-point grid of the prices involved (a shift below
//! one ulp of the price), which makes `gross - c` exact so that matching the
//! oracle yields `r_RIF == -c` with no rounding residue.

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indicators::{
    window_at, DecisionSpan, IndicatorConfig, Observation, LOOKBACK_MINUTES, NUM_INDICATORS,
};
use crate::market_data::{minutes_since_open, MinuteBar, TradingDay, SESSION_BARS};
use crate::oracle::oracle_labels;

/// Discount factor; episodes are one finite trading day.
pub const GAMMA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RewardMode {
    #[serde(rename = "RF")]
    Rf,
    #[serde(rename = "RIF")]
    Rif,
}

impl std::fmt::Display for RewardMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RewardMode::Rf => "RF",
            RewardMode::Rif => "RIF",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    /// φ, charged on every position change.
    pub trading_commission: f64,
    /// ϑ, used only to generate the oracle labels.
    pub expert_commission: f64,
    pub first_decision: NaiveTime,
    pub forced_exit: NaiveTime,
    pub reward_mode: RewardMode,
    /// Charge φ on the liquidating trade at the forced exit minute.
    pub charge_forced_exit: bool,
    /// Final oracle label of each day.
    pub terminal_label: u8,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            trading_commission: 1e-4,
            expert_commission: 1e-4,
            first_decision: NaiveTime::from_hms_opt(10, 32, 0).expect("valid time"),
            forced_exit: NaiveTime::from_hms_opt(16, 58, 0).expect("valid time"),
            reward_mode: RewardMode::Rif,
            charge_forced_exit: true,
            terminal_label: 0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("trading commission", self.trading_commission),
            ("expert commission", self.expert_commission),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config(format!("{name} must be non-negative")));
            }
        }
        if self.terminal_label > 1 {
            return Err(Error::config("terminal label must be 0 or 1"));
        }
        self.span().map(|_| ())
    }

    /// Bar indices of the first decision and the forced exit.
    pub fn span(&self) -> Result<DecisionSpan> {
        let first = minutes_since_open(self.first_decision);
        let exit = minutes_since_open(self.forced_exit);
        if first < LOOKBACK_MINUTES as i64 {
            return Err(Error::config(format!(
                "first decision minute leaves {first} minutes of history, need {LOOKBACK_MINUTES}"
            )));
        }
        if exit <= first {
            return Err(Error::config("forced exit must come after the first decision"));
        }
        if exit + 1 >= SESSION_BARS as i64 {
            return Err(Error::config("forced exit needs a following bar in the session"));
        }
        Ok(DecisionSpan {
            first: first as usize,
            exit: exit as usize,
        })
    }
}

fn next_bar(bars: &[MinuteBar], t: usize) -> Result<(&MinuteBar, &MinuteBar)> {
    match (bars.get(t), bars.get(t + 1)) {
        (Some(cur), Some(next)) => Ok((cur, next)),
        _ => Err(Error::input(format!(
            "minute {t} has no following bar (day has {} bars)",
            bars.len()
        ))),
    }
}

fn check_binary(v: u8, what: &str) -> Result<()> {
    if v > 1 {
        Err(Error::input(format!("{what} must be 0 or 1, got {v}")))
    } else {
        Ok(())
    }
}

/// Next open when the position changes, otherwise the current close.
pub fn execution_price(changed: bool, bars: &[MinuteBar], t: usize) -> Result<f64> {
    let (cur, next) = next_bar(bars, t)?;
    Ok(if changed { next.open } else { cur.close })
}

fn ulp(x: f64) -> f64 {
    let exp = ((x.abs().to_bits() >> 52) & 0x7ff) as i64;
    if exp <= 52 {
        f64::from_bits(1)
    } else {
        f64::from_bits(((exp - 52) as u64) << 52)
    }
}

/// `φ · O[t+1] · |a_t - a_{t-1}|`, rounded to the finest ulp among the prices
/// the step touches.
pub fn commission(action: u8, prev_action: u8, bars: &[MinuteBar], t: usize, phi: f64) -> Result<f64> {
    check_binary(action, "action")?;
    check_binary(prev_action, "previous action")?;
    let (cur, next) = next_bar(bars, t)?;
    if action == prev_action || phi == 0.0 {
        return Ok(0.0);
    }
    let quantum = ulp(cur.close).min(ulp(next.open)).min(ulp(next.close));
    let raw = phi * next.open;
    Ok((raw / quantum).round() * quantum)
}

fn gross(position: u8, prev: u8, bars: &[MinuteBar], t: usize) -> Result<f64> {
    if position == 0 {
        return Ok(0.0);
    }
    let p_exec = execution_price(position != prev, bars, t)?;
    Ok(bars[t + 1].close - p_exec)
}

/// Agent's per-step profit net of commission.
pub fn reinforcement_feedback(
    action: u8,
    prev_action: u8,
    bars: &[MinuteBar],
    t: usize,
    phi: f64,
) -> Result<f64> {
    let c = commission(action, prev_action, bars, t, phi)?;
    Ok(gross(action, prev_action, bars, t)? - c)
}

/// Profit the oracle labels earn on the same step; carries no commission.
pub fn imitation_feedback(label: u8, prev_label: u8, bars: &[MinuteBar], t: usize) -> Result<f64> {
    check_binary(label, "label")?;
    check_binary(prev_label, "previous label")?;
    gross(label, prev_label, bars, t)
}

/// A day with its oracle labels and cached raw indicators, ready to be stepped.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedDay {
    pub day: TradingDay,
    pub span: DecisionSpan,
    /// Oracle labels, one per bar; zero outside the decision span.
    pub labels: Vec<u8>,
    raw: Vec<[f64; NUM_INDICATORS]>,
}

impl PreparedDay {
    /// Labels the decision-span closes with commission ϑ and caches features.
    pub fn new(day: TradingDay, env: &EnvConfig, indicators: &IndicatorConfig) -> Result<Self> {
        let span = env.span()?;
        let date = day.date.to_string();
        if day.incomplete {
            return Err(Error::Day {
                date,
                reason: format!("flagged incomplete ({} bars missing)", day.missing_bars),
            });
        }
        if day.bars.len() <= span.exit + 1 {
            return Err(Error::Day {
                date,
                reason: format!("only {} bars, episode needs {}", day.bars.len(), span.exit + 2),
            });
        }
        let closes: Vec<f64> = day.bars[span.first..=span.exit].iter().map(|b| b.close).collect();
        let y = oracle_labels(&closes, env.expert_commission, env.terminal_label)?;
        let mut labels = vec![0u8; day.bars.len()];
        labels[span.first..=span.exit].copy_from_slice(&y.labels);

        let raw = (span.first..=span.exit)
            .map(|t| indicators.raw(window_at(&day.bars, t)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            day,
            span,
            labels,
            raw,
        })
    }

    pub fn date(&self) -> NaiveDate {
        self.day.date
    }

    /// Same vector as [`crate::indicators::build_observation`], from the cache.
    pub fn observation(&self, t: usize, position: u8, indicators: &IndicatorConfig) -> Result<Observation> {
        let raw = self
            .raw
            .get(t.wrapping_sub(self.span.first))
            .ok_or_else(|| Error::input(format!("minute {t} outside the decision span")))?;
        Ok(Observation::from_parts(
            indicators.normalize(raw)?,
            position,
            self.span.remaining_fraction(t),
        ))
    }

    /// Open price at the first decision minute; the unit-position return base.
    pub fn decision_open(&self) -> f64 {
        self.day.bars[self.span.first].open
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Buy,
    Sell,
}

/// A fill at the next minute's open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Execution {
    pub side: Side,
    pub decision_time: NaiveDateTime,
    pub fill_price: f64,
    pub commission: f64,
    /// The fill was the forced end-of-day liquidation.
    pub forced: bool,
}

/// One line of the step log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub timestamp: NaiveDateTime,
    pub minute: usize,
    pub action: u8,
    pub prev_action: u8,
    pub label: u8,
    pub prev_label: u8,
    pub r_rf: f64,
    pub r_if: f64,
    pub r_rif: f64,
    /// Position held after this step.
    pub position: u8,
    pub open: f64,
    pub close: f64,
    pub next_open: f64,
    pub commission: f64,
    pub forced: bool,
    pub done: bool,
}

impl StepRecord {
    pub fn date(&self) -> NaiveDate {
        self.timestamp.date()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Observation for the next minute; `None` once the episode is over.
    pub observation: Option<Observation>,
    pub r_rf: f64,
    pub r_if: f64,
    pub r_rif: f64,
    pub done: bool,
    pub execution: Option<Execution>,
    pub record: StepRecord,
}

impl StepOutcome {
    pub fn reward(&self, mode: RewardMode) -> f64 {
        match mode {
            RewardMode::Rf => self.r_rf,
            RewardMode::Rif => self.r_rif,
        }
    }
}

/// Episode state over one prepared day.
#[derive(Debug, Clone)]
pub struct TradingEnv<'a> {
    day: &'a PreparedDay,
    config: &'a EnvConfig,
    indicators: &'a IndicatorConfig,
    t: usize,
    prev_action: u8,
    done: bool,
}

impl<'a> TradingEnv<'a> {
    /// Starts flat at the first decision minute.
    pub fn reset(
        day: &'a PreparedDay,
        config: &'a EnvConfig,
        indicators: &'a IndicatorConfig,
    ) -> Result<(Self, Observation)> {
        let span = config.span()?;
        if span != day.span {
            return Err(Error::config("prepared day was built for a different session span"));
        }
        let env = Self {
            day,
            config,
            indicators,
            t: span.first,
            prev_action: 0,
            done: false,
        };
        let obs = day.observation(span.first, 0, indicators)?;
        Ok((env, obs))
    }

    pub fn minute(&self) -> usize {
        self.t
    }

    pub fn position(&self) -> u8 {
        self.prev_action
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn config(&self) -> &EnvConfig {
        self.config
    }

    pub fn day(&self) -> &PreparedDay {
        self.day
    }

    /// Oracle label at the current minute. Rewards use it; observations never do.
    pub fn current_label(&self) -> u8 {
        self.day.labels[self.t]
    }

    pub fn step(&mut self, action: u8) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        check_binary(action, "action")?;
        let bars = &self.day.day.bars;
        let span = self.day.span;
        let t = self.t;
        let forced = t == span.exit;
        let action = if forced { 0 } else { action };
        let prev_action = self.prev_action;
        let label = self.day.labels[t];
        let prev_label = if t == span.first { 0 } else { self.day.labels[t - 1] };

        let mut c = commission(action, prev_action, bars, t, self.config.trading_commission)?;
        if forced && !self.config.charge_forced_exit {
            c = 0.0;
        }
        let r_rf = gross(action, prev_action, bars, t)? - c;
        let r_if = imitation_feedback(label, prev_label, bars, t)?;
        let r_rif = r_rf - r_if;

        let execution = (action != prev_action).then(|| Execution {
            side: if action == 1 { Side::Buy } else { Side::Sell },
            decision_time: bars[t].timestamp,
            fill_price: bars[t + 1].open,
            commission: c,
            forced: forced && prev_action == 1,
        });

        self.prev_action = action;
        self.done = forced;
        let record = StepRecord {
            timestamp: bars[t].timestamp,
            minute: t,
            action,
            prev_action,
            label,
            prev_label,
            r_rf,
            r_if,
            r_rif,
            position: action,
            open: bars[t].open,
            close: bars[t].close,
            next_open: bars[t + 1].open,
            commission: c,
            forced,
            done: forced,
        };
        let observation = if forced {
            None
        } else {
            self.t += 1;
            Some(self.day.observation(self.t, action, self.indicators)?)
        };
        Ok(StepOutcome {
            observation,
            r_rf,
            r_if,
            r_rif,
            done: forced,
            execution,
            record,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indicators::build_observation;
    use crate::market_data::{generate_synthetic, SyntheticKind, SyntheticSpec};
    use chrono::NaiveDate;

    fn bar(minute: i64, open: f64, close: f64) -> MinuteBar {
        let t0 = NaiveDate::from_ymd_opt(2023, 1, 3).unwrap().and_hms_opt(9, 30, 0).unwrap();
        MinuteBar {
            timestamp: t0 + chrono::Duration::minutes(minute),
            open,
            high: open.max(close) + 1.0,
            low: open.min(close) - 1.0,
            close,
            volume: 1,
        }
    }

    fn pair(c_t: f64, o_next: f64, c_next: f64) -> Vec<MinuteBar> {
        vec![bar(0, c_t, c_t), bar(1, o_next, c_next)]
    }

    fn day(seed: u64) -> TradingDay {
        let spec = SyntheticSpec::new(SyntheticKind::RandomWalk, 1, 4e-4, 0.0, seed);
        generate_synthetic(&spec).unwrap().remove(0)
    }

    #[test]
    fn execution_price_cases() {
        let bars = pair(100.4, 101.0, 101.5);
        assert_eq!(execution_price(true, &bars, 0).unwrap(), 101.0);
        assert_eq!(execution_price(false, &bars, 0).unwrap(), 100.4);
        let diff = execution_price(true, &bars, 0).unwrap() - execution_price(false, &bars, 0).unwrap();
        assert_eq!(diff, 101.0 - 100.4);
        assert!(execution_price(true, &bars, 1).is_err());
    }

    #[test]
    fn reinforcement_feedback_cases() {
        let bars = pair(99.0, 100.0, 101.0);
        assert_eq!(reinforcement_feedback(0, 0, &bars, 0, 0.001).unwrap(), 0.0);
        let entry = reinforcement_feedback(1, 0, &bars, 0, 0.001).unwrap();
        assert!((entry - 0.9).abs() < 1e-12, "{entry}");
        let exit = reinforcement_feedback(0, 1, &bars, 0, 0.001).unwrap();
        assert!((exit + 0.1).abs() < 1e-12, "{exit}");
        assert!(reinforcement_feedback(2, 0, &bars, 0, 0.001).is_err());
    }

    #[test]
    fn imitation_feedback_cases() {
        let bars = pair(100.0, 100.0, 100.5);
        assert_eq!(imitation_feedback(0, 1, &bars, 0).unwrap(), 0.0);
        assert_eq!(imitation_feedback(0, 0, &bars, 0).unwrap(), 0.0);
        assert_eq!(imitation_feedback(1, 1, &bars, 0).unwrap(), 0.5);
        assert_eq!(imitation_feedback(1, 0, &bars, 0).unwrap(), 0.5);
    }

    #[test]
    fn commission_is_close_to_nominal() {
        let bars = pair(100.2, 100.3, 100.1);
        let c = commission(1, 0, &bars, 0, 3e-4).unwrap();
        assert!((c - 3e-4 * 100.3).abs() <= 1e-13);
        assert_eq!(commission(1, 1, &bars, 0, 3e-4).unwrap(), 0.0);
    }

    #[test]
    fn config_span_defaults() {
        let span = EnvConfig::default().span().unwrap();
        assert_eq!(span, DecisionSpan { first: 62, exit: 448 });
        assert_eq!(span.len(), 387);
        let bad = EnvConfig {
            first_decision: NaiveTime::from_hms_opt(10, 0, 0).unwrap(),
            ..EnvConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn reset_is_flat_and_deterministic() {
        let cfg = EnvConfig::default();
        let ind = IndicatorConfig::default();
        let prepared = PreparedDay::new(day(1), &cfg, &ind).unwrap();
        let (env, obs) = TradingEnv::reset(&prepared, &cfg, &ind).unwrap();
        assert_eq!(env.position(), 0);
        assert_eq!(env.minute(), 62);
        assert_eq!(obs.0[6], -1.0);
        let (_, again) = TradingEnv::reset(&prepared, &cfg, &ind).unwrap();
        assert_eq!(obs, again);
        assert_eq!(obs, build_observation(&prepared.day, 62, 0, &ind, prepared.span).unwrap());
    }

    #[test]
    fn incomplete_day_is_rejected() {
        let mut d = day(2);
        d.bars.truncate(300);
        d.incomplete = true;
        d.missing_bars = 150;
        let cfg = EnvConfig::default();
        assert!(matches!(
            PreparedDay::new(d, &cfg, &IndicatorConfig::default()),
            Err(Error::Day { .. })
        ));
    }

    #[test]
    fn cached_observations_match_builder() {
        let cfg = EnvConfig::default();
        let ind = IndicatorConfig::default();
        let prepared = PreparedDay::new(day(3), &cfg, &ind).unwrap();
        for t in [62, 100, 300, 448] {
            for pos in [0, 1] {
                assert_eq!(
                    prepared.observation(t, pos, &ind).unwrap(),
                    build_observation(&prepared.day, t, pos, &ind, prepared.span).unwrap()
                );
            }
        }
    }

    #[test]
    fn forced_exit_liquidates_open_position() {
        let cfg = EnvConfig::default();
        let ind = IndicatorConfig::default();
        let prepared = PreparedDay::new(day(4), &cfg, &ind).unwrap();
        let (mut env, _) = TradingEnv::reset(&prepared, &cfg, &ind).unwrap();
        let mut last = None;
        let mut steps = 0;
        while !env.is_done() {
            last = Some(env.step(1).unwrap());
            steps += 1;
        }
        assert_eq!(steps, 387);
        let out = last.unwrap();
        assert!(out.done);
        assert!(out.observation.is_none());
        assert_eq!(env.position(), 0);
        let exec = out.execution.unwrap();
        assert_eq!(exec.side, Side::Sell);
        assert!(exec.forced);
        assert_eq!(exec.decision_time.time(), NaiveTime::from_hms_opt(16, 58, 0).unwrap());
        assert_eq!(out.record.position, 0);
        let bars = &prepared.day.bars;
        assert!((exec.commission - 1e-4 * bars[449].open).abs() < 1e-12);
        assert!(matches!(env.step(0), Err(Error::EpisodeDone)));
    }

    #[test]
    fn forced_exit_commission_can_be_waived() {
        let cfg = EnvConfig {
            charge_forced_exit: false,
            ..EnvConfig::default()
        };
        let ind = IndicatorConfig::default();
        let prepared = PreparedDay::new(day(4), &cfg, &ind).unwrap();
        let (mut env, _) = TradingEnv::reset(&prepared, &cfg, &ind).unwrap();
        let mut last = None;
        while !env.is_done() {
            last = Some(env.step(1).unwrap());
        }
        let out = last.unwrap();
        assert_eq!(out.r_rf, 0.0);
    }

    #[test]
    fn rf_telescopes_over_held_intervals() {
        let cfg = EnvConfig {
            trading_commission: 0.0,
            ..EnvConfig::default()
        };
        let ind = IndicatorConfig::default();
        let prepared = PreparedDay::new(day(5), &cfg, &ind).unwrap();
        let bars = &prepared.day.bars;
        let (mut env, _) = TradingEnv::reset(&prepared, &cfg, &ind).unwrap();
        // hold 100..=149 and 300..=399 (decision minutes)
        let wants = |t: usize| (100..150).contains(&t) || (300..400).contains(&t);
        let mut total = 0.0;
        while !env.is_done() {
            let t = env.minute();
            total += env.step(wants(t) as u8).unwrap().r_rf;
        }
        // entry fills at O[t+1]; accrual stops at the close of the exit decision minute
        let expected = (bars[150].close - bars[101].open) + (bars[400].close - bars[301].open);
        assert!((total - expected).abs() < 1e-9, "{total} vs {expected}");
    }
}
