//! Price indicators and the normalized observation vector.
//!
//! Every indicator reads a window of bars ending at the current minute and
//! nothing after it. Wilder-smoothed indicators (RSI, ADX) are seeded from the
//! start of the window they are given, so the observation builder always hands
//! them the same fixed-length lookback.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::{MinuteBar, TradingDay};

/// Minutes of history before the current bar that features may read.
pub const LOOKBACK_MINUTES: usize = 61;
/// Bars in the observation window (lookback plus the current bar).
pub const WINDOW_BARS: usize = LOOKBACK_MINUTES + 1;
pub const OBS_DIM: usize = 8;
pub const NUM_INDICATORS: usize = 6;

fn require(bars: &[MinuteBar], needed: usize) -> Result<()> {
    if bars.len() < needed {
        Err(Error::InsufficientHistory {
            needed,
            available: bars.len(),
        })
    } else {
        Ok(())
    }
}

fn check_period(period: usize) -> Result<()> {
    if period == 0 {
        Err(Error::config("indicator period must be positive"))
    } else {
        Ok(())
    }
}

/// Williams %R over the last `period` bars, in [-100, 0]. A flat range yields -50.
pub fn williams_r(bars: &[MinuteBar], period: usize) -> Result<f64> {
    check_period(period)?;
    require(bars, period)?;
    let w = &bars[bars.len() - period..];
    let hh = w.iter().map(|b| b.high).fold(f64::NEG_INFINITY, f64::max);
    let ll = w.iter().map(|b| b.low).fold(f64::INFINITY, f64::min);
    let close = w[w.len() - 1].close;
    if hh == ll {
        return Ok(-50.0);
    }
    Ok((-100.0 * (hh - close) / (hh - ll)).clamp(-100.0, 0.0))
}

/// Wilder RSI, seeded with simple averages over the first `period` close
/// changes of the window and smoothed over the rest. Zero average loss gives
/// 100; no gains and no losses gives 50.
pub fn rsi(bars: &[MinuteBar], period: usize) -> Result<f64> {
    check_period(period)?;
    require(bars, period + 1)?;
    let changes: Vec<f64> = bars.windows(2).map(|w| w[1].close - w[0].close).collect();
    let n = period as f64;
    let (mut gain, mut loss) = changes[..period].iter().fold((0.0, 0.0), |(g, l), &d| {
        (g + d.max(0.0), l + (-d).max(0.0))
    });
    gain /= n;
    loss /= n;
    for &d in &changes[period..] {
        gain = (gain * (n - 1.0) + d.max(0.0)) / n;
        loss = (loss * (n - 1.0) + (-d).max(0.0)) / n;
    }
    Ok(if loss == 0.0 {
        if gain == 0.0 {
            50.0
        } else {
            100.0
        }
    } else {
        let rs = gain / loss;
        (100.0 - 100.0 / (1.0 + rs)).clamp(0.0, 100.0)
    })
}

/// Commodity channel index with the usual 0.015 constant. Zero mean deviation gives 0.
pub fn cci(bars: &[MinuteBar], period: usize) -> Result<f64> {
    check_period(period)?;
    require(bars, period)?;
    let tp: Vec<f64> = bars[bars.len() - period..]
        .iter()
        .map(|b| (b.high + b.low + b.close) / 3.0)
        .collect();
    let n = period as f64;
    let sma = tp.iter().sum::<f64>() / n;
    let md = tp.iter().map(|x| (x - sma).abs()).sum::<f64>() / n;
    if md == 0.0 {
        return Ok(0.0);
    }
    Ok((tp[tp.len() - 1] - sma) / (0.015 * md))
}

/// Ultimate oscillator with weights 4:2:1 from the shortest to the longest
/// period, in [0, 100]. A period whose true ranges sum to zero contributes 0.5.
pub fn ultimate_oscillator(bars: &[MinuteBar], periods: [usize; 3]) -> Result<f64> {
    let mut p = periods;
    p.sort_unstable();
    for &x in &p {
        check_period(x)?;
    }
    require(bars, p[2] + 1)?;
    let avg = |period: usize| {
        let start = bars.len() - period;
        let (bp, tr) = (start..bars.len()).fold((0.0, 0.0), |(bp, tr), i| {
            let prev_close = bars[i - 1].close;
            let lo = bars[i].low.min(prev_close);
            let hi = bars[i].high.max(prev_close);
            (bp + (bars[i].close - lo), tr + (hi - lo))
        });
        if tr == 0.0 {
            0.5
        } else {
            bp / tr
        }
    };
    let uo = 100.0 * (4.0 * avg(p[0]) + 2.0 * avg(p[1]) + avg(p[2])) / 7.0;
    Ok(uo.clamp(0.0, 100.0))
}

/// Wilder ADX over the whole window: directional movement and true range are
/// smoothed from the first `period` moves, DX is averaged over its first
/// `period` values and smoothed thereafter. Needs `2 * period` bars.
pub fn adx(bars: &[MinuteBar], period: usize) -> Result<f64> {
    check_period(period)?;
    require(bars, 2 * period)?;
    let n = period as f64;
    let moves: Vec<(f64, f64, f64)> = bars
        .windows(2)
        .map(|w| {
            let (prev, cur) = (&w[0], &w[1]);
            let up = cur.high - prev.high;
            let down = prev.low - cur.low;
            let plus = if up > down && up > 0.0 { up } else { 0.0 };
            let minus = if down > up && down > 0.0 { down } else { 0.0 };
            let tr = (cur.high - cur.low)
                .max((cur.high - prev.close).abs())
                .max((cur.low - prev.close).abs());
            (tr, plus, minus)
        })
        .collect();

    let dx = |tr: f64, plus: f64, minus: f64| {
        if tr == 0.0 {
            return 0.0;
        }
        let pdi = 100.0 * plus / tr;
        let mdi = 100.0 * minus / tr;
        if pdi + mdi == 0.0 {
            0.0
        } else {
            100.0 * (pdi - mdi).abs() / (pdi + mdi)
        }
    };

    let (mut s_tr, mut s_plus, mut s_minus) = moves[..period]
        .iter()
        .fold((0.0, 0.0, 0.0), |(a, b, c), m| (a + m.0, b + m.1, c + m.2));
    let mut dxs = vec![dx(s_tr, s_plus, s_minus)];
    for m in &moves[period..] {
        s_tr = s_tr - s_tr / n + m.0;
        s_plus = s_plus - s_plus / n + m.1;
        s_minus = s_minus - s_minus / n + m.2;
        dxs.push(dx(s_tr, s_plus, s_minus));
    }
    let mut adx = dxs[..period].iter().sum::<f64>() / n;
    for &d in &dxs[period..] {
        adx = (adx * (n - 1.0) + d) / n;
    }
    Ok(adx.clamp(0.0, 100.0))
}

/// Rate of change in percent over `period` bars.
pub fn roc(bars: &[MinuteBar], period: usize) -> Result<f64> {
    check_period(period)?;
    require(bars, period + 1)?;
    let last = bars[bars.len() - 1].close;
    let base = bars[bars.len() - 1 - period].close;
    Ok(100.0 * (last - base) / base)
}

/// Maps `x` clamped to `[lo, hi]` onto `[-1, 1]`.
pub fn minmax_normalize(x: f64, lo: f64, hi: f64) -> Result<f64> {
    if !(lo < hi) {
        return Err(Error::config(format!("degenerate bounds [{lo}, {hi}]")));
    }
    Ok(2.0 * (x.clamp(lo, hi) - lo) / (hi - lo) - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }
}

/// Normalization bounds in indicator order: Williams %R, RSI, CCI, UO, ADX, ROC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureBounds {
    pub williams_r: Bounds,
    pub rsi: Bounds,
    pub cci: Bounds,
    pub ultimate_oscillator: Bounds,
    pub adx: Bounds,
    pub roc: Bounds,
}

impl FeatureBounds {
    pub fn as_array(&self) -> [Bounds; NUM_INDICATORS] {
        [
            self.williams_r,
            self.rsi,
            self.cci,
            self.ultimate_oscillator,
            self.adx,
            self.roc,
        ]
    }
}

impl Default for FeatureBounds {
    fn default() -> Self {
        Self {
            williams_r: Bounds::new(-100.0, 0.0),
            rsi: Bounds::new(0.0, 100.0),
            // placeholders until fitted on a training window
            cci: Bounds::new(-300.0, 300.0),
            ultimate_oscillator: Bounds::new(0.0, 100.0),
            adx: Bounds::new(0.0, 100.0),
            roc: Bounds::new(-1.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IndicatorConfig {
    pub williams_period: usize,
    pub rsi_period: usize,
    pub cci_period: usize,
    pub uo_periods: [usize; 3],
    pub adx_period: usize,
    pub roc_period: usize,
    pub bounds: FeatureBounds,
}

impl Default for IndicatorConfig {
    fn default() -> Self {
        Self {
            williams_period: 14,
            rsi_period: 14,
            cci_period: 20,
            uo_periods: [7, 14, 28],
            adx_period: 14,
            roc_period: 10,
            bounds: FeatureBounds::default(),
        }
    }
}

impl IndicatorConfig {
    pub fn validate(&self) -> Result<()> {
        let periods = [
            self.williams_period,
            self.rsi_period,
            self.cci_period,
            self.uo_periods[0],
            self.uo_periods[1],
            self.uo_periods[2],
            self.adx_period,
            self.roc_period,
        ];
        if periods.iter().any(|&p| p == 0 || p > 60) {
            return Err(Error::config("indicator periods must lie in 1..=60"));
        }
        if 2 * self.adx_period > WINDOW_BARS {
            return Err(Error::config("ADX period too long for the lookback window"));
        }
        for b in self.bounds.as_array() {
            if !(b.lo < b.hi) || !b.lo.is_finite() || !b.hi.is_finite() {
                return Err(Error::config(format!(
                    "normalization bounds must satisfy lo < hi, got [{}, {}]",
                    b.lo, b.hi
                )));
            }
        }
        Ok(())
    }

    /// Raw indicator values for a window ending at the current bar.
    pub fn raw(&self, window: &[MinuteBar]) -> Result<[f64; NUM_INDICATORS]> {
        Ok([
            williams_r(window, self.williams_period)?,
            rsi(window, self.rsi_period)?,
            cci(window, self.cci_period)?,
            ultimate_oscillator(window, self.uo_periods)?,
            adx(window, self.adx_period)?,
            roc(window, self.roc_period)?,
        ])
    }

    pub fn normalize(&self, raw: &[f64; NUM_INDICATORS]) -> Result<[f64; NUM_INDICATORS]> {
        let bounds = self.bounds.as_array();
        let mut out = [0.0; NUM_INDICATORS];
        for i in 0..NUM_INDICATORS {
            out[i] = minmax_normalize(raw[i], bounds[i].lo, bounds[i].hi)?;
        }
        Ok(out)
    }
}

/// Decision minutes of an episode, as bar indices into a complete day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionSpan {
    pub first: usize,
    /// Forced-exit minute, the last step of the episode.
    pub exit: usize,
}

impl DecisionSpan {
    pub fn len(&self) -> usize {
        self.exit - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        self.exit < self.first
    }

    /// Remaining fraction of the episode at minute `t`: 1 at the first decision, 0 at exit.
    pub fn remaining_fraction(&self, t: usize) -> f64 {
        if self.exit <= self.first {
            return 0.0;
        }
        let left = self.exit.saturating_sub(t) as f64;
        (left / (self.exit - self.first) as f64).clamp(0.0, 1.0)
    }
}

/// The agent's state vector: six normalized indicators, position, time remaining.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    pub fn from_parts(indicators: [f64; NUM_INDICATORS], position: u8, remaining: f64) -> Self {
        let mut v = [0.0; OBS_DIM];
        v[..NUM_INDICATORS].copy_from_slice(&indicators);
        v[6] = if position == 1 { 1.0 } else { -1.0 };
        v[7] = 2.0 * remaining.clamp(0.0, 1.0) - 1.0;
        Self(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// The lookback window for minute `t`.
pub fn window_at(bars: &[MinuteBar], t: usize) -> Result<&[MinuteBar]> {
    if t < LOOKBACK_MINUTES || t >= bars.len() {
        return Err(Error::InsufficientHistory {
            needed: LOOKBACK_MINUTES + 1,
            available: (t + 1).min(bars.len()),
        });
    }
    Ok(&bars[t - LOOKBACK_MINUTES..=t])
}

/// Observation at minute `t` of `day`. Reads bars `t - 61 ..= t` only.
pub fn build_observation(
    day: &TradingDay,
    t: usize,
    position: u8,
    config: &IndicatorConfig,
    span: DecisionSpan,
) -> Result<Observation> {
    if position > 1 {
        return Err(Error::input(format!("position must be 0 or 1, got {position}")));
    }
    let raw = config.raw(window_at(&day.bars, t)?)?;
    Ok(Observation::from_parts(
        config.normalize(&raw)?,
        position,
        span.remaining_fraction(t),
    ))
}

/// Fits CCI and ROC bounds to the min/max raw values seen at decision minutes
/// of `days` (the training window). Other bounds keep their fixed ranges.
pub fn fit_bounds(
    config: &IndicatorConfig,
    days: &[TradingDay],
    span: DecisionSpan,
) -> Result<IndicatorConfig> {
    let mut cci = (f64::INFINITY, f64::NEG_INFINITY);
    let mut roc = (f64::INFINITY, f64::NEG_INFINITY);
    for day in days.iter().filter(|d| !d.incomplete) {
        for t in span.first..=span.exit.min(day.bars.len().saturating_sub(1)) {
            let raw = config.raw(window_at(&day.bars, t)?)?;
            cci = (cci.0.min(raw[2]), cci.1.max(raw[2]));
            roc = (roc.0.min(raw[5]), roc.1.max(raw[5]));
        }
    }
    let widen = |(lo, hi): (f64, f64), fallback: Bounds| {
        if !lo.is_finite() || !hi.is_finite() {
            fallback
        } else if lo < hi {
            Bounds::new(lo, hi)
        } else {
            Bounds::new(lo - 1.0, hi + 1.0)
        }
    };
    let mut out = *config;
    out.bounds.cci = widen(cci, config.bounds.cci);
    out.bounds.roc = widen(roc, config.bounds.roc);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{generate_synthetic, SyntheticKind, SyntheticSpec};
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn bars_from_closes(closes: &[f64]) -> Vec<MinuteBar> {
        let t0 = NaiveDate::from_ymd_opt(2023, 1, 3)
            .unwrap()
            .and_hms_opt(9, 30, 0)
            .unwrap();
        let mut prev = closes[0];
        closes
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let b = MinuteBar {
                    timestamp: t0 + chrono::Duration::minutes(i as i64),
                    open: prev,
                    high: prev.max(c),
                    low: prev.min(c),
                    close: c,
                    volume: 1,
                };
                prev = c;
                b
            })
            .collect()
    }

    fn span() -> DecisionSpan {
        DecisionSpan { first: 62, exit: 448 }
    }

    #[test]
    fn flat_prices_give_neutral_rsi() {
        let bars = bars_from_closes(&[100.0; 30]);
        assert_eq!(rsi(&bars, 14).unwrap(), 50.0);
    }

    #[test]
    fn rising_closes_put_williams_at_zero() {
        let closes: Vec<f64> = (0..14).map(|i| 100.0 + i as f64).collect();
        let bars = bars_from_closes(&closes);
        assert_eq!(williams_r(&bars, 14).unwrap(), 0.0);
    }

    #[test]
    fn rsi_matches_hand_computation() {
        // 15 closes -> 14 changes, simple averages only
        let closes = [
            44.34, 44.09, 44.15, 43.61, 44.33, 44.83, 45.10, 45.42, 45.84, 46.08, 45.89, 46.03,
            45.61, 46.28, 46.28,
        ];
        // gains: .06 .72 .50 .27 .32 .42 .24 .14 .67 = 3.34 ; losses: .25 .54 .19 .42 = 1.40
        let gains = 0.06 + 0.72 + 0.50 + 0.27 + 0.32 + 0.42 + 0.24 + 0.14 + 0.67;
        let losses = 0.25 + 0.54 + 0.19 + 0.42;
        let expected = 100.0 - 100.0 / (1.0 + gains / losses);
        let got = rsi(&bars_from_closes(&closes), 14).unwrap();
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
        assert!((got - 70.4641).abs() < 1e-3);
    }

    #[test]
    fn roc_and_cci_simple_values() {
        let closes: Vec<f64> = (0..=10).map(|i| 100.0 + i as f64).collect();
        let bars = bars_from_closes(&closes);
        assert!((roc(&bars, 10).unwrap() - 10.0).abs() < 1e-12);
        let flat = bars_from_closes(&[50.0; 30]);
        assert_eq!(cci(&flat, 20).unwrap(), 0.0);
        assert_eq!(adx(&flat, 14).unwrap(), 0.0);
        assert_eq!(ultimate_oscillator(&flat, [7, 14, 28]).unwrap(), 50.0);
    }

    #[test]
    fn insufficient_history_errors() {
        let bars = bars_from_closes(&[1.0; 10]);
        assert!(matches!(rsi(&bars, 14), Err(Error::InsufficientHistory { .. })));
        assert!(matches!(adx(&bars, 14), Err(Error::InsufficientHistory { .. })));
        assert!(matches!(williams_r(&bars, 14), Err(Error::InsufficientHistory { .. })));
    }

    #[test]
    fn normalize_endpoints_and_clamp() {
        assert_eq!(minmax_normalize(10.0, 10.0, 20.0).unwrap(), -1.0);
        assert_eq!(minmax_normalize(15.0, 10.0, 20.0).unwrap(), 0.0);
        assert_eq!(minmax_normalize(25.0, 10.0, 20.0).unwrap(), 1.0);
        assert!(minmax_normalize(1.0, 2.0, 2.0).is_err());
    }

    #[test]
    fn observation_position_and_time_features() {
        let spec = SyntheticSpec::new(SyntheticKind::RandomWalk, 1, 3e-4, 0.0, 3);
        let day = &generate_synthetic(&spec).unwrap()[0];
        let cfg = IndicatorConfig::default();
        let first = build_observation(day, 62, 0, &cfg, span()).unwrap();
        assert_eq!(first.0[6], -1.0);
        assert_eq!(first.0[7], 1.0);
        let last = build_observation(day, 448, 1, &cfg, span()).unwrap();
        assert_eq!(last.0[6], 1.0);
        assert_eq!(last.0[7], -1.0);
        assert_eq!(first, build_observation(day, 62, 0, &cfg, span()).unwrap());
        assert!(build_observation(day, 60, 0, &cfg, span()).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = IndicatorConfig::default();
        cfg.validate().unwrap();
        cfg.rsi_period = 61;
        assert!(cfg.validate().is_err());
        let mut cfg = IndicatorConfig::default();
        cfg.bounds.cci = Bounds::new(1.0, 1.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn fitted_bounds_cover_training_values() {
        let spec = SyntheticSpec::new(SyntheticKind::RandomWalk, 2, 3e-4, 0.0, 9);
        let days = generate_synthetic(&spec).unwrap();
        let fitted = fit_bounds(&IndicatorConfig::default(), &days, span()).unwrap();
        fitted.validate().unwrap();
        for day in &days {
            for t in 62..=448 {
                let raw = fitted.raw(window_at(&day.bars, t).unwrap()).unwrap();
                assert!(raw[2] >= fitted.bounds.cci.lo && raw[2] <= fitted.bounds.cci.hi);
                assert!(raw[5] >= fitted.bounds.roc.lo && raw[5] <= fitted.bounds.roc.hi);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn observation_ignores_future_bars(seed in 0u64..1000, t in 61usize..440, bump in 0.5f64..2.0) {
            let spec = SyntheticSpec::new(SyntheticKind::RandomWalk, 1, 5e-4, 0.0, seed);
            let day = generate_synthetic(&spec).unwrap().remove(0);
            let cfg = IndicatorConfig::default();
            let before = build_observation(&day, t, 0, &cfg, span()).unwrap();
            let mut mutated = day.clone();
            for b in &mut mutated.bars[t + 1..] {
                b.open *= bump;
                b.high *= bump;
                b.low *= bump;
                b.close *= bump;
            }
            prop_assert_eq!(before, build_observation(&mutated, t, 0, &cfg, span()).unwrap());
        }

        #[test]
        fn observation_components_in_unit_box(seed in 0u64..1000, t in 61usize..450, pos in 0u8..2) {
            let spec = SyntheticSpec::new(SyntheticKind::RandomWalk, 1, 1e-3, 0.0, seed);
            let day = generate_synthetic(&spec).unwrap().remove(0);
            let obs = build_observation(&day, t, pos, &IndicatorConfig::default(), span()).unwrap();
            for v in obs.0 {
                prop_assert!((-1.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn raw_indicators_stay_in_textbook_ranges(seed in 0u64..1000, t in 61usize..450) {
            let spec = SyntheticSpec::new(SyntheticKind::RandomWalk, 1, 1e-3, 0.0, seed);
            let day = generate_synthetic(&spec).unwrap().remove(0);
            let raw = IndicatorConfig::default().raw(window_at(&day.bars, t).unwrap()).unwrap();
            prop_assert!((-100.0..=0.0).contains(&raw[0]));
            prop_assert!((0.0..=100.0).contains(&raw[1]));
            prop_assert!((0.0..=100.0).contains(&raw[3]));
            prop_assert!((0.0..=100.0).contains(&raw[4]));
        }
    }
}
