//! Minute-bar OHLCV ingestion, liquid-session segmentation and synthetic series.
//!
//! The only on-disk format is a CSV with the header
//! `timestamp,open,high,low,close,volume` and ISO-8601 minute timestamps
//! (`2023-01-03T09:30`) in exchange-local time. Writing uses the shortest
//! round-trip decimal form of every price, so `write(parse(x)) == x` for any
//! file that was itself produced by [`write_ohlcv`].

use std::io::{Read, Write};

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, NaiveTime, Timelike, Weekday};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from;

pub const CSV_HEADER: [&str; 6] = ["timestamp", "open", "high", "low", "close", "volume"];
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M";

/// First minute of the liquid session (inclusive).
pub const SESSION_OPEN: NaiveTime = match NaiveTime::from_hms_opt(9, 30, 0) {
    Some(t) => t,
    None => unreachable!(),
};
/// End of the liquid session (exclusive).
pub const SESSION_CLOSE: NaiveTime = match NaiveTime::from_hms_opt(17, 0, 0) {
    Some(t) => t,
    None => unreachable!(),
};
/// Bars in a complete session: 09:30 through 16:59.
pub const SESSION_BARS: usize = 450;
/// Days missing more bars than this are flagged incomplete.
pub const DEFAULT_MAX_MISSING_BARS: usize = 5;

/// One OHLCV minute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinuteBar {
    pub timestamp: NaiveDateTime,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: u64,
}

impl MinuteBar {
    pub fn new(
        timestamp: NaiveDateTime,
        open: f64,
        high: f64,
        low: f64,
        close: f64,
        volume: u64,
    ) -> Result<Self> {
        let bar = Self {
            timestamp,
            open,
            high,
            low,
            close,
            volume,
        };
        bar.validate()?;
        Ok(bar)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |message: &str| {
            Err(Error::InvalidBar {
                timestamp: self.timestamp.format(TIMESTAMP_FORMAT).to_string(),
                message: message.to_string(),
            })
        };
        let prices = [self.open, self.high, self.low, self.close];
        if prices.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return fail("prices must be finite and strictly positive");
        }
        if self.low > self.open.min(self.close) {
            return fail("low above min(open, close)");
        }
        if self.high < self.open.max(self.close) {
            return fail("high below max(open, close)");
        }
        if self.low > self.high {
            return fail("low above high");
        }
        Ok(())
    }

    /// Minutes elapsed since the session open on this bar's date.
    pub fn session_minute(&self) -> i64 {
        minutes_since_open(self.timestamp.time())
    }
}

pub(crate) fn minutes_since_open(t: NaiveTime) -> i64 {
    (t - SESSION_OPEN).num_minutes()
}

fn in_session(ts: NaiveDateTime) -> bool {
    let t = ts.time();
    let weekday = !matches!(ts.date().weekday(), Weekday::Sat | Weekday::Sun);
    weekday && t >= SESSION_OPEN && t < SESSION_CLOSE && t.second() == 0
}

/// One session's ordered bars.
///
/// Complete days hold exactly [`SESSION_BARS`] bars at one-minute spacing, so
/// bar index `i` is minute `09:30 + i`. Small gaps (at most the configured
/// threshold) are forward-filled with flat zero-volume bars; days with larger
/// gaps keep their raw bars and are flagged `incomplete`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradingDay {
    pub date: NaiveDate,
    pub bars: Vec<MinuteBar>,
    /// Session minutes absent from the source data.
    pub missing_bars: usize,
    pub incomplete: bool,
}

impl TradingDay {
    pub fn closes(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.close).collect()
    }
}

/// Parses the OHLCV CSV. Rows are numbered from 1 (the header is row 1, the
/// first data row is row 2) in error messages.
pub fn parse_ohlcv<R: Read>(source: R) -> Result<Vec<MinuteBar>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::None)
        .from_reader(source);

    let header = reader.headers().map_err(|e| Error::Parse {
        row: 1,
        message: e.to_string(),
    })?;
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Parse {
            row: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                CSV_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut bars: Vec<MinuteBar> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        if record.len() != CSV_HEADER.len() {
            return Err(Error::Parse {
                row,
                message: format!("expected 6 fields, found {}", record.len()),
            });
        }
        let bar = parse_row(&record).map_err(|message| Error::Parse { row, message })?;
        if let Some(prev) = bars.last() {
            if bar.timestamp <= prev.timestamp {
                return Err(Error::Parse {
                    row,
                    message: format!(
                        "timestamp {} not after previous {}",
                        bar.timestamp.format(TIMESTAMP_FORMAT),
                        prev.timestamp.format(TIMESTAMP_FORMAT)
                    ),
                });
            }
        }
        bars.push(bar);
    }
    Ok(bars)
}

fn parse_row(record: &csv::StringRecord) -> std::result::Result<MinuteBar, String> {
    let timestamp = NaiveDateTime::parse_from_str(&record[0], TIMESTAMP_FORMAT)
        .map_err(|e| format!("bad timestamp `{}`: {e}", &record[0]))?;
    let price = |idx: usize, name: &str| -> std::result::Result<f64, String> {
        record[idx]
            .parse::<f64>()
            .map_err(|e| format!("bad {name} `{}`: {e}", &record[idx]))
    };
    let open = price(1, "open")?;
    let high = price(2, "high")?;
    let low = price(3, "low")?;
    let close = price(4, "close")?;
    let volume = record[5]
        .parse::<u64>()
        .map_err(|e| format!("bad volume `{}`: {e}", &record[5]))?;
    MinuteBar::new(timestamp, open, high, low, close, volume).map_err(|e| e.to_string())
}

/// Writes bars in the normalized CSV form (LF line endings, shortest
/// round-trip float formatting).
pub fn write_ohlcv<W: Write>(bars: &[MinuteBar], mut out: W) -> Result<()> {
    writeln!(out, "{}", CSV_HEADER.join(","))?;
    for b in bars {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            b.timestamp.format(TIMESTAMP_FORMAT),
            b.open,
            b.high,
            b.low,
            b.close,
            b.volume
        )?;
    }
    Ok(())
}

/// Groups time-ordered bars into sessions. Bars outside 09:30–17:00 or on
/// weekends are dropped; days missing more than `max_missing_bars` session
/// minutes are flagged incomplete, others are forward-filled to a full session.
pub fn segment_days(bars: &[MinuteBar], max_missing_bars: usize) -> Vec<TradingDay> {
    let mut days: Vec<TradingDay> = Vec::new();
    let mut current: Vec<MinuteBar> = Vec::new();

    let flush = |bars: &mut Vec<MinuteBar>, days: &mut Vec<TradingDay>| {
        if bars.is_empty() {
            return;
        }
        let raw = std::mem::take(bars);
        days.push(finish_day(raw, max_missing_bars));
    };

    for bar in bars.iter().filter(|b| in_session(b.timestamp)) {
        if let Some(last) = current.last() {
            if last.timestamp.date() != bar.timestamp.date() {
                flush(&mut current, &mut days);
            }
        }
        current.push(*bar);
    }
    flush(&mut current, &mut days);
    days
}

fn finish_day(raw: Vec<MinuteBar>, max_missing_bars: usize) -> TradingDay {
    let date = raw[0].timestamp.date();
    let missing_bars = SESSION_BARS.saturating_sub(raw.len());
    if missing_bars > max_missing_bars {
        return TradingDay {
            date,
            bars: raw,
            missing_bars,
            incomplete: true,
        };
    }
    if missing_bars == 0 {
        return TradingDay {
            date,
            bars: raw,
            missing_bars,
            incomplete: false,
        };
    }

    let mut filled = Vec::with_capacity(SESSION_BARS);
    let mut src = raw.iter().peekable();
    let open_ts = date.and_time(SESSION_OPEN);
    for i in 0..SESSION_BARS {
        let ts = open_ts + Duration::minutes(i as i64);
        match src.peek() {
            Some(b) if b.timestamp == ts => {
                filled.push(**b);
                src.next();
            }
            next => {
                // flat bar at the last known price; leading gaps use the first open
                let price = filled
                    .last()
                    .map(|b: &MinuteBar| b.close)
                    .or_else(|| next.map(|b| b.open))
                    .unwrap_or(raw[0].open);
                filled.push(MinuteBar {
                    timestamp: ts,
                    open: price,
                    high: price,
                    low: price,
                    close: price,
                    volume: 0,
                });
            }
        }
    }
    TradingDay {
        date,
        bars: filled,
        missing_bars,
        incomplete: false,
    }
}

/// Shape of a generated close-price path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SyntheticKind {
    /// Geometric random walk: per-minute log-return `drift + volatility * z`.
    RandomWalk,
    /// `close_k = start_price * exp(drift * (k + 1))`; `volatility` sets the wick size.
    DeterministicTrend,
    /// Log-price `drift * k + amplitude * sin(2πk / period_minutes)` plus
    /// i.i.d. Gaussian level noise of scale `volatility`.
    Sinusoid { period_minutes: f64, amplitude: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    #[serde(flatten)]
    pub kind: SyntheticKind,
    pub days: usize,
    pub volatility: f64,
    #[serde(default)]
    pub drift: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_start_price")]
    pub start_price: f64,
    #[serde(default = "default_start_date")]
    pub start_date: NaiveDate,
}

fn default_start_price() -> f64 {
    100.0
}

fn default_start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2021, 1, 4).expect("valid date")
}

impl SyntheticSpec {
    pub fn new(kind: SyntheticKind, days: usize, volatility: f64, drift: f64, seed: u64) -> Self {
        Self {
            kind,
            days,
            volatility,
            drift,
            seed,
            start_price: default_start_price(),
            start_date: default_start_date(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.days == 0 {
            return Err(Error::config("synthetic length must be at least one day"));
        }
        if !(self.volatility > 0.0) || !self.volatility.is_finite() {
            return Err(Error::config("synthetic volatility must be positive"));
        }
        if !self.drift.is_finite() {
            return Err(Error::config("synthetic drift must be finite"));
        }
        if !(self.start_price > 0.0) || !self.start_price.is_finite() {
            return Err(Error::config("synthetic start price must be positive"));
        }
        if let SyntheticKind::Sinusoid {
            period_minutes,
            amplitude,
        } = self.kind
        {
            if !(period_minutes > 0.0) || !amplitude.is_finite() {
                return Err(Error::config(
                    "sinusoid needs a positive period and a finite amplitude",
                ));
            }
        }
        Ok(())
    }
}

/// Generates `spec.days` complete weekday sessions starting at `spec.start_date`.
/// The output is a pure function of `spec`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<TradingDay>> {
    spec.validate()?;
    let mut rng = rng_from(spec.seed);
    let log_p0 = spec.start_price.ln();
    let mut prev_close = spec.start_price;
    let mut k: u64 = 0;
    let mut log_walk = log_p0;

    let mut days = Vec::with_capacity(spec.days);
    let mut date = spec.start_date;
    while days.len() < spec.days {
        if matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
            date = date.succ_opt().expect("date in range");
            continue;
        }
        let open_ts = date.and_time(SESSION_OPEN);
        let mut bars = Vec::with_capacity(SESSION_BARS);
        for i in 0..SESSION_BARS {
            let kf = k as f64;
            let (close, wick) = match spec.kind {
                SyntheticKind::RandomWalk => {
                    let z: f64 = rng.sample(StandardNormal);
                    log_walk += spec.drift + spec.volatility * z;
                    let w: f64 = rng.sample(StandardNormal);
                    (log_walk.exp(), spec.volatility * w.abs())
                }
                SyntheticKind::DeterministicTrend => {
                    ((log_p0 + spec.drift * (kf + 1.0)).exp(), spec.volatility)
                }
                SyntheticKind::Sinusoid {
                    period_minutes,
                    amplitude,
                } => {
                    let z: f64 = rng.sample(StandardNormal);
                    let phase = std::f64::consts::TAU * kf / period_minutes;
                    let lp = log_p0
                        + spec.drift * kf
                        + amplitude * phase.sin()
                        + spec.volatility * z;
                    let w: f64 = rng.sample(StandardNormal);
                    (lp.exp(), spec.volatility * w.abs())
                }
            };
            let open = prev_close;
            let high = open.max(close) * (1.0 + wick);
            let low = open.min(close) * (1.0 - wick.min(0.5));
            let volume = match spec.kind {
                SyntheticKind::DeterministicTrend => 1000,
                _ => rng.random_range(100..=2000),
            };
            bars.push(MinuteBar::new(
                open_ts + Duration::minutes(i as i64),
                open,
                high,
                low,
                close,
                volume,
            )?);
            prev_close = close;
            k += 1;
        }
        days.push(TradingDay {
            date,
            bars,
            missing_bars: 0,
            incomplete: false,
        });
        date = date.succ_opt().expect("date in range");
    }
    Ok(days)
}
