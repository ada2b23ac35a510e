//! Walk-forward train/validation/test windows over an ordered list of days.

use std::ops::Range;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Window lengths, either in calendar months or in trading days. Windows
/// advance by the test length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WindowSpec {
    Months {
        train: u32,
        validation: u32,
        test: u32,
    },
    Days {
        train: usize,
        validation: usize,
        test: usize,
    },
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec::Months {
            train: 12,
            validation: 3,
            test: 3,
        }
    }
}

impl WindowSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            WindowSpec::Months { train, validation, test } => train > 0 && validation > 0 && test > 0,
            WindowSpec::Days { train, validation, test } => train > 0 && validation > 0 && test > 0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config("window lengths must be positive"))
        }
    }
}

/// Index ranges into the day list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RollingWindow {
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
}

fn month_index(d: NaiveDate) -> i64 {
    d.year() as i64 * 12 + d.month0() as i64
}

/// Builds windows over `dates` (sorted ascending). The last test range may be
/// shorter than a full period; every day after the first training+validation
/// span lands in exactly one test range.
pub fn make_windows(dates: &[NaiveDate], spec: WindowSpec) -> Result<Vec<RollingWindow>> {
    spec.validate()?;
    if dates.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::input("dates must be strictly increasing"));
    }
    match spec {
        WindowSpec::Days { train, validation, test } => {
            let n = dates.len();
            if n < train + validation + test {
                return Err(Error::input(format!(
                    "{n} days cannot fill a {train}+{validation}+{test} day window"
                )));
            }
            let mut out = Vec::new();
            let mut start = 0;
            while start + train + validation < n {
                let v = start + train;
                let t = v + validation;
                out.push(RollingWindow {
                    train: start..v,
                    validation: v..t,
                    test: t..(t + test).min(n),
                });
                start += test;
            }
            Ok(out)
        }
        WindowSpec::Months { train, validation, test } => {
            let (Some(first), Some(last)) = (dates.first(), dates.last()) else {
                return Err(Error::input("no days to window"));
            };
            let m0 = month_index(*first);
            let span = month_index(*last) - m0 + 1;
            let (tr, va, te) = (train as i64, validation as i64, test as i64);
            if span < tr + va + te {
                return Err(Error::input(format!(
                    "data covers {span} months, windows need at least {}",
                    tr + va + te
                )));
            }
            // first day index whose month offset is >= m
            let at = |m: i64| dates.partition_point(|d| month_index(*d) - m0 < m);
            let mut out = Vec::new();
            let mut k = 0;
            while k + tr + va < span {
                let w = RollingWindow {
                    train: at(k)..at(k + tr),
                    validation: at(k + tr)..at(k + tr + va),
                    test: at(k + tr + va)..at(k + tr + va + te),
                };
                if !w.train.is_empty() && !w.validation.is_empty() && !w.test.is_empty() {
                    out.push(w);
                }
                k += te;
            }
            Ok(out)
        }
    }
}
