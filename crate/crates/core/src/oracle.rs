//! Oracle trend labels: the hindsight long/flat series that maximizes
//! commission-adjusted cumulative return, and the return arithmetic it is
//! judged by.
//!
//! Labels live on the same index as the prices. A run of ones starting at `a`
//! and ending before the first zero at `b` is a position entered at `p[a]` and
//! exited at `p[b]`; a run still open at the end is marked at the final price.
//! Only opening a position pays commission.
//!
//! The dynamic program works in log space: maximizing `Σ log(1 + r_i)` is the
//! same as maximizing `Π (1 + r_i) - 1`, and in log space every transition
//! contributes an additive constant:
//!
//! | from → to | delta                          |
//! |-----------|--------------------------------|
//! | 0 → 0     | 0                              |
//! | 0 → 1     | `-ln(1 + ϑ)`                   |
//! | 1 → 1     | `ln(p[t] / p[t-1])`            |
//! | 1 → 0     | `ln(p[t] / p[t-1])`            |

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest series length accepted by [`brute_force_labels`].
pub const BRUTE_FORCE_MAX_LEN: usize = 20;

/// Binary oracle labels for one price series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSeries {
    pub labels: Vec<u8>,
    /// Commission ϑ as a fraction.
    pub commission: f64,
    pub terminal: u8,
}

/// One long position implied by a label series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub entry: usize,
    /// Index of the first zero after the run, or the last index when the run
    /// is still open at the end of the series.
    pub exit: usize,
    pub entry_price: f64,
    pub exit_price: f64,
    pub ret: f64,
    pub closed_at_end: bool,
}

/// The filled dynamic-programming tables.
#[derive(Debug, Clone, PartialEq)]
pub struct DpTables {
    /// `state[i][t]`: best cumulative log-return at `t` while in state `i`.
    pub state: [Vec<f64>; 2],
    /// `transition[t][i][j]`: log-return delta for moving from state `i` at
    /// `t` to state `j` at `t + 1`.
    pub transition: Vec<[[f64; 2]; 2]>,
}

fn check_prices(p: &[f64]) -> Result<()> {
    if p.iter().any(|x| !x.is_finite() || *x <= 0.0) {
        return Err(Error::input("prices must be finite and strictly positive"));
    }
    Ok(())
}

fn check_commission(theta: f64) -> Result<()> {
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(Error::input(format!("commission must be non-negative, got {theta}")));
    }
    Ok(())
}

fn check_label(y: u8) -> Result<()> {
    if y > 1 {
        return Err(Error::input(format!("labels must be 0 or 1, got {y}")));
    }
    Ok(())
}

/// Return of one position: `(exit - entry·(1+Θ)) / (entry·(1+Θ))`.
pub fn position_return(entry_price: f64, exit_price: f64, commission: f64) -> Result<f64> {
    check_prices(&[entry_price, exit_price])?;
    check_commission(commission)?;
    let cost = entry_price * (1.0 + commission);
    Ok((exit_price - cost) / cost)
}

/// Splits labels into positions, one per maximal run of ones.
pub fn extract_positions(prices: &[f64], labels: &[u8], commission: f64) -> Result<Vec<Position>> {
    if prices.len() != labels.len() {
        return Err(Error::input(format!(
            "{} prices but {} labels",
            prices.len(),
            labels.len()
        )));
    }
    check_prices(prices)?;
    let mut out = Vec::new();
    let mut entry: Option<usize> = None;
    for (t, &y) in labels.iter().enumerate() {
        check_label(y)?;
        match (entry, y) {
            (None, 1) => entry = Some(t),
            (Some(e), 0) => {
                out.push(Position {
                    entry: e,
                    exit: t,
                    entry_price: prices[e],
                    exit_price: prices[t],
                    ret: position_return(prices[e], prices[t], commission)?,
                    closed_at_end: false,
                });
                entry = None;
            }
            _ => {}
        }
    }
    if let Some(e) = entry {
        let t = prices.len() - 1;
        out.push(Position {
            entry: e,
            exit: t,
            entry_price: prices[e],
            exit_price: prices[t],
            ret: position_return(prices[e], prices[t], commission)?,
            closed_at_end: true,
        });
    }
    Ok(out)
}

/// `Π (1 + r_i) - 1` over the positions implied by `labels`.
pub fn cumulative_return(prices: &[f64], labels: &[u8], commission: f64) -> Result<f64> {
    let positions = extract_positions(prices, labels, commission)?;
    let mut growth = 1.0;
    for pos in &positions {
        assert!(pos.ret > -1.0, "position return {} at or below -100%", pos.ret);
        growth *= 1.0 + pos.ret;
    }
    Ok(growth - 1.0)
}

/// Forward pass of the oracle dynamic program.
pub fn dp_tables(prices: &[f64], commission: f64, terminal: u8) -> Result<DpTables> {
    let n = prices.len();
    if n < 2 {
        return Err(Error::input(format!("need at least 2 prices, got {n}")));
    }
    check_prices(prices)?;
    check_commission(commission)?;
    check_label(terminal)?;

    let entry_cost = -(1.0 + commission).ln();
    let transition: Vec<[[f64; 2]; 2]> = prices
        .windows(2)
        .map(|w| {
            let hold = (w[1] / w[0]).ln();
            [[0.0, entry_cost], [hold, hold]]
        })
        .collect();

    let mut s0 = vec![0.0; n];
    let mut s1 = vec![0.0; n];
    s0[0] = 0.0;
    s1[0] = entry_cost;
    for t in 1..n {
        let p = &transition[t - 1];
        s0[t] = (s0[t - 1] + p[0][0]).max(s1[t - 1] + p[1][0]);
        s1[t] = (s0[t - 1] + p[0][1]).max(s1[t - 1] + p[1][1]);
    }
    // the final column may only end in the requested terminal state
    if terminal == 0 {
        s1[n - 1] = f64::NEG_INFINITY;
    } else {
        s0[n - 1] = f64::NEG_INFINITY;
    }
    Ok(DpTables {
        state: [s0, s1],
        transition,
    })
}

/// Oracle labels maximizing [`cumulative_return`] among all series ending in
/// `terminal`. Exact ties in the backward pass resolve to the flat state.
pub fn oracle_labels(prices: &[f64], commission: f64, terminal: u8) -> Result<LabelSeries> {
    let tables = dp_tables(prices, commission, terminal)?;
    let n = prices.len();
    let mut labels = vec![0u8; n];
    labels[n - 1] = terminal;
    let mut next = terminal as usize;
    for t in (0..n - 1).rev() {
        let via0 = tables.state[0][t] + tables.transition[t][0][next];
        let via1 = tables.state[1][t] + tables.transition[t][1][next];
        let idx = if via1 > via0 { 1 } else { 0 };
        labels[t] = idx as u8;
        next = idx;
    }
    Ok(LabelSeries {
        labels,
        commission,
        terminal,
    })
}

/// Exhaustive search over all `2^(T-1)` label series ending in `terminal`.
/// Ties go to the fewest positions, then the lexicographically smallest series.
pub fn brute_force_labels(prices: &[f64], commission: f64, terminal: u8) -> Result<LabelSeries> {
    let n = prices.len();
    if n < 2 {
        return Err(Error::input(format!("need at least 2 prices, got {n}")));
    }
    if n > BRUTE_FORCE_MAX_LEN {
        return Err(Error::input(format!(
            "brute force limited to {BRUTE_FORCE_MAX_LEN} prices, got {n}"
        )));
    }
    check_commission(commission)?;
    check_label(terminal)?;

    let mut best: Option<(f64, usize, Vec<u8>)> = None;
    let mut labels = vec![0u8; n];
    labels[n - 1] = terminal;
    for mask in 0u32..(1u32 << (n - 1)) {
        // bit (n-2-t) of mask is label t, so increasing masks are lexicographic order
        for (t, label) in labels.iter_mut().enumerate().take(n - 1) {
            *label = ((mask >> (n - 2 - t)) & 1) as u8;
        }
        let value = cumulative_return(prices, &labels, commission)?;
        let count = extract_positions(prices, &labels, commission)?.len();
        let better = match &best {
            None => true,
            Some((v, c, _)) => value > *v || (value == *v && count < *c),
        };
        if better {
            best = Some((value, count, labels.clone()));
        }
    }
    let (_, _, labels) = best.expect("at least one candidate");
    Ok(LabelSeries {
        labels,
        commission,
        terminal,
    })
}
