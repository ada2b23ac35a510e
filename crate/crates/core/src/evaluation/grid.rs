//! Grid search over the expert commission ϑ and the trading commission φ.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, PreparedDay};
use crate::error::{Error, Result};
use crate::indicators::IndicatorConfig;
use crate::market_data::TradingDay;
use crate::ppo::{train, PpoConfig, TrainOutcome};
use crate::seed::derive_seed;

pub const DEFAULT_GRID_BPS: [f64; 8] = [0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 10.0, 20.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub theta_bps: Vec<f64>,
    pub phi_bps: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            theta_bps: DEFAULT_GRID_BPS.to_vec(),
            phi_bps: DEFAULT_GRID_BPS.to_vec(),
        }
    }
}

impl GridSpec {
    pub fn single(theta_bps: f64, phi_bps: f64) -> Self {
        Self {
            theta_bps: vec![theta_bps],
            phi_bps: vec![phi_bps],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta_bps.is_empty() || self.phi_bps.is_empty() {
            return Err(Error::config("grid needs at least one value per commission"));
        }
        if self.theta_bps.iter().chain(&self.phi_bps).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::config("grid commissions must be finite and non-negative"));
        }
        Ok(())
    }

    /// Cells in ϑ-major order.
    pub fn cells(&self) -> Vec<GridCell> {
        self.theta_bps
            .iter()
            .flat_map(|&theta_bps| self.phi_bps.iter().map(move |&phi_bps| GridCell { theta_bps, phi_bps }))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub theta_bps: f64,
    pub phi_bps: f64,
}

impl GridCell {
    pub fn env(&self, base: &EnvConfig) -> EnvConfig {
        EnvConfig {
            expert_commission: crate::bps(self.theta_bps),
            trading_commission: crate::bps(self.phi_bps),
            ..*base
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: GridCell,
    /// Best validation cumulative return; `None` when training failed.
    pub validation_return: Option<f64>,
    pub error: Option<String>,
}

/// Index of the best cell: highest validation return, ties to smaller φ then smaller ϑ.
pub fn select_best(results: &[CellResult]) -> Result<usize> {
    results
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.validation_return.filter(|v| v.is_finite()).map(|v| (i, v, r.cell)))
        .reduce(|best, cand| {
            let better = cand.1 > best.1
                || (cand.1 == best.1
                    && (cand.2.phi_bps, cand.2.theta_bps) < (best.2.phi_bps, best.2.theta_bps));
            if better {
                cand
            } else {
                best
            }
        })
        .map(|(i, _, _)| i)
        .ok_or_else(|| Error::Runtime("every grid cell failed to train".into()))
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub cells: Vec<CellResult>,
    pub best: usize,
    pub outcome: TrainOutcome,
}

/// Seed for one grid cell, stable under reordering of the grid.
pub fn cell_seed(seed: u64, cell: GridCell) -> u64 {
    derive_seed(
        seed,
        &["grid", &cell.theta_bps.to_string(), &cell.phi_bps.to_string()],
    )
}

/// Trains one agent per cell (in parallel on the current rayon pool) and keeps
/// the one with the best validation return.
pub fn grid_search(
    train_days: &[TradingDay],
    validation_days: &[TradingDay],
    env: &EnvConfig,
    indicators: &IndicatorConfig,
    ppo: &PpoConfig,
    grid: &GridSpec,
    seed: u64,
) -> Result<GridOutcome> {
    grid.validate()?;
    let cells = grid.cells();
    let runs: Vec<(CellResult, Option<TrainOutcome>)> = cells
        .par_iter()
        .map(|&cell| {
            let cfg = cell.env(env);
            let run = || -> Result<TrainOutcome> {
                let prep = |days: &[TradingDay]| {
                    days.iter()
                        .map(|d| PreparedDay::new(d.clone(), &cfg, indicators))
                        .collect::<Result<Vec<_>>>()
                };
                let tr = prep(train_days)?;
                let va = prep(validation_days)?;
                train(&tr, &va, &cfg, indicators, ppo, cell_seed(seed, cell))
            };
            match run() {
                Ok(out) => (
                    CellResult {
                        cell,
                        validation_return: out.checkpoint.validation_return,
                        error: None,
                    },
                    Some(out),
                ),
                Err(e) => (
                    CellResult {
                        cell,
                        validation_return: None,
                        error: Some(e.to_string()),
                    },
                    None,
                ),
            }
        })
        .collect();
    let results: Vec<CellResult> = runs.iter().map(|(r, _)| r.clone()).collect();
    let best = select_best(&results)?;
    let outcome = runs.into_iter().nth(best).and_then(|(_, out)| out).expect("best cell trained");
    Ok(GridOutcome {
        cells: results,
        best,
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn res(theta: f64, phi: f64, v: Option<f64>) -> CellResult {
        CellResult {
            cell: GridCell { theta_bps: theta, phi_bps: phi },
            validation_return: v,
            error: None,
        }
    }

    #[test]
    fn single_cell() {
        assert_eq!(select_best(&[res(3.0, 3.0, Some(-0.1))]).unwrap(), 0);
    }

    #[test]
    fn ties_prefer_smaller_phi_then_theta() {
        let r = [
            res(1.0, 5.0, Some(0.02)),
            res(5.0, 2.0, Some(0.02)),
            res(2.0, 2.0, Some(0.02)),
            res(0.5, 1.0, Some(0.01)),
        ];
        assert_eq!(select_best(&r).unwrap(), 2);
    }

    #[test]
    fn failures_are_skipped_and_all_failed_is_an_error() {
        let r = [res(1.0, 1.0, None), res(2.0, 2.0, Some(-0.5))];
        assert_eq!(select_best(&r).unwrap(), 1);
        assert!(select_best(&[res(1.0, 1.0, None)]).is_err());
    }

    #[test]
    fn default_grid_has_64_cells() {
        let cells = GridSpec::default().cells();
        assert_eq!(cells.len(), 64);
        assert_ne!(cell_seed(1, cells[0]), cell_seed(1, cells[1]));
    }
}
