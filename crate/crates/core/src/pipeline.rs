//! Run configuration and the end-to-end workflows behind the command line.
//!
//! Workflows return the files they produce as in-memory [`OutputFile`]s so
//! callers decide where (and whether) to write them. Every CSV starts with a
//! `# config_hash=... seed=...` line and every JSON output carries both fields.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::backtest::{run_days, BuyAndHold, GreedyPolicy};
use crate::env::{EnvConfig, PreparedDay, RewardMode, StepRecord};
use crate::error::{Error, Result};
use crate::evaluation::{
    agent_report, grid_search, make_windows, provenance_line, return_table_csv, reward_scatter, scatter_csv,
    trade_table_csv, AgentReport, CellResult, GridSpec, ReturnBase, RollingWindow, WindowSpec,
};
use crate::indicators::{fit_bounds, IndicatorConfig};
use crate::market_data::{generate_synthetic, parse_ohlcv, segment_days, SyntheticSpec, TradingDay, DEFAULT_MAX_MISSING_BARS};
use crate::oracle::{extract_positions, oracle_labels};
use crate::ppo::{history_csv, Checkpoint, PpoConfig};
use crate::seed::{derive_seed, short_hash};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Minute-bar CSV file.
    pub path: Option<PathBuf>,
    /// Generated data, used when no path is given.
    pub synthetic: Option<SyntheticSpec>,
    /// Days missing more session bars than this are dropped.
    pub max_missing_bars: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            path: None,
            synthetic: None,
            max_missing_bars: DEFAULT_MAX_MISSING_BARS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// φ applied to validation and test backtests, in bps.
    pub commission_bps: f64,
    pub return_base: ReturnBase,
    /// Window used by `train` and `evaluate`.
    pub window: usize,
    pub scatter_steps: usize,
    pub scatter_theta_bps: f64,
    pub scatter_phi_bps: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            commission_bps: 1.0,
            return_base: ReturnBase::DecisionOpen,
            window: 0,
            scatter_steps: 100_000,
            scatter_theta_bps: 3.0,
            scatter_phi_bps: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub indicators: IndicatorConfig,
    pub env: EnvConfig,
    pub ppo: PpoConfig,
    pub grid: GridSpec,
    pub window: WindowSpec,
    pub evaluation: EvaluationConfig,
    /// Where the command line writes outputs; not part of the config hash.
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            data: DataConfig::default(),
            indicators: IndicatorConfig::default(),
            env: EnvConfig::default(),
            ppo: PpoConfig::default(),
            grid: GridSpec::default(),
            window: WindowSpec::default(),
            evaluation: EvaluationConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub theta_bps: Option<f64>,
    pub phi_bps: Option<f64>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    /// Reads a TOML config; relative data paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let (Some(p), Some(dir)) = (cfg.data.path.as_mut(), path.parent()) {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// A single ϑ or φ on the command line pins both the grid and the env value.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(theta) = o.theta_bps {
            self.grid.theta_bps = vec![theta];
            self.env.expert_commission = crate::bps(theta);
            self.evaluation.scatter_theta_bps = theta;
        }
        if let Some(phi) = o.phi_bps {
            self.grid.phi_bps = vec![phi];
            self.env.trading_commission = crate::bps(phi);
            self.evaluation.scatter_phi_bps = phi;
        }
        if let Some(out) = &o.output_dir {
            self.output_dir = out.clone();
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.data.path, &self.data.synthetic) {
            (None, None) => return Err(Error::config("data needs either a path or a synthetic spec")),
            (Some(_), Some(_)) => return Err(Error::config("data path and synthetic spec are mutually exclusive")),
            (None, Some(s)) => s.validate()?,
            (Some(_), None) => {}
        }
        self.indicators.validate()?;
        self.env.validate()?;
        self.ppo.validate()?;
        self.grid.validate()?;
        self.window.validate()?;
        self.evaluation.return_base.validate()?;
        let e = &self.evaluation;
        for v in [e.commission_bps, e.scatter_theta_bps, e.scatter_phi_bps] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config("evaluation commissions must be non-negative"));
            }
        }
        Ok(())
    }

    /// Short hash of everything that can change an output.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        Ok(short_hash(&serde_json::to_vec(&c)?))
    }

    fn provenance(&self) -> Result<String> {
        Ok(provenance_line(&self.hash()?, self.seed))
    }

    fn evaluation_env(&self, base: &EnvConfig) -> EnvConfig {
        EnvConfig {
            trading_commission: crate::bps(self.evaluation.commission_bps),
            ..*base
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    /// Path relative to the output directory.
    pub name: String,
    pub contents: String,
}

impl OutputFile {
    fn new(name: impl Into<String>, contents: String) -> Self {
        Self {
            name: name.into(),
            contents,
        }
    }
}

/// Writes outputs under `dir`, creating subdirectories as needed.
pub fn write_outputs(dir: &Path, files: &[OutputFile]) -> Result<()> {
    for f in files {
        let path = dir.join(&f.name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, &f.contents)?;
    }
    Ok(())
}

/// Complete trading days from the configured source.
pub fn load_days(cfg: &RunConfig) -> Result<Vec<TradingDay>> {
    let days = match (&cfg.data.path, &cfg.data.synthetic) {
        (Some(path), _) => {
            let file = std::fs::File::open(path)
                .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
            let bars = parse_ohlcv(std::io::BufReader::new(file))?;
            segment_days(&bars, cfg.data.max_missing_bars)
        }
        (None, Some(spec)) => generate_synthetic(spec)?,
        (None, None) => return Err(Error::config("no data source configured")),
    };
    let complete: Vec<TradingDay> = days.into_iter().filter(|d| !d.incomplete).collect();
    if complete.is_empty() {
        return Err(Error::Data("no complete trading days in the input".into()));
    }
    Ok(complete)
}

fn prepare(days: &[TradingDay], env: &EnvConfig, ind: &IndicatorConfig) -> Result<Vec<PreparedDay>> {
    days.iter().map(|d| PreparedDay::new(d.clone(), env, ind)).collect()
}

/// Oracle labels over each day's decision span, one CSV per day, plus a
/// per-day position count summary.
pub fn label_workflow(cfg: &RunConfig) -> Result<Vec<OutputFile>> {
    cfg.validate()?;
    let days = load_days(cfg)?;
    let prov = cfg.provenance()?;
    let span = cfg.env.span()?;
    let theta = cfg.env.expert_commission;
    let mut files = Vec::new();
    let mut summary = format!("{prov}date,positions,cumulative_return\n");
    for day in &days {
        if day.bars.len() <= span.exit {
            return Err(Error::Day {
                date: day.date.to_string(),
                reason: "too short for the decision span".into(),
            });
        }
        let bars = &day.bars[span.first..=span.exit];
        let closes: Vec<f64> = bars.iter().map(|b| b.close).collect();
        let labels = oracle_labels(&closes, theta, cfg.env.terminal_label)?;
        let mut s = format!("{prov}timestamp,close,label\n");
        for (b, y) in bars.iter().zip(&labels.labels) {
            let _ = writeln!(s, "{},{},{}", b.timestamp.format(crate::market_data::TIMESTAMP_FORMAT), b.close, y);
        }
        files.push(OutputFile::new(format!("labels/{}.csv", day.date), s));
        let positions = extract_positions(&closes, &labels.labels, theta)?;
        let cum = crate::oracle::cumulative_return(&closes, &labels.labels, theta)?;
        let _ = writeln!(summary, "{},{},{}", day.date, positions.len(), cum);
    }
    files.push(OutputFile::new("label_summary.csv", summary));
    Ok(files)
}

fn selected_window(cfg: &RunConfig, days: &[TradingDay]) -> Result<(usize, RollingWindow)> {
    let dates: Vec<NaiveDate> = days.iter().map(|d| d.date).collect();
    let windows = make_windows(&dates, cfg.window)?;
    let idx = cfg.evaluation.window;
    let w = windows
        .get(idx)
        .cloned()
        .ok_or_else(|| Error::config(format!("window {idx} requested, data yields {}", windows.len())))?;
    Ok((idx, w))
}

struct TrainedAgent {
    checkpoint: Checkpoint,
    history: String,
    cells: Vec<CellResult>,
}

fn train_window(
    cfg: &RunConfig,
    days: &[TradingDay],
    window: &RollingWindow,
    index: usize,
    mode: RewardMode,
) -> Result<TrainedAgent> {
    let env = EnvConfig { reward_mode: mode, ..cfg.env };
    let train_days = &days[window.train.clone()];
    let indicators = fit_bounds(&cfg.indicators, train_days, env.span()?)?;
    let ppo = PpoConfig {
        validation_commission: crate::bps(cfg.evaluation.commission_bps),
        ..cfg.ppo
    };
    let seed = derive_seed(cfg.seed, &["window", &index.to_string(), &mode.to_string()]);
    let out = grid_search(
        train_days,
        &days[window.validation.clone()],
        &env,
        &indicators,
        &ppo,
        &cfg.grid,
        seed,
    )?;
    let mut checkpoint = out.outcome.checkpoint;
    checkpoint.seed = cfg.seed;
    checkpoint.config_hash = cfg.hash()?;
    Ok(TrainedAgent {
        checkpoint,
        history: history_csv(&out.outcome.history),
        cells: out.cells,
    })
}

fn grid_csv(rows: &[(usize, RewardMode, CellResult)], prov: &str) -> String {
    let mut s = format!("{prov}window,agent,theta_bps,phi_bps,validation_return,error\n");
    for (w, mode, c) in rows {
        let v = c.validation_return.map(|v| v.to_string()).unwrap_or_default();
        let err = c.error.as_deref().unwrap_or("").replace([',', '\n'], " ");
        let _ = writeln!(s, "{w},{mode},{},{},{v},{err}", c.cell.theta_bps, c.cell.phi_bps);
    }
    s
}

/// Trains one agent (grid search included) on the configured window.
pub fn train_workflow(cfg: &RunConfig) -> Result<(Checkpoint, Vec<OutputFile>)> {
    cfg.validate()?;
    let days = load_days(cfg)?;
    let (idx, window) = selected_window(cfg, &days)?;
    let prov = cfg.provenance()?;
    let agent = train_window(cfg, &days, &window, idx, cfg.env.reward_mode)?;
    let rows: Vec<_> = agent.cells.iter().map(|c| (idx, cfg.env.reward_mode, c.clone())).collect();
    let files = vec![
        OutputFile::new("checkpoint.json", agent.checkpoint.to_json()?),
        OutputFile::new("history.csv", format!("{prov}{}", agent.history)),
        OutputFile::new("grid.csv", grid_csv(&rows, &prov)),
    ];
    Ok((agent.checkpoint, files))
}

fn steps_csv(log: &[StepRecord], prov: &str) -> String {
    let mut s = format!("{prov}timestamp,action,label,r_rf,r_if,r_rif,position,forced\n");
    for r in log {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.timestamp.format(crate::market_data::TIMESTAMP_FORMAT),
            r.action,
            r.label,
            r.r_rf,
            r.r_if,
            r.r_rif,
            r.position,
            r.forced
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DateRange {
    pub first: NaiveDate,
    pub last: NaiveDate,
    pub days: usize,
}

fn date_range(days: &[TradingDay]) -> Option<DateRange> {
    Some(DateRange {
        first: days.first()?.date,
        last: days.last()?.date,
        days: days.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub agent: String,
    pub theta_bps: f64,
    pub phi_bps: f64,
    pub validation_return: Option<f64>,
    pub iteration: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub index: usize,
    pub train: Option<DateRange>,
    pub validation: Option<DateRange>,
    pub test: Option<DateRange>,
    pub selections: Vec<Selection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    pub seed: u64,
    pub evaluation_commission_bps: f64,
    pub windows: Vec<WindowSummary>,
    pub agents: Vec<AgentReport>,
}

fn window_summary(days: &[TradingDay], index: usize, w: &RollingWindow, selections: Vec<Selection>) -> WindowSummary {
    WindowSummary {
        index,
        train: date_range(&days[w.train.clone()]),
        validation: date_range(&days[w.validation.clone()]),
        test: date_range(&days[w.test.clone()]),
        selections,
    }
}

fn selection(agent: &str, ck: &Checkpoint) -> Selection {
    Selection {
        agent: agent.to_string(),
        theta_bps: ck.env.expert_commission / crate::BPS,
        phi_bps: ck.env.trading_commission / crate::BPS,
        validation_return: ck.validation_return,
        iteration: ck.iteration,
    }
}

/// Greedy test-period log of a checkpoint, backtested at the evaluation commission.
pub fn backtest_checkpoint(cfg: &RunConfig, ck: &Checkpoint, test_days: &[TradingDay]) -> Result<Vec<StepRecord>> {
    let env = cfg.evaluation_env(&ck.env);
    let prepared = prepare(test_days, &env, &ck.indicators)?;
    run_days(&prepared, &env, &ck.indicators, &mut GreedyPolicy(&ck.params))
}

fn buy_and_hold(cfg: &RunConfig, test_days: &[TradingDay]) -> Result<Vec<StepRecord>> {
    let env = cfg.evaluation_env(&cfg.env);
    let prepared = prepare(test_days, &env, &cfg.indicators)?;
    run_days(&prepared, &env, &cfg.indicators, &mut BuyAndHold)
}

fn report_files(cfg: &RunConfig, rows: &[AgentReport], windows: Vec<WindowSummary>) -> Result<Vec<OutputFile>> {
    let prov = cfg.provenance()?;
    let summary = Summary {
        config_hash: cfg.hash()?,
        seed: cfg.seed,
        evaluation_commission_bps: cfg.evaluation.commission_bps,
        windows,
        agents: rows.to_vec(),
    };
    Ok(vec![
        OutputFile::new("trades.csv", trade_table_csv(rows, &prov)),
        OutputFile::new("returns.csv", return_table_csv(rows, &prov)),
        OutputFile::new("summary.json", serde_json::to_string_pretty(&summary)? + "\n"),
    ])
}

/// Backtests a checkpoint on the test range of the configured window,
/// next to buy-and-hold.
pub fn evaluate_workflow(cfg: &RunConfig, ck: &Checkpoint) -> Result<Vec<OutputFile>> {
    cfg.validate()?;
    let days = load_days(cfg)?;
    let (idx, window) = selected_window(cfg, &days)?;
    let test = &days[window.test.clone()];
    let base = cfg.evaluation.return_base;
    let name = ck.env.reward_mode.to_string();
    let log = backtest_checkpoint(cfg, ck, test)?;
    let rows = vec![
        agent_report(&name, &log, base)?,
        agent_report("B&H", &buy_and_hold(cfg, test)?, base)?,
    ];
    let mut files = report_files(cfg, &rows, vec![window_summary(&days, idx, &window, vec![selection(&name, ck)])])?;
    files.push(OutputFile::new("steps.csv", steps_csv(&log, &cfg.provenance()?)));
    Ok(files)
}

/// RF/RIF reward pairs of a random policy.
pub fn scatter_workflow(cfg: &RunConfig) -> Result<Vec<OutputFile>> {
    cfg.validate()?;
    let days = load_days(cfg)?;
    let env = EnvConfig {
        expert_commission: crate::bps(cfg.evaluation.scatter_theta_bps),
        trading_commission: crate::bps(cfg.evaluation.scatter_phi_bps),
        ..cfg.env
    };
    let prepared = prepare(&days, &env, &cfg.indicators)?;
    let points = reward_scatter(
        &prepared,
        &env,
        &cfg.indicators,
        cfg.evaluation.scatter_steps,
        derive_seed(cfg.seed, &["scatter"]),
    )?;
    Ok(vec![OutputFile::new("scatter.csv", scatter_csv(&points, &cfg.provenance()?))])
}

/// Full walk-forward study: RIF and RF agents per window, test logs
/// concatenated across windows, buy-and-hold alongside.
pub fn report_workflow(cfg: &RunConfig) -> Result<Vec<OutputFile>> {
    cfg.validate()?;
    let days = load_days(cfg)?;
    let dates: Vec<NaiveDate> = days.iter().map(|d| d.date).collect();
    let windows = make_windows(&dates, cfg.window)?;
    let modes = [RewardMode::Rif, RewardMode::Rf];
    let mut logs: Vec<Vec<StepRecord>> = vec![Vec::new(); modes.len()];
    let mut bh = Vec::new();
    let mut summaries = Vec::new();
    let mut grid_rows = Vec::new();
    for (i, w) in windows.iter().enumerate() {
        let test = &days[w.test.clone()];
        let mut selections = Vec::new();
        for (m, mode) in modes.iter().enumerate() {
            let agent = train_window(cfg, &days, w, i, *mode)?;
            logs[m].extend(backtest_checkpoint(cfg, &agent.checkpoint, test)?);
            selections.push(selection(&mode.to_string(), &agent.checkpoint));
            grid_rows.extend(agent.cells.into_iter().map(|c| (i, *mode, c)));
        }
        bh.extend(buy_and_hold(cfg, test)?);
        summaries.push(window_summary(&days, i, w, selections));
    }
    let base = cfg.evaluation.return_base;
    let mut rows = Vec::new();
    for (mode, log) in modes.iter().zip(&logs) {
        rows.push(agent_report(&mode.to_string(), log, base)?);
    }
    rows.push(agent_report("B&H", &bh, base)?);
    let mut files = report_files(cfg, &rows, summaries)?;
    files.push(OutputFile::new("grid.csv", grid_csv(&grid_rows, &cfg.provenance()?)));
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::SyntheticKind;

    #[test]
    fn default_config_round_trips_through_toml() {
        let mut cfg = RunConfig::default();
        cfg.data.synthetic = Some(SyntheticSpec::new(SyntheticKind::RandomWalk, 3, 1e-3, 0.0, 1));
        let text = cfg.to_toml_string().unwrap();
        let back = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash().unwrap(), cfg.hash().unwrap());
        back.validate().unwrap();
    }

    #[test]
    fn hash_ignores_output_dir_but_not_seed() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.output_dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        b.seed = 9;
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
    }

    #[test]
    fn overrides_pin_grid() {
        let mut cfg = RunConfig::default();
        cfg.apply(&Overrides {
            seed: Some(4),
            theta_bps: Some(2.0),
            phi_bps: None,
            output_dir: None,
        });
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.grid.theta_bps, vec![2.0]);
        assert_eq!(cfg.grid.phi_bps.len(), 8);
        assert!((cfg.env.expert_commission - 2e-4).abs() < 1e-18);
    }

    #[test]
    fn unknown_keys_and_missing_data_are_config_errors() {
        assert!(matches!(RunConfig::from_toml_str("bogus = 1"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::default().validate(), Err(Error::Config(_))));
    }

    #[test]
    fn missing_file_is_a_data_error() {
        let mut cfg = RunConfig::default();
        cfg.data.path = Some(PathBuf::from("/nonexistent/bars.csv"));
        assert!(matches!(load_days(&cfg), Err(Error::Data(_))));
    }
}
