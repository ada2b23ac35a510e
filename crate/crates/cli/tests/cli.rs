use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rif_core::neural::{NetParams, LAYOUT};
use rif_core::ppo::Checkpoint;

const SMALL_CONFIG: &str = r#"
seed = 5

[data.synthetic]
kind = "sinusoid"
period_minutes = 60.0
amplitude = 0.002
days = 10
volatility = 0.0001
drift = 0.000001
seed = 3

[window]
kind = "days"
train = 6
validation = 2
test = 2

[grid]
theta_bps = [1.0]
phi_bps = [1.0]

[ppo]
max_iterations = 2
buffer_size = 256
epochs = 2

[evaluation]
scatter_steps = 1000
"#;

fn rif(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rif")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn run_ok(args: &[&str]) {
    let out = rif(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn total_positions(summary: &str) -> usize {
    summary
        .lines()
        .skip(2)
        .map(|l| l.split(',').nth(1).unwrap().parse::<usize>().unwrap())
        .sum()
}

#[test]
fn label_is_reproducible_and_sweeps_theta() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_CONFIG);
    let cfg = cfg.to_str().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let wide = tmp.path().join("wide");
    run_ok(&["label", "--config", cfg, "--theta-bps", "1", "--out", a.to_str().unwrap()]);
    run_ok(&["label", "--config", cfg, "--theta-bps", "1", "--out", b.to_str().unwrap()]);
    run_ok(&["label", "--config", cfg, "--theta-bps", "30", "--out", wide.to_str().unwrap()]);

    let summary = read(&a, "label_summary.csv");
    assert_eq!(summary, read(&b, "label_summary.csv"));
    assert!(summary.starts_with("# config_hash="));
    let day_files: Vec<_> = fs::read_dir(a.join("labels")).unwrap().collect();
    assert_eq!(day_files.len(), 10);
    for f in day_files {
        let name = f.unwrap().file_name();
        let name = name.to_str().unwrap();
        assert_eq!(read(&a.join("labels"), name), read(&b.join("labels"), name));
    }
    let narrow = total_positions(&summary);
    let wider = total_positions(&read(&wide, "label_summary.csv"));
    assert!(narrow > wider, "{narrow} positions at 1 bp vs {wider} at 30 bps");
}

#[test]
fn empty_and_missing_inputs_are_data_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("empty.csv");
    fs::write(&csv, "timestamp,open,high,low,close,volume\n").unwrap();
    let cfg = write_config(tmp.path(), &format!("[data]\npath = {:?}\n", csv.to_str().unwrap()));
    let out = rif(&["label", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    let cfg = write_config(tmp.path(), "[data]\npath = \"does-not-exist.csv\"\n");
    let out = rif(&["train", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_configs_exit_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "no_such_key = 1\n");
    let out = rif(&["scatter", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = rif(&["scatter", "--config", tmp.path().join("absent.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let cfg = write_config(tmp.path(), SMALL_CONFIG);
    let out = rif(&["scatter", "--config", cfg.to_str().unwrap(), "--jobs", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

fn flat_checkpoint(mut ck: Checkpoint) -> Checkpoint {
    let mut params = NetParams::zeros();
    let (_, offset, _, _) = LAYOUT.iter().find(|b| b.0 == "policy_bias").copied().unwrap();
    params.as_mut_slice()[offset] = 5.0;
    params.as_mut_slice()[offset + 1] = -5.0;
    ck.params = params;
    ck
}

#[test]
fn train_evaluate_and_scatter() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_CONFIG);
    let cfg = cfg.to_str().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run_ok(&["train", "--config", cfg, "--jobs", "1", "--out", a.to_str().unwrap()]);
    run_ok(&["train", "--config", cfg, "--jobs", "2", "--out", b.to_str().unwrap()]);
    assert_eq!(read(&a, "checkpoint.json"), read(&b, "checkpoint.json"));
    assert_eq!(read(&a, "history.csv"), read(&b, "history.csv"));

    let ck_path = a.join("checkpoint.json");
    let eval = tmp.path().join("eval");
    run_ok(&["evaluate", "--config", cfg, "--checkpoint", ck_path.to_str().unwrap(), "--out", eval.to_str().unwrap()]);
    let trades = read(&eval, "trades.csv");
    let mut lines = trades.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert_eq!(
        lines.next().unwrap(),
        "agent,num_trades,winrate_pct,mean_positive_return_pct,mean_negative_return_pct,avg_holding_minutes,no_positive,no_negative"
    );
    assert!(lines.next().unwrap().starts_with("RIF,"));
    let bh: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(bh[0], "B&H");
    assert_eq!(bh[1], "2");
    assert_eq!(bh[5], "386");
    let returns = read(&eval, "returns.csv");
    assert_eq!(
        returns.lines().nth(1).unwrap(),
        "agent,days,mean_return_pct,volatility_pct,max_drawdown_pct,sharpe,cumulative_return_pct"
    );
    let summary: serde_json::Value = serde_json::from_str(&read(&eval, "summary.json")).unwrap();
    assert_eq!(summary["seed"], 5);

    let flat = flat_checkpoint(Checkpoint::load(&ck_path).unwrap());
    let flat_path = tmp.path().join("flat.json");
    flat.save(&flat_path).unwrap();
    let flat_out = tmp.path().join("flat");
    run_ok(&["evaluate", "--config", cfg, "--checkpoint", flat_path.to_str().unwrap(), "--out", flat_out.to_str().unwrap()]);
    let row = read(&flat_out, "trades.csv").lines().nth(2).unwrap().to_string();
    assert!(row.starts_with("RIF,0,"), "{row}");

    let sc = tmp.path().join("scatter");
    run_ok(&["scatter", "--config", cfg, "--out", sc.to_str().unwrap()]);
    let csv = read(&sc, "scatter.csv");
    assert_eq!(csv.lines().nth(1).unwrap(), "r_rf,r_rif,y,a");
    assert_eq!(csv.lines().count(), 1002);
}

#[test]
fn report_has_three_comparable_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_CONFIG);
    let out = tmp.path().join("report");
    run_ok(&["report", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let agents: Vec<String> = read(&out, "returns.csv")
        .lines()
        .skip(2)
        .map(|l| l.split(',').next().unwrap().to_string())
        .collect();
    assert_eq!(agents, ["RIF", "RF", "B&H"]);
    assert!(read(&out, "grid.csv").lines().count() >= 4);
}
