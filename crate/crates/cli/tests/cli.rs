//! End-to-end checks of the command-line interface: output files, exit
//! codes, and byte-level determinism.

use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_upn-market"))
}

fn live_params_file(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("params.json");
    fs::write(
        &path,
        r#"{ "noise_psd": 5e-17, "bandwidth_per_link": 2e7 }"#,
    )
    .unwrap();
    path
}

#[test]
fn gen_scenario_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let params = live_params_file(dir.path());
    for name in ["a.json", "b.json"] {
        let status = bin()
            .args([
                "gen-scenario",
                "--seed",
                "7",
                "--buyers",
                "6",
                "--sellers",
                "3",
                "--params",
            ])
            .arg(&params)
            .arg("--out")
            .arg(dir.path().join(name))
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = fs::read(dir.path().join("a.json")).unwrap();
    let b = fs::read(dir.path().join("b.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn run_writes_the_three_outputs_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let params = live_params_file(dir.path());
    let scenario = dir.path().join("scenario.json");
    assert!(bin()
        .args(["gen-scenario", "--seed", "3", "--buyers", "8", "--sellers", "4", "--params"])
        .arg(&params)
        .arg("--out")
        .arg(&scenario)
        .status()
        .unwrap()
        .success());

    for out in ["run1", "run2"] {
        let status = bin()
            .args(["run", "--scenario"])
            .arg(&scenario)
            .arg("--out")
            .arg(dir.path().join(out))
            .status()
            .unwrap();
        assert!(status.success());
    }
    for file in ["matching.json", "prices.csv", "metrics.json", "trading_matrix.csv"] {
        let a = fs::read(dir.path().join("run1").join(file)).unwrap();
        let b = fs::read(dir.path().join("run2").join(file)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{file} differs between identical runs");
    }

    // the matching parses back as a buyer -> seller map
    let matching: std::collections::BTreeMap<String, u32> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run1/matching.json")).unwrap())
            .unwrap();
    assert_eq!(matching.len(), 8);
}

#[test]
fn verify_stability_confirms_small_instances() {
    let dir = tempfile::tempdir().unwrap();
    let params = live_params_file(dir.path());
    let scenario = dir.path().join("small.json");
    assert!(bin()
        .args(["gen-scenario", "--seed", "5", "--buyers", "3", "--sellers", "2", "--params"])
        .arg(&params)
        .arg("--out")
        .arg(&scenario)
        .status()
        .unwrap()
        .success());

    let output = bin()
        .args(["verify-stability", "--scenario"])
        .arg(&scenario)
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("STABLE, oracle-confirmed"), "{stdout}");
}

#[test]
fn experiment_csv_parses_back_with_sane_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig4.csv");
    let status = bin()
        .args(["experiment", "fig4", "--runs", "2", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    let text = fs::read_to_string(&out).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().unwrap().clone();
    assert_eq!(&headers[0], "variable");
    assert!(headers.iter().any(|h| h == "mean_n_buyers_at_bs"));
    let mut rows = 0;
    for record in reader.records() {
        let record = record.unwrap();
        let row: std::collections::HashMap<&str, &str> =
            headers.iter().zip(record.iter()).collect();
        let at_bs: f64 = row["mean_n_buyers_at_bs"].parse().unwrap();
        assert!((0.0..=20.0).contains(&at_bs));
        let ok: usize = row["runs_ok"].parse().unwrap();
        let failed: usize = row["runs_failed"].parse().unwrap();
        assert_eq!(ok + failed, 2);
        rows += 1;
    }
    // 5 levels x 3 methods
    assert_eq!(rows, 15);
}

#[test]
fn price_trace_writes_seller_traces() {
    let dir = tempfile::tempdir().unwrap();
    let params = live_params_file(dir.path());
    let scenario = dir.path().join("scenario.json");
    assert!(bin()
        .args(["gen-scenario", "--seed", "1", "--buyers", "20", "--sellers", "10", "--params"])
        .arg(&params)
        .arg("--out")
        .arg(&scenario)
        .status()
        .unwrap()
        .success());
    let out = dir.path().join("traces");
    assert!(bin()
        .args(["price-trace", "--scenario"])
        .arg(&scenario)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let traces: Vec<_> = fs::read_dir(&out).unwrap().collect();
    assert!(!traces.is_empty(), "no trace files written");
    let first = fs::read_to_string(traces[0].as_ref().unwrap().path()).unwrap();
    assert!(first.starts_with("iteration,price,demand,supply"));
}

#[test]
fn unreadable_scenario_exits_one() {
    let status = bin()
        .args(["run", "--scenario", "/nonexistent/path.json", "--out", "/tmp/nowhere"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn invalid_scenario_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("bad.json");
    // negative transmit power must be rejected by name
    let text = r#"{
        "area_side": 1000.0,
        "base_station": {"position": {"x": 500.0, "y": 500.0}, "frame_duration": 1000.0, "served_durations": []},
        "buyers": [{"id": 1, "position": {"x": 10.0, "y": 10.0}, "tx_power": -0.5,
                    "initial_cap": 10.0, "exceed_prob": 0.5, "min_sinr": 1.0,
                    "min_duration": 0.0, "requested_duration": 60.0,
                    "utility": {"theta": 1.0, "alpha": 0.5}}],
        "sellers": [],
        "radio": {"noise_psd": 1e-7, "path_loss_exponent": 3.0, "bandwidth_per_link": 5e6, "log_base": 2},
        "market": {"overage_price_p": 1.0, "reward_r": 0.1, "energy_cost_xi": 0.02,
                   "operator_share_v": 0.2, "penalty_kappa": 0.5, "penalty_rho": 0.5,
                   "penalty_kappa_bs": 0.5, "penalty_kappa_upn": 0.5},
        "algo": {"max_swap_rounds": 10, "price_epsilon": 1e-4, "initial_price": 0.5, "rng_seed": 1}
    }"#;
    fs::write(&scenario, text).unwrap();
    let output = bin()
        .args(["run", "--scenario"])
        .arg(&scenario)
        .args(["--out", "/tmp/nowhere2"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("tx_power"), "{stderr}");
}
