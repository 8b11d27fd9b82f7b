use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use goalpred_cli::config::Config;
use goalpred_cli::log::{read_records, LogRecord};
use proptest::prelude::*;
use serde_json::Value;

fn goalpred(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_goalpred"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok_json(out: Output) -> Value {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn small_config(dir: &Path) {
    fs::write(
        dir.join("small.toml"),
        "[train]\nhidden = [16, 8]\n[train.follow]\nepochs = 3\n[train.change]\nepochs = 3\n",
    )
    .unwrap();
}

fn load_log(path: &Path) -> Vec<LogRecord> {
    read_records(std::io::BufReader::new(fs::File::open(path).unwrap())).unwrap()
}

#[test]
fn synth_train_predict_eval_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_config(dir);

    let synth = ok_json(goalpred(&["synth", "--out", "data", "--seed", "7"], dir));
    assert_eq!(synth["tracks"].as_array().unwrap().len(), 5);

    let train = ok_json(goalpred(
        &[
            "--config",
            "small.toml",
            "train",
            "--map",
            "data/map.json",
            "--tracks",
            "data/stop_and_go.csv",
            "data/change_left_traffic.csv",
            "data/entry_merge.csv",
            "--split",
            "all",
            "--out",
            "models",
        ],
        dir,
    ));
    assert!(train["examples"].as_u64().unwrap() > 0);
    assert!(dir.join("models/follow-f0.json").exists());
    assert!(dir.join("models/baselines.json").exists());

    for scenario in ["change_left_traffic", "entry_merge"] {
        let tracks = format!("data/{scenario}.csv");
        let log = format!("{scenario}.jsonl");
        let predict = ok_json(goalpred(
            &[
                "--config", "small.toml", "predict", "--map", "data/map.json", "--tracks", &tracks, "--models", "models", "--out", &log,
            ],
            dir,
        ));
        assert!(predict["records"].as_u64().unwrap() > 0);
        let records = load_log(&dir.join(&log));
        for r in &records {
            let sum: f64 = r.entries.iter().map(|e| e.probability).sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(r.entries.iter().all(|e| e.trajectory.len() == 50));
        }

        let eval = ok_json(goalpred(
            &[
                "eval", "--log", &log, "--tracks", &tracks, "--map", "data/map.json", "--models", "models", "--split", "all",
                "--out", "report.json",
            ],
            dir,
        ));
        let rows = eval["report"]["rows"].as_array().unwrap();
        assert_eq!(rows.len(), 9);
        assert_eq!(eval["summary"]["missing_predictions"], 0);
        let all = rows.iter().find(|r| r["model"] == "goalpred" && r["stratum"] == "all").unwrap();
        assert!(all["count"].as_u64().unwrap() > 0);
        assert!(all["rmse"][4].as_f64().unwrap().is_finite());
    }
}

#[test]
fn prediction_log_is_deterministic_apart_from_timing() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("cv.toml"), "[predict]\nmotion = \"constant_velocity\"\n").unwrap();
    ok_json(goalpred(&["synth", "--out", "data"], dir));
    let mut logs = Vec::new();
    for name in ["a.jsonl", "b.jsonl"] {
        ok_json(goalpred(
            &[
                "--config", "cv.toml", "predict", "--map", "data/map.json", "--tracks", "data/change_left_traffic.csv", "--out", name,
                "--timing",
            ],
            dir,
        ));
        let mut records = load_log(&dir.join(name));
        assert!(records.iter().all(|r| r.timing.is_some()));
        records.iter_mut().for_each(|r| r.timing = None);
        logs.push(records);
    }
    assert_eq!(logs[0], logs[1]);
    let order: Vec<(u64, u64)> = logs[0].iter().map(|r| (r.agent, r.frame)).collect();
    let mut sorted = order.clone();
    sorted.sort();
    assert_eq!(order, sorted);
}

#[test]
fn scenario_file_drives_synth() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(
        dir.join("scenes.toml"),
        r#"
[[scenario]]
name = "slow"
duration = 6.0
[scenario.motion]
kind = "constant_velocity"
lane = "lane_3a"
start = 50.0
speed = 5.0
"#,
    )
    .unwrap();
    let out = ok_json(goalpred(&["synth", "--scenarios", "scenes.toml", "--out", "data"], dir));
    assert_eq!(out["tracks"][0]["rows"], 60);
    let text = fs::read_to_string(dir.join("data/slow.csv")).unwrap();
    assert!(text.lines().nth(1).unwrap().contains("lane_3a"));
}

#[test]
fn failures_are_reported_as_json() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cases: [(&[&str], &str); 3] = [
        (&["predict", "--map", "missing.json", "--tracks", "t.csv", "--out", "x"], "io"),
        (&["frobnicate"], "usage"),
        (&["--config", "nope.toml", "synth", "--out", "d"], "config"),
    ];
    for (args, kind) in cases {
        let out = goalpred(args, dir);
        assert!(!out.status.success());
        let v: Value = serde_json::from_slice(&out.stdout).expect("error is JSON");
        assert_eq!(v["error"]["kind"], kind, "{args:?}");
        assert!(!v["error"]["message"].as_str().unwrap().is_empty());
    }
    fs::write(dir.join("bad.toml"), "[bayes]\ngamma = 2.0\n").unwrap();
    let v: Value = serde_json::from_slice(&goalpred(&["--config", "bad.toml", "synth", "--out", "d"], dir).stdout).unwrap();
    assert!(v["error"]["message"].as_str().unwrap().contains("bayes"));
}

#[test]
fn experts_without_models_dir_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok_json(goalpred(&["synth", "--out", "data"], dir));
    let out = goalpred(&["predict", "--map", "data/map.json", "--tracks", "data/entry_merge.csv", "--out", "x.jsonl"], dir);
    assert!(!out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["error"]["message"].as_str().unwrap().contains("--models"));
}

proptest! {
    #[test]
    fn config_round_trips_through_toml(
        gamma in 0.0f64..=1.0,
        lambda in 0.0f64..5.0,
        lookahead in 1.0f64..30.0,
        radius in 10.0f64..120.0,
        max_front in 1usize..=3,
        epochs in 1usize..50,
        seed in any::<u32>(),
    ) {
        let mut c = Config::default();
        c.bayes.gamma = gamma;
        c.bayes.lambda = lambda;
        c.pursuit.lookahead = lookahead;
        c.neighbours.radius = radius;
        c.neighbours.max_front = max_front;
        c.train.change.epochs = epochs;
        c.train.follow.seed = seed as u64;
        c.validate().unwrap();
        prop_assert_eq!(Config::parse(&c.to_toml()).unwrap(), c);
    }
}
