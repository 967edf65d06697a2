use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn stsgd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stsgd"))
        .args(args)
        .env_remove("STSGD_OUT_DIR")
        .output()
        .expect("failed to run stsgd")
}

fn synth(dir: &Path) {
    let out = stsgd(&[
        "synth", "--dim", "80", "--n-train", "60", "--n-val", "30", "--support", "4", "--seed", "3",
        "--out", dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn read_weights(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

#[test]
fn synth_writes_data_and_support() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let train = fs::read_to_string(dir.path().join("train.svm")).unwrap();
    assert_eq!(train.lines().count(), 60);
    assert_eq!(fs::read_to_string(dir.path().join("val.svm")).unwrap().lines().count(), 30);
    assert_eq!(fs::read_to_string(dir.path().join("support.txt")).unwrap().lines().count(), 4);
}

#[test]
fn truncated_with_zero_gravity_writes_the_sgd_model() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let data = dir.path().join("train.svm");
    let val = dir.path().join("val.svm");
    let run = |algo: &str, out: &str| {
        let o = stsgd(&[
            "train", "--algo", algo, "--data", data.to_str().unwrap(), "--val", val.to_str().unwrap(),
            "--g0", "0", "--passes", "3", "--dim", "80", "--seed", "9",
            "--out", dir.path().join(out).to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        dir.path().join(out)
    };
    let sgd = run("sgd", "sgd");
    let tg = run("truncated", "tg");
    let w = read_weights(&sgd.join("model.txt"));
    assert_eq!(w[0], "p=80");
    assert!(w.len() > 1);
    assert_eq!(w, read_weights(&tg.join("model.txt")));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(tg.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["algorithm"], "truncated");
    assert!(summary["test_error_pct"].is_number());
}

#[test]
fn stabilized_train_writes_history_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# small run\npaths = 4\npi0 = 0.8\nkeep_trace = true\n").unwrap();
    let out = dir.path().join("stab");
    let o = Command::new(env!("CARGO_BIN_EXE_stsgd"))
        .args([
            "train", "--data", dir.path().join("train.svm").to_str().unwrap(),
            "--config", cfg.to_str().unwrap(), "--set", "gamma=-3", "--passes", "4",
        ])
        .env("STSGD_OUT_DIR", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let history = fs::read_to_string(out.join("history.jsonl")).unwrap();
    let trace = fs::read_to_string(out.join("trace.jsonl")).unwrap();
    assert!(history.lines().count() >= 1);
    assert_eq!(history.lines().count(), trace.lines().count());
    let first: serde_json::Value = serde_json::from_str(history.lines().next().unwrap()).unwrap();
    assert_eq!(first["stage"], 1);
    assert_eq!(first["path_sparsity_pct"].as_array().unwrap().len(), 4);
    assert!(out.join("model.txt").is_file());
}

#[test]
fn benchmark_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bench.toml");
    fs::write(
        &spec,
        r#"
loss = "hinge"
permutations = 2
[data.synthetic]
dim = 60
n_train = 40
n_val = 20
support = 3
[[algorithm]]
kind = "stabilized"
paths = 2
passes = 2
[[algorithm]]
kind = "rda"
passes = 2
"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = stsgd(&["benchmark", "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let runs = fs::read_to_string(out.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 4);
    let agg = fs::read_to_string(out.join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 1 + 2);
    assert_eq!(fs::read_to_string(out.join("profile.csv")).unwrap().lines().count(), 1 + 2 * 20);
    assert!(out.join("aggregate.txt").is_file());
    assert!(String::from_utf8_lossy(&o.stdout).contains("rda"));
}

#[test]
fn profile_has_one_row_per_bin() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let model = dir.path().join("model.txt");
    fs::write(&model, "p=80\n1:0.5\n7:-1\n").unwrap();
    let csv = dir.path().join("profile.csv");
    let o = stsgd(&[
        "profile", "--model", model.to_str().unwrap(), "--data", dir.path().join("train.svm").to_str().unwrap(),
        "--out", csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 21);

    fs::write(&model, "p=80\n").unwrap();
    let o = stsgd(&[
        "profile", "--model", model.to_str().unwrap(), "--data", dir.path().join("train.svm").to_str().unwrap(),
        "--bins", "5", "--out", csv.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = fs::read_to_string(&csv).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "fraction").unwrap();
    for rec in rdr.records() {
        let v = rec.unwrap()[col].to_string();
        assert!(v.is_empty() || v.parse::<f64>().unwrap() == 0.0);
    }
}

#[test]
fn missing_data_file_is_a_usage_error() {
    let o = stsgd(&["train", "--data", "/nonexistent/train.svm", "--out", "/tmp"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/train.svm"));
}

#[test]
fn bad_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let data = dir.path().join("train.svm");
    let o = stsgd(&["train", "--data", data.to_str().unwrap(), "--set", "nonsense=1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = stsgd(&["train", "--data", data.to_str().unwrap(), "--set", "pi0=1.5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = stsgd(&["train", "--algo", "lasso", "--data", data.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
