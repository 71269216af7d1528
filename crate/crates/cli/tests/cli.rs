use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = "seed = 2
[federated]
clients = 6
rounds = 10
local_steps = 2
learning_rate = 0.1
batch_size = 8
[channel]
payload_bits = 320000.0
[workload]
model = \"logistic\"
samples = 300
features = 4
classes = 3
";

fn fedsched(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedsched"))
        .args(args)
        .env("FEDSCHED_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn config(dir: &Path, text: &str) -> String {
    let path = dir.join("c.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_subcommand_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), CONFIG);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = fedsched(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "17"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(
        fs::read(a.join("metrics.csv")).unwrap(),
        fs::read(b.join("metrics.csv")).unwrap()
    );
    let manifest = fs::read_to_string(a.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 17"));
}

#[test]
fn sweep_subcommand_writes_each_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), CONFIG);
    let out = dir.path().join("s");
    let o = fedsched(&[
        "sweep", "--config", &cfg, "--param", "policy.v", "--values", "1,1e3,1e5", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for v in ["1", "1e3", "1e5"] {
        assert!(out.join(format!("policy.v={v}")).join("manifest.json").is_file());
    }
}

#[test]
fn estimate_m_prints_a_group_size() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), CONFIG);
    let o = fedsched(&["estimate-m", "--config", &cfg, "--rounds", "200"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: f64 = String::from_utf8(o.stdout).unwrap().trim().parse().unwrap();
    assert!(m > 0.0 && m <= 6.0);
}

#[test]
fn bad_config_names_the_key_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &CONFIG.replace("[channel]", "[channel]\nlamda = 3.0"));
    let o = fedsched(&["run", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("lamda"));
    assert!(!dir.path().join("o").join("metrics.csv").exists());
}
