use std::path::Path;
use std::process::{Command, Output};

fn restraint(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_restraint"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn restraint")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    std::fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const MIN_TIME: &str = "[example]\nkey = \"minimum_time_1d\"\np0_bar = 0.9\n";

#[test]
fn print_defaults_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = restraint(dir.path(), &["--print-defaults"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let cfg = write_config(dir.path(), "d.toml", &text);
    let out = restraint(dir.path(), &["verify", "--config", &cfg, "--out", "o"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn min_time_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "mt.toml", MIN_TIME);
    for cmd in ["verify", "synthesize", "oracle"] {
        let out = restraint(dir.path(), &[cmd, "--config", &cfg, "--out", "o"]);
        assert_eq!(code(&out), 0, "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = restraint(dir.path(), &["report", "--out", "o"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let o = dir.path().join("o");
    let csv = std::fs::read_to_string(o.join("trajectory_0.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,s,x1,control_index,U,d,cost");
    assert!(csv.lines().count() > 2);

    let syn = json(&o.join("synthesis.json"));
    assert_eq!(syn["schema_version"], 1);
    assert_eq!(syn["passed"], true);
    let run = &syn["runs"][0];
    let (cost, bound) = (run["cost"].as_f64().unwrap(), run["cost_bound"].as_f64().unwrap());
    assert!(cost <= bound && cost >= 1.0 - 1e-3 - 1e-9, "cost {cost}, bound {bound}");
    assert_eq!(syn["envelope_audit"]["failures"], 0);

    let oracle = json(&o.join("oracle.json"));
    assert_eq!(oracle["passed"], true);
    assert_eq!(oracle["comparison"]["violations"].as_array().unwrap().len(), 0);
}

#[test]
fn missing_p0_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "[example]\nkey = \"minimum_time_1d\"\n");
    let out = restraint(dir.path(), &["verify", "--config", &cfg, "--out", "o"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("p0_bar"));
}

#[test]
fn missing_config_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = restraint(dir.path(), &["verify", "--config", "nope.toml", "--out", "o"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn unstable_power_law_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "pl.toml",
        "[example]\nkey = \"power_law\"\np0_bar = 0.9\ns = -1.0\n",
    );
    let out = restraint(dir.path(), &["verify", "--config", &cfg, "--out", "o"]);
    assert_eq!(code(&out), 1);
    let v = json(&dir.path().join("o/verify.json"));
    assert_eq!(v["certificate"]["granted"], false);
    let out = restraint(dir.path(), &["synthesize", "--config", &cfg, "--out", "o"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn oracle_non_convergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ms.toml", &format!("{MIN_TIME}[hjb]\nmax_sweeps = 1\n"));
    let out = restraint(dir.path(), &["oracle", "--config", &cfg, "--out", "o"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn start_in_target_costs_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "st.toml", &format!("starts = [[0.0]]\n{MIN_TIME}"));
    let out = restraint(dir.path(), &["synthesize", "--config", &cfg, "--out", "o"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("o/trajectory_0.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
    let syn = json(&dir.path().join("o/synthesis.json"));
    assert_eq!(syn["runs"][0]["cost"].as_f64(), Some(0.0));
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "mt.toml", &format!("seed = 11\n{MIN_TIME}"));
    for out_dir in ["a", "b"] {
        let out = restraint(dir.path(), &["synthesize", "--config", &cfg, "--out", out_dir]);
        assert_eq!(code(&out), 0);
    }
    for file in ["synthesis.json", "trajectory_0.csv"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert!(a == b, "{file} differs between runs");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "mt.toml", MIN_TIME);
    let out = restraint(dir.path(), &["verify", "--config", &cfg, "--out", "o", "--seed", "42"]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&dir.path().join("o/verify.json"))["seed"], 42);
}

#[test]
fn spiral_verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sp.toml",
        "[example]\nkey = \"spiral\"\np0_bar = 1.0\nepsilon = 0.5\n",
    );
    let out = restraint(dir.path(), &["verify", "--config", &cfg, "--out", "o"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
}
