use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fdelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdelab")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn report(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

const LINE: &str = r#"
schema_version = 1
[exponents]
p = 0.8
m = 3
[geometry]
m = 3
boundary = "dirichlet_from_oracle"
domain = { kind = "interval", x_lo = -12.0, x_hi = 12.0 }
lambda = { kind = "constant", lambda0 = 0.0 }
potential = { kind = "zero" }
[nonlinearity]
kind = "power"
c = 1.0
a = 1.0
[solver]
initial = { kind = "constant_plus_bump", base = 1.0, amplitude = 0.01, center = 0.0, width = 2.0 }
nx = 129
t_start = -64.0
horizon = 64.0
stride = 16
"#;

#[test]
fn exponents_without_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = fdelab(&["exponents", "--p", "0.75", "--m", "4", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("PASS exponents"));
    let r = report(dir.path(), "00-exponents.json");
    assert_eq!(r["detail"]["exponents"]["p_c"], 0.5);
    assert_eq!(r["schema_version"], 1);
}

#[test]
fn usage_and_config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(fdelab(&["exponents", "--p", "0.75"]).status.code(), Some(2));
    assert_eq!(fdelab(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(fdelab(&["run", "--config", "/nonexistent.toml"]).status.code(), Some(2));
    let bad = write(dir.path(), "bad.toml", "schema_version = 1\nbogus = 3\n[exponents]\np = 0.75\nm = 3\n");
    let o = fdelab(&["run", "--config", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
    // A solve task without a geometry is rejected before anything runs.
    let incomplete = write(dir.path(), "solve.toml", "schema_version = 1\n[exponents]\np = 0.75\nm = 3\n[[tasks]]\nkind = \"solve\"\n");
    assert_eq!(fdelab(&["run", "--config", &incomplete]).status.code(), Some(2));
    let sweep = fdelab(&["sweep", "--config", &incomplete, "--axis", "nope", "--values", "1"]);
    assert_eq!(sweep.status.code(), Some(2));
}

#[test]
fn empty_task_list_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "empty.toml", "schema_version = 1\n[exponents]\np = 0.75\nm = 3\n");
    let out = dir.path().join("out");
    let o = fdelab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
}

#[test]
fn failed_hypothesis_exits_1_with_bullet() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "line.toml", LINE);
    let out = dir.path().join("out");
    let o = fdelab(&["liouville", "--config", &cfg, "--id", "Thm7_4", "--radii", "1,2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out, "00-liouville-Thm7_4.json");
    assert_eq!(r["pass"], false);
    assert!(r["violated_bullet"].as_str().is_some_and(|s| !s.is_empty()), "{r}");
}

#[test]
fn report_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = fdelab(&["max-principle", "--config", "../../configs/circle.toml", "--id", "Cor11_4", "--out", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let first = a.join("00-max_principle-Cor11_4.json");
    let o = fdelab(&["run", "--config", first.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        std::fs::read(&first).unwrap(),
        std::fs::read(b.join("00-max_principle-Cor11_4.json")).unwrap()
    );
}

#[test]
fn sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "exp.toml", "schema_version = 1\n[exponents]\np = 0.75\nm = 3\n[[tasks]]\nkind = \"exponents\"\n");
    let out = dir.path().join("out");
    let o = fdelab(&["sweep", "--config", &cfg, "--axis", "m", "--values", "4,5,10", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("m,task,pass,p_c,p_0"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn verify_estimate_radius_override() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = fdelab(&[
        "verify-estimate",
        "--config",
        "../../configs/hsz.toml",
        "--id",
        "I_static",
        "--radius",
        "2",
        "--levels",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(&out, "00-estimate-I_static.json");
    assert_eq!(r["inputs"]["tasks"][0]["cylinder"]["r"], 2.0);
    assert_eq!(r["per_level"].as_array().unwrap().len(), 2);
    assert!(r["C_star"].as_f64().unwrap() > 0.0);
}
