use std::path::Path;
use std::process::{Command, Output};

fn masspart(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_masspart")).args(args).output().expect("binary runs")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn gen(dir: &Path, name: &str, extra: &[&str]) -> String {
    let out = path(dir, name);
    let mut args = vec!["gen", "-o", &out];
    args.extend_from_slice(extra);
    let o = masspart(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn cone_on_random_instance_is_found_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "inst.json", &["--d", "2", "--m", "3", "--atoms", "50", "--seed", "7"]);
    let res = path(dir.path(), "cone.json");
    let o = masspart(&["cone", "-i", &inst, "-o", &res]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = masspart(&["verify", "-i", &inst, "-r", &res]);
    assert_eq!(v.status.code(), Some(0), "{}", String::from_utf8_lossy(&v.stdout));
}

#[test]
fn fan_without_lift_reports_the_failed_inequality() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "inst.json", &["--d", "2", "--m", "2"]);
    let o = masspart(&["fan", "-i", &inst, "--k", "3", "--lift", "never"]);
    assert_eq!(o.status.code(), Some(3));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("\"infeasible\""));
    assert!(stdout.contains("m(k−1) = 2"), "{stdout}");
}

#[test]
fn antipodal_loop_winds_an_odd_number_of_times() {
    let dir = tempfile::tempdir().unwrap();
    let n = 200;
    let samples: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / n as f64;
            [t.cos() + 0.3 * (3.0 * t).cos(), t.sin() - 0.2 * (5.0 * t).sin()]
        })
        .collect();
    let file = path(dir.path(), "loop.json");
    std::fs::write(&file, serde_json::to_string(&samples).unwrap()).unwrap();
    let o = masspart(&["certify", "--winding", &file]);
    assert!(o.status.success());
    let w: i64 = String::from_utf8_lossy(&o.stdout).trim().parse().unwrap();
    assert_eq!(w.rem_euclid(2), 1, "winding {w}");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "inst.json", &["--d", "2", "--m", "2", "--atoms", "30", "--seed", "3"]);
    let mut outputs = Vec::new();
    for run in 0..2 {
        let json = path(dir.path(), &format!("dw{run}.json"));
        let svg = path(dir.path(), &format!("dw{run}.svg"));
        let o = masspart(&["double-wedge", "-i", &inst, "-o", &json, "--svg", &svg]);
        assert_eq!(o.status.code(), Some(0));
        outputs.push((std::fs::read(&json).unwrap(), std::fs::read(&svg).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert!(String::from_utf8_lossy(&outputs[0].1).contains("<svg"));
}

#[test]
fn generator_is_deterministic() {
    let a = masspart(&["gen", "--kind", "hs-planted", "--d", "2", "--seed", "5"]);
    let b = masspart(&["gen", "--kind", "hs-planted", "--d", "2", "--seed", "5"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn projective_hs_cuts_verify_after_transform() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "hs.json", &["--kind", "hs-planted", "--d", "2", "--seed", "1"]);
    let res = path(dir.path(), "res.json");
    let o = masspart(&["projective-hs", "-i", &inst, "-o", &res]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = masspart(&["verify", "-i", &inst, "-r", &res, "--tol", "0"]);
    assert_eq!(v.status.code(), Some(0), "{}", String::from_utf8_lossy(&v.stdout));
}

#[test]
fn bad_input_exits_with_one() {
    let o = masspart(&["cone", "-i", "/nonexistent/instance.json"]);
    assert_eq!(o.status.code(), Some(1));
    let o = masspart(&["fan", "-i", "/nonexistent/instance.json", "--targets", "1/0,1"]);
    assert_eq!(o.status.code(), Some(1));
}
