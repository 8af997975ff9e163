use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use emdq::io::read_point_set;
use emdq::PointSource;
use tempfile::TempDir;

fn emdq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emdq")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn field(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(key))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
        .trim()
        .parse()
        .unwrap()
}

#[test]
fn far_apart_singletons_are_above_threshold() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.csv", "0,0\n");
    let b = write(&dir, "b.csv", "3,4\n");
    let out = emdq(&["query", "--a", s(&a), "--b", s(&b), "-t", "1"]);
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).contains("verdict: CASE1"));

    let out = emdq(&["query", "--a", s(&a), "--b", s(&b), "-t", "10"]);
    assert!(stdout(&out).contains("verdict: CASE2"));
}

#[test]
fn identical_files_are_below_threshold() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.csv", "# three points\n0,0\n1,0\n0,1\n");
    let out = emdq(&["query", "--a", s(&a), "--b", s(&a), "-t", "1"]);
    assert!(stdout(&out).contains("verdict: CASE2"), "{out:?}");
}

#[test]
fn json_output_parses() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.csv", "0,0\n1,1\n2,0\n");
    let b = write(&dir, "b.csv", "0,1\n1,2\n2,1\n");
    let out = emdq(&["query", "--a", s(&a), "--b", s(&b), "-t", "0.25", "--json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["verdict"], "CASE1");
    assert!(v["delta_tilde"].as_f64().unwrap() > 0.0);
    assert!(v["levels"].as_array().unwrap().len() <= v["h_max"].as_u64().unwrap() as usize);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.csv", "1,0,0\n1,1,1\n");
    let heavy = write(&dir, "b.csv", "5,0,0\n");
    let out = emdq(&["query", "--weighted", "--a", s(&a), "--b", s(&heavy), "-t", "1"]);
    assert_eq!(out.status.code(), Some(3), "unequal masses");

    let missing = dir.path().join("missing.csv");
    let out = emdq(&["query", "--a", s(&a), "--b", s(&missing), "-t", "1"]);
    assert_eq!(out.status.code(), Some(2));

    let bad = write(&dir, "bad.csv", "1,2\n3\n");
    let out = emdq(&["emd", "--a", s(&bad), "--b", s(&a)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let out = emdq(&["query", "--a", s(&a), "--b", s(&a), "-t", "1", "--eps", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn emd_solvers_agree_on_small_instance() {
    let dir = TempDir::new().unwrap();
    // Two units at the origin and one at (4, 0) against three at (0, 3):
    // cost 3 + 3 + 5 = 11 over total weight 3.
    let a = write(&dir, "a.csv", "2,0,0\n1,4,0\n");
    let b = write(&dir, "b.csv", "3,0,3\n");
    let args = ["emd", "--weighted", "--a", s(&a), "--b", s(&b)];
    for solver in ["exact", "oracle"] {
        let out = emdq(&[&args[..], &["--solver", solver]].concat());
        assert!(out.status.success(), "{out:?}");
        let text = stdout(&out);
        assert!((field(&text, "cost:") - 11.0).abs() < 1e-12, "{solver}: {text}");
        assert!((field(&text, "emd:") - 11.0 / 3.0).abs() < 1e-12);
    }
    let out = emdq(&[&args[..], &["--solver", "sinkhorn", "--eta-factor", "0.005"]].concat());
    let cost = field(&stdout(&out), "cost:");
    assert!((11.0 - 1e-9..11.0 * 1.01).contains(&cost), "{cost}");
}

#[test]
fn gen_is_deterministic_and_round_trips() {
    let dir = TempDir::new().unwrap();
    let run = |name: &str, seed: &str| {
        let path = dir.path().join(name);
        let out = emdq(&["gen", "--out", s(&path), "--n", "300", "--d", "12", "--m", "2", "--degree", "3", "--seed", seed]);
        assert!(out.status.success(), "{out:?}");
        path
    };
    let first = run("one.bin", "5");
    let second = run("two.bin", "5");
    let other = run("three.bin", "6");
    assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
    assert_ne!(fs::read(&first).unwrap(), fs::read(&other).unwrap());

    let set = read_point_set(&first, false).unwrap();
    assert_eq!((set.len(), set.dim()), (300, 12));

    let csv = run("one.csv", "5");
    let from_csv = read_point_set(&csv, false).unwrap();
    assert_eq!(from_csv.len(), 300);
    for (p, q) in set.points().zip(from_csv.points()) {
        assert_eq!(p, q);
    }
}

#[test]
fn gen_degree_one_is_flat() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("flat.bin");
    let out = emdq(&["gen", "--out", s(&path), "--n", "200", "--d", "8", "--m", "2", "--degree", "1", "--seed", "3"]);
    assert!(out.status.success());
    let set = read_point_set(&path, false).unwrap();
    // Every point lies in the affine span of three points in general position.
    let p0 = set.point(0).to_vec();
    let sub = |p: &[f64]| -> Vec<f64> { p.iter().zip(&p0).map(|(x, y)| x - y).collect() };
    let (u, v) = (sub(set.point(1)), sub(set.point(2)));
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let (uu, uv, vv) = (dot(&u, &u), dot(&u, &v), dot(&v, &v));
    let det = uu * vv - uv * uv;
    assert!(det > 1e-9 * uu * vv);
    for p in set.points() {
        let w = sub(p);
        let (wu, wv) = (dot(&w, &u), dot(&w, &v));
        let alpha = (wu * vv - wv * uv) / det;
        let beta = (wv * uu - wu * uv) / det;
        let resid: f64 = w.iter().zip(u.iter().zip(&v)).map(|(x, (a, b))| (x - alpha * a - beta * b).powi(2)).sum();
        assert!(resid.sqrt() <= 1e-8 * (1.0 + dot(&w, &w).sqrt()), "residual {resid}");
    }
}

#[test]
fn bench_writes_report() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.csv", "0,0\n1,0\n0,1\n1,1\n");
    let b = write(&dir, "b.csv", "0.2,0\n1,0.3\n0,1.1\n1.4,1\n");
    let report = dir.path().join("bench.csv");
    let out = emdq(&[
        "bench", "--a", s(&a), "--b", s(&b), "--theta-range", "-2..2", "--eps", "0.05,0.1", "--repeat", "1",
        "--min-time", "0", "--out", s(&report),
    ]);
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).contains("rows: 10"));
    let text = fs::read_to_string(&report).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "theta,eps,n,verdict,truth_case,levels,time_our_s,time_net_s,time_sin_s,ratio_net,ratio_sin"
    );
    assert_eq!(lines.count(), 10);

    let out = emdq(&["bench", "--a", s(&a), "--b", s(&b), "--theta-range", "3..1", "--out", s(&report)]);
    assert_eq!(out.status.code(), Some(2));
}
