use std::path::Path;
use std::process::{Command, Output};

use lfslab::report::parse_report;

fn lfslab(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lfslab"));
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("LFSLAB_THREADS", t);
    }
    cmd.output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn surfaces_lists_the_catalog() {
    let out = lfslab(&["surfaces"], None);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["sphere", "torus", "ellipsoid", "metaball_blend"] {
        assert!(text.contains(name));
    }
}

#[test]
fn campaign_from_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.cfg",
        "# archived run\nsurface = sphere\nsurface.R = 1.0\neps_max = 0.3333\nn_pairs = 10000\nseed = 42\n",
    );
    let report = dir.path().join("out/report.json").display().to_string();
    let plot = dir.path().join("plot.csv").display().to_string();
    let out = lfslab(
        &["campaign", "--config", &cfg, "--n-pairs", "200", "--set", "n_traces=2", "--out", &report, "--plot-data", &plot],
        Some("2"),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = parse_report(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(r.config.n_pairs, 200);
    assert_eq!(r.config.n_traces, 2);
    assert_eq!(r.config.eps_max, 0.3333);
    assert!(r.counts.reconciles());
    assert!(r.wall_time.is_none());
    let plot = std::fs::read_to_string(plot).unwrap();
    assert_eq!(plot.lines().next(), Some("eps,angle,bound_log,bound_new"));
    assert_eq!(plot.lines().count(), 201);
}

#[test]
fn csv_summary_reports_no_violations_on_the_sphere() {
    let out = lfslab(
        &["campaign", "--surface", "sphere", "--eps-max", "1/3", "--n-pairs", "500", "--seed", "42", "--format", "csv-summary", "--timing"],
        None,
    );
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    assert_eq!(col("violations_new"), "0");
    assert_eq!(col("violations_log"), "0");
    assert!(col("wall_time").parse::<f64>().is_ok());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        "surface = sphere\neps_max = 0.4\nn_pairs = 10\nseed = 1\n",
        "surface = sphere\neps_max = 0.2\nn_pairs = 0\nseed = 1\n",
        "",
        "surface = sphere\neps_max = 0.2\nn_pairs = 10\nseed = 1\ncolour = red\n",
    ];
    for (i, text) in cases.iter().enumerate() {
        let cfg = write(dir.path(), &format!("{i}.cfg"), text);
        let out = lfslab(&["campaign", "--config", &cfg], None);
        assert_eq!(code(&out), 2, "case {i}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("config error"));
    }
    assert_eq!(code(&lfslab(&["campaign", "--config", "/nonexistent/x.cfg"], None)), 2);
    assert_eq!(code(&lfslab(&["frobnicate"], None)), 2);
    let bad_threads = lfslab(&["campaign", "--surface", "sphere", "--eps-max", "0.1", "--n-pairs", "1", "--seed", "1"], Some("many"));
    assert_eq!(code(&bad_threads), 2);
}

#[test]
fn thread_count_does_not_change_the_report() {
    let args = ["campaign", "--surface", "torus", "--eps-max", "1/3", "--n-pairs", "300", "--seed", "5", "--n-traces", "4", "--claim3-probes", "2"];
    let a = lfslab(&args, Some("1"));
    let b = lfslab(&args, Some("4"));
    let c = lfslab(&args, Some("0"));
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn verify_reports_the_pair() {
    let out = lfslab(
        &["verify", "--surface", "sphere", "--q", "0.98,0.15,0", "--q-prime", "0.98,-0.15,0", "--snap"],
        None,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass_log"], true);
    // Too far apart for the hypothesis.
    let far = lfslab(&["verify", "--surface", "sphere", "--q", "1,0,0", "--q-prime", "0,1,0"], None);
    assert_eq!(code(&far), 2);
}

#[test]
fn trace_and_probes() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("trace.csv").display().to_string();
    let out = lfslab(
        &["trace", "--surface", "torus", "--q", "3,0,0", "--q-prime", "2.98,0.3,0", "--snap", "--steps", "200", "--out", &csv],
        None,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 202);

    let claim3 = lfslab(
        &["probe", "claim3", "--surface", "sphere", "--point", "0,0,1.5", "--direction", "1,0,0"],
        None,
    );
    assert_eq!(code(&claim3), 0);
    assert_eq!(String::from_utf8(claim3.stdout).unwrap().lines().count(), 14);

    let prop1 = lfslab(
        &["probe", "prop1", "--surface", "sphere", "--point", "0,0,1", "--direction", "1,0,0", "--scales", "0.2,0.1"],
        None,
    );
    assert_eq!(code(&prop1), 0);
    let text = String::from_utf8(prop1.stdout).unwrap();
    let ratio: f64 = text.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((ratio - 1.001668).abs() < 1e-5);

    let path = dir.path().join("path.csv").display().to_string();
    let prop2 = lfslab(
        &["probe", "prop2", "--surface", "torus", "--start", "3.2,0,0", "--end", &format!("{},{},0", 3.2 * 0.06f64.cos(), 3.2 * 0.06f64.sin()), "--path-csv", &path],
        None,
    );
    assert_eq!(code(&prop2), 0, "{}", String::from_utf8_lossy(&prop2.stderr));
    assert!(std::fs::read_to_string(&path).unwrap().starts_with("t,x,y,z,h,kappa\n"));
    // End point off the level set of the start.
    let off = lfslab(&["probe", "prop2", "--surface", "torus", "--start", "3.2,0,0", "--end", "3.0,0.6,0"], None);
    assert_eq!(code(&off), 2);
}

#[test]
fn medial_export() {
    let out = lfslab(&["medial", "--surface", "torus", "--contacts", "100", "--seed", "3"], None);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("x,y,z,radius,side"));
    assert!(text.lines().count() > 100);
}
