use std::fs;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slice-planner"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn rows(path: &std::path::Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(Result::unwrap).collect()
}

fn column(path: &std::path::Path, name: &str) -> usize {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers()
        .unwrap()
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn plan_writes_one_accepted_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("plan.csv");
    let o = run(&["plan", "robots", "--out", out.to_str().unwrap()]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let rs = rows(&out);
    assert_eq!(rs.len(), 1);
    assert_eq!(&rs[0][column(&out, "outcome")], "accepted");
    assert!(rs[0][column(&out, "poas")].contains("robo"));
    assert!(rs[0][column(&out, "tiers")].contains("femto"));
}

#[test]
fn rejection_exits_with_two() {
    let o = run(&["plan", "robots", "--gamma", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).contains("additive-kpi"));
}

#[test]
fn bad_input_exits_with_one() {
    assert_eq!(
        run(&["plan", "/nonexistent/scenario.toml"]).status.code(),
        Some(1)
    );
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "name = \"x\"\n[[nodes]]\nid = 3\n").unwrap();
    assert_eq!(run(&["plan", bad.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(
        run(&["plan", "robots", "--service", "nope"]).status.code(),
        Some(1)
    );
}

#[test]
fn argument_errors_exit_with_one() {
    assert_eq!(
        run(&["plan", "robots", "--gamma", "0"]).status.code(),
        Some(1)
    );
    assert_eq!(
        run(&["sweep", "robots", "--axis", "width", "--values", "1"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn sweep_rows_follow_values_and_match_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = run(&[
        "sweep",
        "robots",
        "--axis",
        "delay",
        "--values",
        "10,50,120",
        "--oracle",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rs = rows(&out);
    let (value, cost, oracle) = (
        column(&out, "value"),
        column(&out, "cost_total"),
        column(&out, "oracle_cost"),
    );
    assert_eq!(
        rs.iter().map(|r| r[value].to_string()).collect::<Vec<_>>(),
        ["10", "50", "120"]
    );
    for r in &rs {
        assert_eq!(r[cost].is_empty(), r[oracle].is_empty());
        if !r[cost].is_empty() {
            let (c, o): (f64, f64) = (r[cost].parse().unwrap(), r[oracle].parse().unwrap());
            assert!((c - o).abs() <= 1e-9 * o);
        }
    }
}

#[test]
fn output_is_reproducible_without_timing() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        run(&[
            "compare",
            "robots",
            "--gamma-list",
            "3,10",
            "--out",
            p.to_str().unwrap(),
        ]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let rs = rows(&a);
    let poas = column(&a, "tiers");
    assert!(rs[0][poas].contains("pico"));
    assert!(rs[1][poas].contains("femto"));
}

#[test]
fn timing_adds_wall_clock_column() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    run(&["plan", "robots", "--timing", "--out", out.to_str().unwrap()]);
    let wall = column(&out, "wall_ms");
    assert!(rows(&out)[0][wall].parse::<f64>().unwrap() >= 0.0);
}

#[test]
fn dot_dump_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let dot = dir.path().join("dg.dot");
    run(&[
        "plan",
        "robots",
        "--dump-decision-graph",
        dot.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(dot).unwrap();
    assert!(text.starts_with("digraph"));
    assert!(text.contains("style=dashed"));
}

#[test]
fn validate_random_scenarios_succeeds() {
    let o = run(&[
        "validate",
        "robots",
        "vehicular",
        "--random",
        "30",
        "--seed",
        "5",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("0 violations"));
}
