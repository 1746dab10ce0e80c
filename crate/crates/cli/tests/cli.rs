use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netcournot"))
        .current_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/../.."))
        .args(args)
        .output()
        .unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn solve_exit_codes() {
    let ok = run(&["solve", "instances/wide_line.json", "--objective", "con"]);
    assert_eq!(ok.status.code(), Some(0));
    let doc = json(&ok);
    let r = doc["result"]["point"]["r"][0].as_f64().unwrap();
    assert!((r - 10.0 / 3.0).abs() < 1e-6);

    let cycle = run(&["solve", "--instance", "instances/cycling.json", "--objective", "con"]);
    assert_eq!(cycle.status.code(), Some(2));
    assert_eq!(json(&cycle)["analytic"]["exists"], false);

    let missing = run(&["solve", "instances/nope.json"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn solve_writes_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("res.json");
    let out = run(&["solve", "instances/triangle.json", "--objective", "res", "--seed", "7", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let written: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(written, json(&out));
}

#[test]
fn verify_exit_codes() {
    let q1 = format!("{}", 18.0 / 13.2);
    let q = format!("{q1},{}", 10.0 / 3.0);
    let r = format!("{},{}", 10.0 / 3.0, -10.0 / 3.0);
    let yes = run(&["verify", "instances/wide_line.json", "--objective", "con", "--q", &q, "--r", &r]);
    assert_eq!(yes.status.code(), Some(0));
    assert_eq!(json(&yes)["certificate"]["is_gne"], true);
    let no = run(&["verify", "instances/wide_line.json", "--objective", "con", "--q", "1,1", "--r", "0,0"]);
    assert_eq!(no.status.code(), Some(2));
}

#[test]
fn region_text_and_json() {
    let text = run(&["region", "instances/cycling.json"]);
    assert_eq!(text.status.code(), Some(0));
    assert!(String::from_utf8(text.stdout).unwrap().contains("no-gne"));
    let doc = json(&run(&["region", "--a", "1", "--b1", "1", "--b2", "0.65", "--c", "1", "--json"]));
    let f0 = doc["thresholds"]["f0"].as_f64().unwrap();
    assert!((f0 - 0.234_56).abs() < 1e-5);
    assert_eq!(run(&["region", "instances/triangle.json"]).status.code(), Some(1));
}

#[test]
fn sweep_writes_csv_and_gnuplot() {
    let out = run(&["sweep", "instances/thin_line.json", "--objective", "soc,con", "--steps", "11"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows = netcournot_cli::sweep::read_csv(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 22);
    let plot = run(&["sweep", "instances/thin_line.json", "--steps", "5", "--gnuplot"]);
    assert_eq!(plot.status.code(), Some(0));
    assert!(!plot.stdout.is_empty());
}
