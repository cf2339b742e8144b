use std::path::Path;
use std::process::{Command, Output};

use lsir_cli::format::{parse_number, sig12};
use serde_json::Value;

const QUICK_LSIR: &[&str] = &[
    "--tau-grid",
    "0.5,1",
    "--gamma-grid",
    "0.01",
    "--sigma-grid",
    "0.5,1",
    "--lambda-grid",
    "0.01,0.1",
    "--restarts",
    "1",
    "--max-iterations",
    "4",
];

fn lsir(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsir"))
        .args(args)
        .current_dir(cwd)
        .env("LSIR_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = lsir(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path, name: &str, seed: u64, n: usize) {
    ok(
        &["synth", "--family", "cubic-exp", "--n", &n.to_string(), "--seed", &seed.to_string(), "--out", name],
        dir,
    );
}

fn text_field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| {
            let mut parts = l.split_whitespace();
            (parts.next() == Some(key)).then(|| parts.next().unwrap_or(""))
        })
        .unwrap_or_else(|| panic!("no {key} in\n{text}"))
}

#[test]
fn synth_writes_requested_rows_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "a.csv", 7, 300);
    synth(dir.path(), "b.csv", 7, 300);
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 301);
    synth(dir.path(), "c.csv", 8, 300);
    assert_ne!(std::fs::read(dir.path().join("c.csv")).unwrap(), b);
}

#[test]
fn usage_and_config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = lsir(&["synth", "--n", "10", "--out", "x.csv"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("--family"));

    let family = lsir(&["synth", "--family", "quartic", "--n", "10", "--out", "x.csv"], dir.path());
    assert_eq!(family.status.code(), Some(2));

    let absent = lsir(&["direction", "-i", "nope.csv"], dir.path());
    assert_eq!(absent.status.code(), Some(2));

    std::fs::write(dir.path().join("nan.csv"), "x,y\n0,1\n1,nan\n2,3\n").unwrap();
    let parse = lsir(&["direction", "-i", "nan.csv"], dir.path());
    assert_eq!(parse.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&parse.stderr).contains("row 2"));

    synth(dir.path(), "toy.csv", 1, 40);
    let delta = lsir(&["direction", "-i", "toy.csv", "--engine", "hsicr", "--delta", "1.5"], dir.path());
    assert_eq!(delta.status.code(), Some(2));

    std::fs::write(dir.path().join("empty.csv"), "name,path,truth\n").unwrap();
    let empty = lsir(&["benchmark", "--manifest", "empty.csv", "--out", "r.csv"], dir.path());
    assert_eq!(empty.status.code(), Some(2));
}

#[test]
fn engine_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let rows: String = (0..6).map(|i| format!("{i},{}\n", i * i)).collect();
    std::fs::write(dir.path().join("tiny.csv"), format!("x,y\n{rows}")).unwrap();
    let out = lsir(&["direction", "-i", "tiny.csv", "--engine", "hsicr"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn text_and_json_agree_at_twelve_digits() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "toy.csv", 3, 80);
    let common = ["direction", "-i", "toy.csv", "--seed", "11", "--permutations", "99"];
    let mut text_args = common.to_vec();
    text_args.extend_from_slice(QUICK_LSIR);
    let text = ok(&text_args, dir.path());
    let mut json_args = text_args.clone();
    json_args.extend_from_slice(&["--output", "json"]);
    let record: Value = serde_json::from_str(&ok(&json_args, dir.path())).unwrap();
    let outputs = &record["outputs"];
    for key in ["score_forward", "score_backward"] {
        let exact = outputs[key].as_f64().unwrap();
        assert_eq!(text_field(&text, key), sig12(exact), "{key}");
    }
    for key in ["p_forward", "p_backward"] {
        let exact = outputs[key].as_f64().unwrap();
        match parse_number(text_field(&text, key)) {
            Some(shown) => assert_eq!(sig12(shown), sig12(exact)),
            None => assert!(exact < 1e-3),
        }
    }
    for key in ["decision", "table_decision", "simplified_decision", "score_decision"] {
        let json = outputs[key].as_str().unwrap();
        let shown = text_field(&text, key);
        let expected = match json {
            "forward" => "x->y",
            "backward" => "y->x",
            other => other,
        };
        assert_eq!(shown, expected, "{key}");
    }
    assert_eq!(record["seed"], 11);
    assert_eq!(record["artifact"], "lsir");
    assert_eq!(record["config"]["command"], "direction");
}

#[test]
fn zero_permutations_omit_p_values() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "toy.csv", 4, 60);
    let text = ok(
        &["direction", "-i", "toy.csv", "--engine", "hsicr", "--permutations", "0"],
        dir.path(),
    );
    assert_eq!(text_field(&text, "p_forward"), "-");
    assert_eq!(text_field(&text, "decision"), "-");
    assert!(["x->y", "y->x"].contains(&text_field(&text, "score_decision")));
}

#[test]
fn hsicr_direction_reports_both_p_values() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "toy.csv", 5, 150);
    let text = ok(&["direction", "-i", "toy.csv", "--engine", "hsicr", "--permutations", "200"], dir.path());
    for key in ["p_forward", "p_backward"] {
        assert_ne!(text_field(&text, key), "-");
    }
}

#[test]
fn every_command_replays_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "toy.csv", 9, 60);
    ok(&["synth", "--family", "poly:0,1,0,-1", "--n", "50", "--seed", "2", "--out", "p.csv", "--record", "synth.json"], d);

    let mut fit = vec!["fit", "-i", "toy.csv", "--seed", "5", "--curve", "curve.csv", "--grid-points", "25", "--record", "fit.json"];
    fit.extend_from_slice(QUICK_LSIR);
    ok(&fit, d);
    assert_eq!(std::fs::read_to_string(d.join("curve.csv")).unwrap().lines().count(), 26);

    ok(
        &["fit", "-i", "toy.csv", "--engine", "hsicr", "--swap", "--record", "hfit.json"],
        d,
    );

    let mut direction = vec!["direction", "-i", "toy.csv", "--seed", "8", "--permutations", "50", "--record", "dir.json"];
    direction.extend_from_slice(QUICK_LSIR);
    ok(&direction, d);

    ok(
        &["direction", "-i", "toy.csv", "--engine", "lsir", "--mode", "literal", "--permutations", "5", "--record", "lit.json",
          "--tau-grid", "1", "--gamma-grid", "0.01", "--sigma-grid", "1", "--lambda-grid", "0.1", "--restarts", "1", "--max-iterations", "2"],
        d,
    );

    std::fs::write(d.join("manifest.csv"), "name,path,truth\ntoy,toy.csv,x->y\nflipped,p.csv,y->x\n").unwrap();
    ok(
        &["benchmark", "--manifest", "manifest.csv", "--engine", "hsicr", "--permutations", "50", "--out", "report.csv", "--record", "bench.json"],
        d,
    );

    for rec in ["synth.json", "fit.json", "hfit.json", "dir.json", "lit.json", "bench.json"] {
        let out = ok(&["replay", rec], d);
        assert!(out.contains("identical"), "{rec}: {out}");
    }
}

#[test]
fn tampered_record_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "toy.csv", 9, 60);
    ok(&["direction", "-i", "toy.csv", "--engine", "hsicr", "--permutations", "20", "--record", "r.json"], d);
    let mut record: Value = serde_json::from_str(&std::fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    let p = record["outputs"]["p_forward"].as_f64().unwrap();
    record["outputs"]["p_forward"] = Value::from(p + 1e-15);
    std::fs::write(d.join("r.json"), serde_json::to_string(&record).unwrap()).unwrap();
    let out = lsir(&["replay", "r.json"], d);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/p_forward"));
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "toy.csv", 6, 60);
    let run = |threads: &str| {
        let mut args = vec!["--threads", threads, "direction", "-i", "toy.csv", "--permutations", "40", "--output", "json"];
        args.extend_from_slice(QUICK_LSIR);
        let v: Value = serde_json::from_str(&ok(&args, dir.path())).unwrap();
        v["outputs"].clone()
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn benchmark_report_has_one_row_per_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::create_dir(d.join("data")).unwrap();
    let mut manifest = String::from("name,path,truth\n");
    for seed in 1..=8 {
        synth(&d.join("data"), &format!("s{seed}.csv"), seed, 60);
        manifest.push_str(&format!("s{seed},data/s{seed}.csv,x->y\n"));
    }
    manifest.push_str("gone,data/missing.csv,x->y\n");
    std::fs::write(d.join("manifest.csv"), manifest).unwrap();
    let text = ok(
        &["benchmark", "--manifest", "manifest.csv", "--engine", "hsicr", "--permutations", "30", "--out", "report.csv"],
        d,
    );
    let report = std::fs::read_to_string(d.join("report.csv")).unwrap();
    let rows: Vec<&str> = report.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 1 + 9);
    assert!(rows[0].starts_with("name,n,p_forward,p_backward"));
    for (i, row) in rows[1..9].iter().enumerate() {
        assert!(row.starts_with(&format!("s{},60,", i + 1)), "{row}");
    }
    assert!(rows[9].starts_with("gone,"));
    assert!(!rows[9].ends_with(','));
    let summary: Vec<&str> = report.lines().filter(|l| l.starts_with('#')).collect();
    assert_eq!(summary.len(), 4);
    assert!(summary.iter().all(|l| l.ends_with("/ 9")));
    assert!(text.contains("score      correct"));
    assert!(text.contains("gone: "));
}
