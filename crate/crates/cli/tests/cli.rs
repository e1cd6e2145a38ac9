use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use segmkt::microsim::{write_panel, PanelMeta, SurveyPanel, WorkerRecord};

const SMALL: &str = "[model]\ngrid_size = 101\n[microsim]\nn_workers = 4000\n";

fn segmkt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_segmkt")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Every file in a directory, sorted by name.
fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");

    let o = segmkt(&["solve", "--config", "/nonexistent/x.toml", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));

    let bad = write(tmp.path(), "bad.toml", "[model]\ninformal_penalty = 1.2\n");
    let o = segmkt(&["solve", "--config", s(&bad), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_str(stderr(&o).trim()).unwrap();
    assert_eq!(err["exit_code"], 2);
    assert!(err["message"].as_str().unwrap().contains("informal_penalty"), "{err}");

    let unknown = write(tmp.path(), "u.toml", "[model]\nfiring_costs = 1.0\n");
    assert_eq!(segmkt(&["solve", "--config", s(&unknown), "--out", s(&out)]).status.code(), Some(2));

    let small = write(tmp.path(), "s.toml", SMALL);
    let o = segmkt(&["simulate", "--config", s(&small), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2), "a stochastic command without a seed");
    assert!(stderr(&o).contains("seed"));

    assert_eq!(segmkt(&["solve", "--threads", "0", "--out", s(&out)]).status.code(), Some(2));
    assert_eq!(segmkt(&["solve", "--no-such-flag"]).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn solve_writes_a_complete_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.toml", SMALL);
    let out = tmp.path().join("solve");
    let o = segmkt(&["solve", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), s(&out));
    let names: Vec<String> = files(&out).into_iter().map(|(n, _)| n).collect();
    for f in ["config.toml", "summary.json", "summary.csv", "tightness_trace.csv"] {
        assert!(names.contains(&f.to_string()), "{names:?}");
    }
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["diagnostics"]["bellman_residual"].as_f64().unwrap() < 1e-8);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.toml", SMALL);
    for cmd in ["solve", "sweep", "simulate", "reform"] {
        let a = tmp.path().join(format!("{cmd}_a"));
        let b = tmp.path().join(format!("{cmd}_b"));
        for (dir, threads) in [(&a, "1"), (&b, "3")] {
            let o = segmkt(&[cmd, "--config", s(&cfg), "--seed", "7", "--threads", threads, "--out", s(dir)]);
            assert!(o.status.success(), "{cmd}: {}", stderr(&o));
        }
        assert_eq!(files(&a), files(&b), "{cmd}");
    }
    let panel = tmp.path().join("simulate_a/panel.csv");
    let a = tmp.path().join("est_a");
    let b = tmp.path().join("est_b");
    for dir in [&a, &b] {
        let o = segmkt(&["estimate", "--config", s(&cfg), "--panel", s(&panel), "--out", s(dir)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(files(&a), files(&b));
    // estimating the written panel reproduces the reform run's estimates
    assert_eq!(
        fs::read(a.join("estimates.csv")).unwrap(),
        fs::read(tmp.path().join("reform_a/estimates.csv")).unwrap()
    );
}

fn hand_record(i: usize) -> WorkerRecord {
    WorkerRecord {
        worker_id: i as u64,
        country_id: 1,
        household_id: (i / 3) as u64,
        survey_wave: 0,
        event_month: -1,
        household_weight: 1.0,
        employed: 1,
        formal: 1,
        informal: 0,
        ltc_conditional: Some(0),
        tenure_months: 12,
        nonemp_spell_years: 0.0,
        monthly_wage: [1.0, 2.0, 4.0, 3.0, 6.0, 5.0][i],
        urban: 0,
        age: [0, 1, 2, 0, 1, 2][i],
        female: 0,
        education: 0,
        household_size: 3,
        married: 0,
    }
}

/// Wage on age with an intercept, two households of three: slope 1.25,
/// CR1 variance 0.078125 by hand.
#[test]
fn estimate_matches_a_hand_computed_panel() {
    let tmp = tempfile::tempdir().unwrap();
    let panel = SurveyPanel {
        meta: PanelMeta {
            seed: 0,
            scenario: "hand".into(),
            wave_months: vec![-1, 0],
        },
        records: (0..6).map(hand_record).collect(),
    };
    let mut buf = Vec::new();
    write_panel(&panel, &mut buf).unwrap();
    let path = tmp.path().join("panel.csv");
    fs::write(&path, &buf).unwrap();
    let cfg = write(
        tmp.path(),
        "e.toml",
        r#"
[estimation]
outcomes = [{ column = "monthly_wage", expect = "positive" }]
treatment = "age"
fixed_effects = []
covariates = []
event_study = false
"#,
    );
    let out = tmp.path().join("est");
    let o = segmkt(&["estimate", "--config", s(&cfg), "--panel", s(&path), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("estimates.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let row = rdr.deserialize::<std::collections::HashMap<String, String>>().next().unwrap().unwrap();
    assert_eq!(row["term"], "age");
    let coef: f64 = row["estimate"].parse().unwrap();
    let se: f64 = row["se"].parse().unwrap();
    assert!((coef - 1.25).abs() < 1e-12, "{coef}");
    assert!((se - 0.078125f64.sqrt()).abs() < 1e-12, "{se}");
}

#[test]
fn panel_without_weights_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let panel = SurveyPanel {
        meta: PanelMeta {
            seed: 0,
            scenario: "hand".into(),
            wave_months: vec![-1, 0],
        },
        records: (0..6).map(hand_record).collect(),
    };
    let mut buf = Vec::new();
    write_panel(&panel, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().unwrap().clone();
    let drop = header.iter().position(|h| h.starts_with("household_weight:")).unwrap();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header.iter().enumerate().filter(|(i, _)| *i != drop).map(|(_, h)| h)).unwrap();
    for r in rdr.records() {
        let r = r.unwrap();
        w.write_record(r.iter().enumerate().filter(|(i, _)| *i != drop).map(|(_, v)| v)).unwrap();
    }
    let path = tmp.path().join("panel.csv");
    fs::write(&path, w.into_inner().unwrap()).unwrap();
    let out = tmp.path().join("est");
    let o = segmkt(&["estimate", "--panel", s(&path), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("household_weight"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn single_point_sweep_is_not_testable() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.toml", "[model]\ngrid_size = 101\n[sweep]\nf_values = [1.0]\n");
    let out = tmp.path().join("sweep");
    let o = segmkt(&["sweep", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("predictions.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.contains(",not testable,")), "{text}");
}

#[test]
fn failed_run_keeps_the_previous_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.toml", SMALL);
    let out = tmp.path().join("run");
    assert!(segmkt(&["solve", "--config", s(&cfg), "--out", s(&out)]).status.success());
    let before = files(&out);
    let o = segmkt(&["estimate", "--panel", s(&tmp.path().join("missing.csv")), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(files(&out), before);
    let leftovers: Vec<_> = fs::read_dir(tmp.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().ends_with(".partial"))
        .collect();
    assert!(leftovers.is_empty());

    // a directory the tool did not create is never replaced
    let foreign = tmp.path().join("foreign");
    fs::create_dir(&foreign).unwrap();
    fs::write(foreign.join("keep.txt"), "x").unwrap();
    let o = segmkt(&["solve", "--config", s(&cfg), "--out", s(&foreign)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(foreign.join("keep.txt").exists());
}
