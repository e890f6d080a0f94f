//! End-to-end checks of the `agglo` binary: exit codes, file outputs,
//! and agreement between the one-shot subcommands and the grid report.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn agglo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agglo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

/// Value of a `key=value` line printed by an analysis subcommand.
fn kv(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no {key}= line in {text:?}"))
        .to_string()
}

#[test]
fn help_lists_every_subcommand() {
    let out = agglo(&["--help"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for name in [
        "generate",
        "rasterize",
        "euler",
        "thicken-trace",
        "cade",
        "calibrate",
        "delta",
        "clark-evans",
        "euler-curve",
        "experiment",
    ] {
        assert!(text.contains(name), "--help does not mention {name}");
    }
    for flag in ["--seed", "--out", "--workers", "--schedule", "--connectivity"] {
        assert!(text.contains(flag), "--help does not mention {flag}");
    }
    assert!(agglo(&["--version"]).status.success());
    assert!(agglo(&["analyze", "--help"]).status.success());
}

#[test]
fn exit_codes_distinguish_usage_from_runtime_failures() {
    // Unknown flag: rejected by the parser.
    assert_eq!(agglo(&["generate", "--p", "0.1", "--bogus"]).status.code(), Some(1));
    // Out-of-range parameter: rejected by validation.
    assert_eq!(agglo(&["generate", "--p", "0.9"]).status.code(), Some(1));
    // Missing input file: a runtime failure.
    assert_eq!(
        agglo(&["euler", "--image", "/nonexistent/picture.pbm"]).status.code(),
        Some(2)
    );
    // Experiment without a report directory.
    assert_eq!(agglo(&["experiment", "--seeds", "1,2"]).status.code(), Some(1));
}

#[test]
fn thicken_trace_dumps_steps_and_grows_like_a_disk() {
    let dir = tempfile::tempdir().unwrap();
    let image = dir.path().join("dot.pbm");
    let mut rows = String::from("P1\n31 31\n");
    for y in 0..31 {
        for x in 0..31 {
            rows.push(if (x, y) == (15, 15) { '1' } else { '0' });
            rows.push(' ');
        }
        rows.push('\n');
    }
    fs::write(&image, rows).unwrap();

    let trace = dir.path().join("trace.csv");
    let steps = dir.path().join("steps");
    let out = agglo(&[
        "thicken-trace",
        "--image",
        image.to_str().unwrap(),
        "--rho",
        "10",
        "--out",
        trace.to_str().unwrap(),
        "--dump-steps",
        steps.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");

    let text = fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("step,chi,area"));
    let areas: Vec<u64> = lines
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(areas.len(), 11);
    assert_eq!(areas[..10], [1, 9, 21, 37, 69, 97, 129, 185, 229, 277]);

    for step in 0..=10 {
        let pic = steps.join(format!("step_{step:02}.pbm"));
        assert!(pic.is_file(), "missing {}", pic.display());
    }
}

fn read_report(dir: &Path) -> Vec<(String, String)> {
    let mut files: Vec<(String, String)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_str().unwrap().to_string(),
                fs::read_to_string(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn experiment_report_is_reproducible_and_consistent_with_one_shot_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let grid = |out: &Path| {
        agglo(&[
            "experiment",
            "--p",
            "0.15",
            "--gammas",
            "0,0.8",
            "--seeds",
            "1,2",
            "--rho",
            "4",
            "--box",
            "160",
            "--out",
            out.to_str().unwrap(),
        ])
    };

    let run1 = dir.path().join("run1");
    let run2 = dir.path().join("run2");
    assert!(grid(&run1).status.success());
    assert!(grid(&run2).status.success());

    // Same spec, same bytes. The manifest timestamps may differ, so only
    // the CSVs are compared.
    let report1 = read_report(&run1);
    let report2 = read_report(&run2);
    assert_eq!(report1.len(), 7);
    assert_eq!(report1, report2);

    // The standalone pipeline lands on the grid's own numbers: generate
    // and rasterize the (gamma=0.8, seed=2) picture, then analyze it
    // against the run's calibration table.
    let config = dir.path().join("c.txt");
    let image = dir.path().join("c.pbm");
    assert!(agglo(&[
        "generate", "--p", "0.15", "--gamma", "0.8", "--rho", "4", "--box", "160", "--seed", "2",
        "--out",
        config.to_str().unwrap(),
    ])
    .status
    .success());
    assert!(agglo(&[
        "rasterize",
        "--config",
        config.to_str().unwrap(),
        "--out",
        image.to_str().unwrap(),
    ])
    .status
    .success());
    let calibration = run1.join("calibration.csv");
    let out = agglo(&[
        "delta",
        "--image",
        image.to_str().unwrap(),
        "--rho",
        "4",
        "--calibration",
        calibration.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let text = stdout(&out);

    let results = fs::read_to_string(run1.join("results.csv")).unwrap();
    let row: Vec<&str> = results
        .lines()
        .find(|l| l.starts_with("0.15,0.8,2,"))
        .expect("grid row for seed 2")
        .split(',')
        .collect();
    assert_eq!(kv(&text, "cade"), row[3]);
    assert_eq!(kv(&text, "delta"), row[5]);
    assert_eq!(
        kv(&text, "p").parse::<f64>().unwrap(),
        row[8].parse::<f64>().unwrap()
    );
}

#[test]
fn euler_agrees_between_image_and_curve_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.txt");
    let image = dir.path().join("c.pbm");
    assert!(agglo(&[
        "generate", "--p", "0.1", "--rho", "5", "--box", "200", "--seed", "7", "--out",
        config.to_str().unwrap(),
    ])
    .status
    .success());
    assert!(agglo(&[
        "rasterize",
        "--config",
        config.to_str().unwrap(),
        "--out",
        image.to_str().unwrap(),
    ])
    .status
    .success());

    let chi = kv(&stdout(&agglo(&["euler", "--image", image.to_str().unwrap()])), "chi");

    // The curve row at the stored radius redraws the same picture.
    let curve = stdout(&agglo(&["euler-curve", "--config", config.to_str().unwrap()]));
    let row = curve
        .lines()
        .find(|l| l.starts_with("5,"))
        .expect("row at the stored radius");
    assert_eq!(row.split(',').nth(1).unwrap(), chi);

    let ce = kv(&stdout(&agglo(&["clark-evans", "--config", config.to_str().unwrap()])), "ce");
    let ce: f64 = ce.parse().unwrap();
    // A dispersed pattern sits near 1, never in deep clustering range.
    assert!(ce > 0.8 && ce < 1.3, "ce={ce}");
}
