use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn muxrisk(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_muxrisk"))
        .env_remove("MUXRISK_OUT_DIR")
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) {
    let o = muxrisk(out, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

/// Exit code plus the single stderr line.
fn fails(out: &Path, args: &[&str]) -> (i32, String) {
    let o = muxrisk(out, args);
    let stderr = String::from_utf8(o.stderr).unwrap();
    let lines: Vec<&str> = stderr.lines().collect();
    assert_eq!(lines.len(), 1, "stderr should be one line: {stderr:?}");
    (o.status.code().unwrap(), lines[0].to_string())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// synth (planted product risk) + series with 12-month windows.
fn planted_series(out: &Path) -> (PathBuf, PathBuf) {
    ok(out, &["synth", "--config", s(&data("planted.json"))]);
    let loans = out.join("loans.csv");
    ok(out, &["series", "--input", s(&loans), "--window", "12"]);
    (loans, out.join("series.csv"))
}

#[test]
fn fig1_score_matches_dense_oracle() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "score",
            "--input",
            s(&data("fig1_loans.csv")),
            "--window",
            "1",
        ],
    );
    let files: Vec<_> = fs::read_dir(dir.path().join("scores")).unwrap().collect();
    assert_eq!(files.len(), 2, "one CSV and one JSON");

    let got: HashMap<(String, String), f64> =
        fs::read_to_string(dir.path().join("scores/window_0000.csv"))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                ((f[0].to_string(), f[2].to_string()), f[3].parse().unwrap())
            })
            .collect();
    let oracle = fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/fig1_oracle_scores.csv"),
    )
    .unwrap();
    let mut lines = oracle.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let mut compared = 0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        for (col, name) in header.iter().enumerate().skip(2) {
            let want: f64 = f[col].parse().unwrap();
            let have = got[&(f[0].to_string(), name.to_string())];
            assert!(
                (have - want).abs() < 1e-8,
                "{} {name}: {have} vs {want}",
                f[0]
            );
            compared += 1;
        }
    }
    assert_eq!(compared, 12 * 3);
    assert_eq!(got.len(), 12 * 3);
}

#[test]
fn cluster_with_one_cluster_puts_everything_in_zero() {
    let dir = tempfile::tempdir().unwrap();
    let (_, series) = planted_series(dir.path());
    ok(
        dir.path(),
        &[
            "cluster",
            "--series",
            s(&series),
            "--kind",
            "district",
            "--k",
            "1",
        ],
    );
    let text = fs::read_to_string(dir.path().join("clusters_district.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r.ends_with(",district,0")), "{text}");
    let inertia = fs::read_to_string(dir.path().join("inertia_district.csv")).unwrap();
    assert_eq!(inertia.lines().count(), 2);
}

#[test]
fn full_pipeline_compare_has_one_row_per_window() {
    let dir = tempfile::tempdir().unwrap();
    let (loans, series) = planted_series(dir.path());
    ok(
        dir.path(),
        &[
            "cluster",
            "--series",
            s(&series),
            "--k-range",
            "1..5",
            "--seed",
            "3",
        ],
    );
    ok(
        dir.path(),
        &[
            "compare",
            "--input",
            s(&loans),
            "--series",
            s(&series),
            "--window",
            "12",
            "--district",
            "D001",
            "--product",
            "P002",
        ],
    );
    let text = fs::read_to_string(dir.path().join("compare_D001_P002.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "window_index,score_district,score_product,score_sum,default_rate"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    // 72-month span, 12-month windows, step 1.
    assert_eq!(rows.len(), 72 - 12 + 1);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r.len(), 5);
        assert_eq!(r[0], i.to_string());
    }

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest_series.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(manifest["parameters"]["restart"], 0.85);
    assert_eq!(manifest["parameters"]["step_months"], 1);
    assert_eq!(manifest["windows"].as_array().unwrap().len(), rows.len());
    let elbow: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("manifest_cluster_product.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(
        fs::read_to_string(dir.path().join("inertia_product.csv"))
            .unwrap()
            .lines()
            .count(),
        6
    );
    assert!(elbow["chosen_k"].as_u64().unwrap() >= 2);
}

fn csv_files(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for entry in walk(root) {
        if entry.extension().is_some_and(|e| e == "csv") {
            let rel = entry
                .strip_prefix(root)
                .unwrap()
                .to_string_lossy()
                .into_owned();
            out.push((rel, fs::read(&entry).unwrap()));
        }
    }
    out.sort();
    out
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut paths = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            paths.extend(walk(&p));
        } else {
            paths.push(p);
        }
    }
    paths
}

#[test]
fn reruns_are_byte_identical() {
    let run = |out: &Path, jobs: &str| {
        let (loans, series) = planted_series(out);
        ok(
            out,
            &[
                "score",
                "--input",
                s(&loans),
                "--window",
                "24",
                "--step",
                "12",
                "--jobs",
                jobs,
            ],
        );
        ok(
            out,
            &["cluster", "--series", s(&series), "--k", "2", "--seed", "5"],
        );
        ok(
            out,
            &[
                "compare",
                "--input",
                s(&loans),
                "--series",
                s(&series),
                "--window",
                "12",
                "--district",
                "D003",
                "--product",
                "P001",
            ],
        );
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(a.path(), "1");
    run(b.path(), "1");
    let first = csv_files(a.path());
    assert!(
        first.len() >= 8,
        "{:?}",
        first.iter().map(|f| &f.0).collect::<Vec<_>>()
    );
    assert_eq!(first, csv_files(b.path()));

    // Window-level parallelism does not change any output.
    let c = tempfile::tempdir().unwrap();
    run(c.path(), "4");
    assert_eq!(first, csv_files(c.path()));

    // Same output directory: manifests are reproduced too.
    let manifest = fs::read(a.path().join("manifest_score.json")).unwrap();
    run(a.path(), "1");
    assert_eq!(
        manifest,
        fs::read(a.path().join("manifest_score.json")).unwrap()
    );
}

#[test]
fn error_exit_codes_and_format() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let fig1 = data("fig1_loans.csv");

    let (code, line) = fails(out, &["score", "--input", s(&out.join("missing.csv"))]);
    assert_eq!(code, 4);
    assert!(
        line.starts_with("error code=4 kind=io message=\""),
        "{line}"
    );

    let bad = out.join("bad.csv");
    fs::write(
        &bad,
        "loan_id,grant_month,district,product,defaulted\nL1,2000-13,A,red,0\n",
    )
    .unwrap();
    let (code, line) = fails(out, &["series", "--input", s(&bad), "--window", "1"]);
    assert_eq!(code, 2, "{line}");
    assert!(line.starts_with("error code=2 kind=validation"));

    // Fixture spans one month; default 60-month windows cannot fit.
    let (code, _) = fails(out, &["score", "--input", s(&fig1)]);
    assert_eq!(code, 2);

    let (code, line) = fails(
        out,
        &[
            "score",
            "--input",
            s(&fig1),
            "--window",
            "1",
            "--max-iter",
            "2",
        ],
    );
    assert_eq!(code, 3, "{line}");
    assert!(line.contains("kind=convergence"));

    let (code, _) = fails(
        out,
        &[
            "score",
            "--input",
            s(&fig1),
            "--window",
            "1",
            "--restart",
            "1",
        ],
    );
    assert_eq!(code, 2);
    let (code, _) = fails(out, &["cluster", "--series", s(&fig1)]);
    assert_eq!(code, 2);
    let (code, _) = fails(out, &["frobnicate"]);
    assert_eq!(code, 2);

    // None of the failures left outputs or staging directories behind.
    let leftovers: Vec<_> = fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n != "bad.csv")
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}

#[test]
fn failed_run_keeps_previous_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let fig1 = data("fig1_loans.csv");
    ok(
        dir.path(),
        &["series", "--input", s(&fig1), "--window", "1"],
    );
    let before = fs::read(dir.path().join("series.csv")).unwrap();
    let (code, _) = fails(
        dir.path(),
        &[
            "series",
            "--input",
            s(&fig1),
            "--window",
            "1",
            "--max-iter",
            "1",
        ],
    );
    assert_eq!(code, 3);
    assert_eq!(before, fs::read(dir.path().join("series.csv")).unwrap());
}

#[test]
fn compare_rejects_mismatched_windows() {
    let dir = tempfile::tempdir().unwrap();
    let (loans, series) = planted_series(dir.path());
    let (code, line) = fails(
        dir.path(),
        &[
            "compare",
            "--input",
            s(&loans),
            "--series",
            s(&series),
            "--window",
            "24",
            "--district",
            "D001",
            "--product",
            "P002",
        ],
    );
    assert_eq!(code, 2, "{line}");
    let (code, _) = fails(
        dir.path(),
        &[
            "compare",
            "--input",
            s(&loans),
            "--series",
            s(&series),
            "--window",
            "12",
            "--district",
            "D001",
            "--product",
            "nope",
        ],
    );
    assert_eq!(code, 2);
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_muxrisk"))
        .env("MUXRISK_OUT_DIR", &target)
        .args([
            "synth",
            "--n-loans",
            "50",
            "--span-months",
            "3",
            "--seed",
            "1",
        ])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(target.join("loans.csv")).unwrap();
    assert_eq!(text.lines().count(), 51);
}

#[test]
fn synth_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "synth",
            "--config",
            s(&data("planted.json")),
            "--n-loans",
            "120",
        ],
    );
    let text = fs::read_to_string(dir.path().join("loans.csv")).unwrap();
    assert_eq!(text.lines().count(), 121);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest_synth.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["synth_config"]["n_loans"], 120);
    assert_eq!(manifest["synth_config"]["seed"], 7);
    assert_eq!(
        manifest["synth_config"]["risky_segments"][0]["product"],
        "P002"
    );
}
