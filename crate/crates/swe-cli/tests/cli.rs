//! End-to-end tests of the `swe` binary: exit codes, output files, fault
//! injection canaries, and output reproducibility.

use std::path::Path;
use std::process::{Command, Output};

fn swe(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swe"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn validate_passes_on_a_fresh_build() {
    let dir = tempfile::tempdir().unwrap();
    let out = swe(&["validate"], dir.path());
    let text = stdout(&out);
    assert!(out.status.success(), "validate failed:\n{text}");
    for check in [
        "lake-at-rest",
        "radial-symmetry",
        "decomposition-equivalence",
        "dambreak-convergence",
    ] {
        assert!(text.contains(&format!("PASS {check}")), "missing {check}:\n{text}");
    }
}

#[test]
fn beta_sign_canary_fails_lake_at_rest() {
    let dir = tempfile::tempdir().unwrap();
    let out = swe(&["validate", "--inject", "beta-sign-flip"], dir.path());
    let text = stdout(&out);
    assert!(!out.status.success(), "injected defect went undetected:\n{text}");
    assert!(text.contains("FAIL lake-at-rest"), "wrong check tripped:\n{text}");
}

#[test]
fn scramble_canary_fails_decomposition_equivalence() {
    let dir = tempfile::tempdir().unwrap();
    let out = swe(&["validate", "--inject", "scramble-sweep-order"], dir.path());
    let text = stdout(&out);
    assert!(!out.status.success(), "injected defect went undetected:\n{text}");
    assert!(
        text.contains("FAIL decomposition-equivalence"),
        "wrong check tripped:\n{text}"
    );
}

#[test]
fn run_writes_summary_and_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("scenario.conf");
    std::fs::write(
        &config,
        "[scenario]\nkind = circular-dam-break\nn_side = 32\nt_end = 0.5\n",
    )
    .unwrap();
    let out = swe(
        &["run", "--config", "scenario.conf", "--out", "results", "--px", "2"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("results/run_summary.json")).unwrap())
            .unwrap();
    assert!(summary["steps"].as_u64().unwrap() >= 1);
    assert!((summary["t_final"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert_eq!(summary["kernels"].as_array().unwrap().len(), 5);
    assert!(dir.path().join("results/final.bin").exists());
}

#[test]
fn run_refuses_oversized_grids() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("huge.conf");
    std::fs::write(&config, "n_side = 36000\nt_end = 1.0\n").unwrap();
    let out = swe(&["run", "--config", "huge.conf"], dir.path());
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("refusing to launch"), "unexpected error: {err}");
}

#[test]
fn scaling_csv_schema_and_baseline_row() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.conf");
    std::fs::write(&config, "n_side = 32\nt_end = 1e9\n").unwrap();
    let out = swe(
        &[
            "scale-strong",
            "--config",
            "small.conf",
            "--workers",
            "1",
            "--reps",
            "1",
            "--max-steps",
            "5",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/strong_scaling.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "workers,time_s,speedup,efficiency");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "1");
    assert_eq!(row[2], "1"); // single-row baseline: s = 1
    assert_eq!(row[3], "1");
}

#[test]
fn weak_scaling_uses_rounded_sides() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("w.conf");
    std::fs::write(&config, "t_end = 1e9\n").unwrap();
    let out = swe(
        &[
            "scale-weak",
            "--config",
            "w.conf",
            "--workers",
            "1,2",
            "--reps",
            "1",
            "--cells-per-worker",
            "4096",
            "--max-steps",
            "3",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8_lossy(&out.stderr);
    // 1*4096 -> 64, 2*4096 = 8192 -> ceil(90.51) = 91.
    assert!(err.contains("n_side=64"), "{err}");
    assert!(err.contains("n_side=91"), "{err}");
    assert!(dir.path().join("out/weak_scaling.csv").exists());
}

#[test]
fn roofline_and_ppreport_round_trip_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.conf"), "n_side = 48\nt_end = 1e9\n").unwrap();
    std::fs::write(
        dir.path().join("peaks.csv"),
        "platform,p_peak_gflops,b_peak_gbs\nreference,9494.71,1258.40\n",
    )
    .unwrap();
    let out = swe(
        &[
            "roofline",
            "--config",
            "small.conf",
            "--peaks",
            "peaks.csv",
            "--max-steps",
            "5",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let roofline = std::fs::read_to_string(dir.path().join("out/roofline.csv")).unwrap();
    assert!(roofline.starts_with("kernel,p_achieved,a_achieved,p_norm,a_norm"));
    assert_eq!(roofline.lines().count(), 6);

    // The pp report is a pure function of its input files: two invocations
    // must produce byte-identical outputs.
    let mut reports = Vec::new();
    for sub in ["a", "b"] {
        let out = swe(
            &[
                "ppreport",
                "--observations",
                "out/observations.csv",
                "--peaks",
                "peaks.csv",
                "--out",
                sub,
            ],
            dir.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        reports.push((
            std::fs::read(dir.path().join(sub).join("pp_report.csv")).unwrap(),
            std::fs::read(dir.path().join(sub).join("pp_report.json")).unwrap(),
        ));
    }
    assert_eq!(reports[0], reports[1]);
    let report = String::from_utf8(reports[0].0.clone()).unwrap();
    assert!(report.starts_with("kernel,pp1,pp2,r(reference)"));
    // Single platform set: PP1 = PP2 = r on every row.
    for line in report.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[1], cols[2]);
        assert_eq!(cols[1], cols[3]);
    }
}

#[test]
fn peaks_probe_writes_positive_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = swe(&["peaks", "--reps", "1", "--platform", "ci"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/peaks.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "ci");
    assert!(row[1].parse::<f64>().unwrap() > 0.0);
    assert!(row[2].parse::<f64>().unwrap() > 0.0);
}

#[test]
fn bad_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.conf"), "n_side = not-a-number\n").unwrap();
    let out = swe(&["run", "--config", "bad.conf"], dir.path());
    assert!(!out.status.success());
}
