//! Integration tests of the command-line binary: pipeline wiring, report
//! determinism, and exit codes.

use std::path::Path;
use std::process::Command;

fn fourfit() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fourfit"))
}

#[test]
fn smooth_pipeline_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("s1.table.json");
    let run_gen = fourfit()
        .args(["gen", "--preset", "smooth1d-paper", "--output"])
        .arg(&table)
        .output()
        .unwrap();
    assert!(run_gen.status.success(), "{}", String::from_utf8_lossy(&run_gen.stderr));
    assert!(table.exists());

    let fit = |prefix: &Path| {
        let out = fourfit()
            .args(["fit", "--preset", "smooth1d-paper", "--input"])
            .arg(&table)
            .arg("--output")
            .arg(prefix)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    let p1 = dir.path().join("a");
    let p2 = dir.path().join("a"); // same prefix: identical config
    fit(&p1);
    let first = std::fs::read(dir.path().join("a.report.json")).unwrap();
    fit(&p2);
    let second = std::fs::read(dir.path().join("a.report.json")).unwrap();
    assert_eq!(first, second, "report JSON must be byte-identical across reruns");

    for suffix in ["a.model.json", "a.report.json", "a.decay.csv", "a.errors.csv"] {
        assert!(dir.path().join(suffix).exists(), "missing {suffix}");
    }

    // The decay CSV has one row per fit coefficient plus a header.
    let decay = std::fs::read_to_string(dir.path().join("a.decay.csv")).unwrap();
    assert_eq!(decay.lines().count(), 1 + 20);
    assert!(decay.starts_with("n1,log10_data,log10_residual"));

    let report = fourfit()
        .args(["report", "--input"])
        .arg(dir.path().join("a.report.json"))
        .output()
        .unwrap();
    assert!(report.status.success());
    let text = String::from_utf8_lossy(&report.stdout);
    assert!(text.contains("reduction"), "{text}");
    assert!(text.contains("smooth1d-paper"), "config must be embedded: {text}");
}

#[test]
fn piecewise_1d_pipeline_via_binary() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("pw.table.json");
    // A scaled-down piecewise run: 200 coefficients, detection on 100 terms.
    let gen = fourfit()
        .args(["gen", "--function", "pw1d", "--m", "200", "--resolution", "2048", "--output"])
        .arg(&table)
        .output()
        .unwrap();
    assert!(gen.status.success(), "{}", String::from_utf8_lossy(&gen.stderr));

    let seed = dir.path().join("pw.seed.json");
    let detect = fourfit()
        .args(["detect", "--terms", "100", "--grid", "10000", "--input"])
        .arg(&table)
        .arg("--output")
        .arg(&seed)
        .output()
        .unwrap();
    assert!(detect.status.success(), "{}", String::from_utf8_lossy(&detect.stderr));
    let seed_text = std::fs::read_to_string(&seed).unwrap();
    assert!(seed_text.contains("\"kind\": \"jump\""), "{seed_text}");

    let fit = fourfit()
        .args(["fit", "--k", "6", "--inv-d", "5", "--function", "pw1d", "--error-grid", "200"])
        .args(["--exclusion", "0.02", "--input"])
        .arg(&table)
        .arg("--seed-file")
        .arg(&seed)
        .arg("--output")
        .arg(dir.path().join("pw"))
        .output()
        .unwrap();
    assert!(fit.status.success(), "{}", String::from_utf8_lossy(&fit.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("pw.report.json")).unwrap())
            .unwrap();
    let s = report["report"]["s"].as_f64().expect("cut point recorded");
    assert!((s - 0.5).abs() <= 1e-4, "refined cut {s}");
    assert_eq!(report["inputs"].as_array().unwrap().len(), 2);
    // The errors CSV marks the excluded strip around the cut.
    let errors = std::fs::read_to_string(dir.path().join("pw.errors.csv")).unwrap();
    assert!(errors.lines().skip(1).any(|l| l.ends_with(",1")));
}

#[test]
fn smooth_table_detects_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("s.table.json");
    let gen = fourfit()
        .args(["gen", "--function", "smooth1d", "--m", "60", "--resolution", "512", "--output"])
        .arg(&table)
        .output()
        .unwrap();
    assert!(gen.status.success());
    let seed = dir.path().join("s.seed.json");
    let detect = fourfit()
        .args(["detect", "--terms", "60", "--grid", "6000", "--input"])
        .arg(&table)
        .arg("--output")
        .arg(&seed)
        .output()
        .unwrap();
    assert!(detect.status.success());
    let text = std::fs::read_to_string(&seed).unwrap();
    assert!(text.contains("\"kind\": \"none\""), "{text}");
    let stdout = String::from_utf8_lossy(&detect.stdout);
    assert!(stdout.contains("no interior singularity"), "{stdout}");
}

#[test]
fn validation_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    // Unknown function id.
    let out = fourfit()
        .args(["gen", "--function", "nope", "--m", "5", "--output"])
        .arg(dir.path().join("x.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    // Unknown preset.
    let out = fourfit()
        .args(["gen", "--preset", "nope", "--output"])
        .arg(dir.path().join("x.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Malformed report file.
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{not json").unwrap();
    let out = fourfit().args(["report", "--input"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Missing input table.
    let out = fourfit()
        .args(["fit", "--k", "4", "--inv-d", "4", "--input"])
        .arg(dir.path().join("missing.json"))
        .arg("--output")
        .arg(dir.path().join("y"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
