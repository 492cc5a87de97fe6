//! Campaign-level acceptance: byte-identical reruns under a fixed seed, the
//! exit-status contract, and summary aggregation.

use std::path::Path;
use std::process::Command;

fn qv() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qv"))
}

fn write_small_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("campaign.toml");
    std::fs::write(
        &path,
        r#"
seed = 11
out = "unused"

[metric_bench]
pairs = 60
q_max = 4
dims = [1, 2]
triples = 800

[embed_verify]
q = 2
n = 1
lip_samples = 1500
decode_samples = 300
face_samples = 1500
"#,
    )
    .unwrap();
    path
}

fn read_outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| {
            let name = e.file_name().to_string_lossy().to_string();
            name.ends_with(".csv") || name.ends_with(".txt")
        })
        .map(|e| {
            let name = e.file_name().to_string_lossy().to_string();
            let bytes = std::fs::read(e.path()).unwrap();
            // Wall-clock measurements are the one excluded quantity.
            let filtered = if name.ends_with(".txt") {
                String::from_utf8(bytes)
                    .unwrap()
                    .lines()
                    .filter(|l| !l.contains("seconds="))
                    .collect::<Vec<_>>()
                    .join("\n")
                    .into_bytes()
            } else {
                bytes
            };
            (name, filtered)
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

#[test]
fn criterion_13_campaigns_are_byte_identical() {
    let base = tempfile::tempdir().unwrap();
    let config = write_small_config(base.path());
    let (dir_a, dir_b) = (base.path().join("a"), base.path().join("b"));
    for dir in [&dir_a, &dir_b] {
        let status = qv()
            .args(["--config"])
            .arg(&config)
            .args(["--out"])
            .arg(dir)
            .args(["run", "--suite", "metric-bench,embed-verify"])
            .status()
            .unwrap();
        assert!(status.success(), "campaign failed");
    }
    let (a, b) = (read_outputs(&dir_a), read_outputs(&dir_b));
    assert!(!a.is_empty(), "no reports written");
    assert_eq!(a.len(), b.len());
    for ((name_a, bytes_a), (name_b, bytes_b)) in a.iter().zip(&b) {
        assert_eq!(name_a, name_b);
        assert_eq!(bytes_a, bytes_b, "{name_a} differs between identical runs");
    }
    println!("PASS criterion 13: {} report files byte-identical across reruns", a.len());

    // A seed override is accepted and produces a valid campaign.
    let dir_c = base.path().join("c");
    let status = qv()
        .args(["--config"])
        .arg(&config)
        .args(["--seed", "12", "--out"])
        .arg(&dir_c)
        .args(["run", "--suite", "metric-bench"])
        .status()
        .unwrap();
    assert!(status.success());
    let summary = std::fs::read_to_string(dir_c.join("summary_metric-bench.txt")).unwrap();
    assert!(summary.contains("seed: 12"));
    assert!(summary.contains("result: PASS"));
}

#[test]
fn exit_status_contract() {
    let base = tempfile::tempdir().unwrap();

    // Missing config file: usage error.
    let status = qv()
        .args(["--config", "/nonexistent/config.toml", "metric-bench"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // Malformed config: usage error.
    let bad = base.path().join("bad.toml");
    std::fs::write(&bad, "seed = \"not a number\"").unwrap();
    let status = qv().args(["--config"]).arg(&bad).arg("metric-bench").status().unwrap();
    assert_eq!(status.code(), Some(2));

    // A failing assertion exits 1 and still writes the partial report: an
    // impossibly small frozen constant makes rho-star-verify fail.
    let failing = base.path().join("failing.toml");
    std::fs::write(
        &failing,
        r#"
seed = 11

[rho_star_verify]
mus = [0.2, 0.1]
fields = 3
mesh = 8
energy_c = 1e-9
tube_samples = 100
"#,
    )
    .unwrap();
    let out = base.path().join("failing_out");
    let status = qv()
        .args(["--config"])
        .arg(&failing)
        .args(["--out"])
        .arg(&out)
        .arg("rho-star-verify")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1), "failed assertions must exit 1");
    let summary = std::fs::read_to_string(out.join("summary_rho-star-verify.txt")).unwrap();
    assert!(summary.contains("FAIL energy-inequality-frozen-c"));
    assert!(summary.lines().any(|l| l.starts_with("PASS")), "partial results still reported");
}

#[test]
fn report_aggregates_summaries() {
    let base = tempfile::tempdir().unwrap();
    let config = write_small_config(base.path());
    let out = base.path().join("out");
    let status = qv()
        .args(["--config"])
        .arg(&config)
        .args(["--out"])
        .arg(&out)
        .args(["run", "--suite", "metric-bench"])
        .status()
        .unwrap();
    assert!(status.success());
    let status = qv().args(["--out"]).arg(&out).arg("report").status().unwrap();
    assert!(status.success());
    let agg = std::fs::read_to_string(out.join("aggregate.txt")).unwrap();
    assert!(agg.contains("metric-bench"));
    assert!(agg.contains("overall: PASS"));
}
