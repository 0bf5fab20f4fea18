use std::path::PathBuf;
use std::process::{Command, Output};

fn scot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scot"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
        .display()
        .to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn topology_info_reports_counts() {
    let o = scot(&["topology-info", "--preset", "fig10"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for line in [
        "brokers              70",
        "alinks               65",
        "ilinks               140",
        "tree_diameter        5",
    ] {
        assert!(text.contains(line), "missing {line:?} in\n{text}");
    }
}

#[test]
fn topology_info_reads_factor_files() {
    let dir = tempfile::tempdir().unwrap();
    let af = dir.path().join("af.txt");
    let cf = dir.path().join("cf.txt");
    std::fs::write(&af, "a b\nb c\n").unwrap();
    std::fs::write(&cf, "0 1\n1 2\n0 2\n").unwrap();
    let o = scot(&[
        "topology-info",
        "--af",
        af.to_str().unwrap(),
        "--cf",
        cf.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("brokers              9"));

    std::fs::write(&af, "a b\nb c\nc a\n").unwrap();
    let o = scot(&[
        "topology-info",
        "--af",
        af.to_str().unwrap(),
        "--cf",
        cf.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("acyclic"));
}

#[test]
fn run_writes_csv_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = scot(&[
        "run",
        "--config",
        &config("fig7a.toml"),
        "--out",
        out.to_str().unwrap(),
        "--trace",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["summary.csv", "deliveries.csv", "civ_n.csv", "trace.jsonl"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let civ = std::fs::read_to_string(out.join("civ_n.csv")).unwrap();
    assert!(civ.contains(",001,free_ilink"), "{civ}");
}

#[test]
fn seed_override_changes_the_workload() {
    let dir = tempfile::tempdir().unwrap();
    let fingerprint = |seed: &str| {
        let out = dir.path().join(seed);
        let o = scot(&[
            "run",
            "--config",
            &config("fig3_delivery.toml"),
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        std::fs::read_to_string(out.join("summary.csv"))
            .unwrap()
            .lines()
            .find(|l| l.starts_with("workload_fingerprint"))
            .unwrap()
            .to_string()
    };
    assert_ne!(fingerprint("1"), fingerprint("2"));
}

#[test]
fn compare_without_congestion_is_even() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp.csv");
    let o = scot(&[
        "compare",
        "--config",
        &config("fig3_delivery.toml"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rows = csv::Reader::from_path(&out).unwrap();
    let rows: Vec<csv::StringRecord> = rows.records().map(Result::unwrap).collect();
    let get = |m: &str| rows.iter().find(|r| &r[0] == m).unwrap().clone();
    let ims = get("ims_total");
    assert_eq!(&ims[1], &ims[2]);
    assert_eq!(&get("delivered_sets_equal")[1], "true");
    assert!(dir.path().join("snr/summary.csv").exists());
    assert!(dir.path().join("idr/summary.csv").exists());
}

#[test]
fn validate_reports_bad_fields() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(
        &path,
        "[topology]\npreset = \"fig3\"\n[params]\ntau = -1.0\n",
    )
    .unwrap();
    let o = scot(&["validate", "--config", path.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("params.tau must be > 0"));

    let o = scot(&["validate", "--config", &config("burst.toml")]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("ok: 70 brokers"));
}
