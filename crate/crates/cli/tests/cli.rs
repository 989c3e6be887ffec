use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use toeplitz_lab_cli::tower_doc::TowerDoc;

fn samples() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../samples")
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toeplitz-lab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn sample(name: &str) -> String {
    samples().join(name).to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn dyadic_config(dir: &Path, depth: usize, kappa: &str) -> String {
    write_config(
        dir,
        &format!(r#"{{"schema_version": 1, "chain": {{"builtin": "dyadic", "depth": {depth}}}, "k": 2, "kappa": "{kappa}"}}"#),
    )
}

#[test]
fn chain_validate_samples() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["chain-validate", "--config", &sample("z2n-kappa-half.json")], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(json(tmp.path().join("chain_report.json"))["pass"], true);

    let o = run(&["chain-validate", "--config", &sample("f2-torus.json")], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let doc = json(tmp.path().join("chain_report.json"));
    assert_eq!(doc["indices"], serde_json::json!([4, 16]));
    assert_eq!(doc["domains"][1]["size"], 16);
}

#[test]
fn malformed_permutation_names_level_and_index() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"schema_version": 1, "chain": {"group": {"kind": "free", "generators": ["a"]},
            "levels": [{"generators": [[1, 0]]}, {"generators": [[1, 2, 2, 0]]}],
            "refinements": [[0, 1, 0, 1]]}}"#,
    );
    let o = run(&["chain-validate", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("level 2") && err.contains("index 2") && err.contains("`a`"), "{err}");
}

#[test]
fn invalid_chain_fails_validation() {
    let tmp = tempfile::tempdir().unwrap();
    // Level 2 does not refine level 1: the map is not equivariant.
    let cfg = write_config(
        tmp.path(),
        r#"{"schema_version": 1, "chain": {"group": {"kind": "free", "generators": ["a"]},
            "levels": [{"generators": [[1, 0]]}, {"generators": [[1, 2, 3, 0]]}],
            "refinements": [[0, 0, 1, 1]]}}"#,
    );
    let o = run(&["chain-validate", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json(tmp.path().join("chain_report.json"))["pass"], false);
}

#[test]
fn parse_errors_report_position() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "{\n  \"schema_version\": 1,\n  \"chain\": {\"builtin\": \"dyadic\" \"depth\": 3}\n}");
    let o = run(&["chain-validate", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3 column"), "{}", stderr(&o));
}

#[test]
fn kappa_one_and_decimals_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["toeplitz-build", "--config", &dyadic_config(tmp.path(), 4, "1")], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("θ < 1"), "{}", stderr(&o));
    let o = run(&["toeplitz-build", "--config", &dyadic_config(tmp.path(), 4, "0.5")], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn tower_round_trip_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["toeplitz-build", "--config", &dyadic_config(tmp.path(), 10, "1/2")], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(tmp.path().join("tower.json")).unwrap();
    let tower = TowerDoc::parse(&text).unwrap().to_tower().unwrap();
    assert_eq!(TowerDoc::from_tower(&tower).unwrap().to_json(), text);
    let log = std::fs::read_to_string(tmp.path().join("construction_log.txt")).unwrap();
    assert!(log.contains("stage 1: beta 1, m 1"), "{log}");
    assert!(log.contains("marker 11:"), "{log}");
}

#[test]
fn kappa_half_entropy_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = dyadic_config(tmp.path(), 10, "1/2");
    assert!(run(&["toeplitz-build", "--config", &cfg], tmp.path()).status.success());
    let tower = tmp.path().join("tower.json").to_string_lossy().into_owned();
    let o = run(&["entropy-report", "--config", &cfg, "--tower", &tower], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let doc = json(tmp.path().join("entropy_report.json"));
    assert_eq!(doc["all_pass"], true);
    let rows = doc["rows"].as_array().unwrap();
    let marker_rows: Vec<&Value> = rows.iter().filter(|r| !r["lower_log"].is_null()).collect();
    assert!(!marker_rows.is_empty());
    for r in marker_rows {
        assert_eq!(r["lower_log"], r["product_bound"]);
        assert_eq!(r["lower_verified"], true);
    }
    for s in doc["summary"].as_array().unwrap() {
        assert_eq!(s["monotone"], true);
    }
    let csv = std::fs::read_to_string(tmp.path().join("entropy_report.csv")).unwrap();
    assert_eq!(csv.lines().count(), rows.len() + 1);
}

#[test]
fn kappa_zero_keeps_one_hole() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = dyadic_config(tmp.path(), 8, "0");
    assert!(run(&["toeplitz-build", "--config", &cfg], tmp.path()).status.success());
    let doc = json(tmp.path().join("tower.json"));
    for l in doc["levels"].as_array().unwrap() {
        assert_eq!(l["colors"].as_str().unwrap().matches('*').count(), 1);
    }
    let tower = tmp.path().join("tower.json").to_string_lossy().into_owned();
    let o = run(&["entropy-report", "--config", &cfg, "--tower", &tower], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let doc = json(tmp.path().join("entropy_report.json"));
    for r in doc["rows"].as_array().unwrap() {
        let idx = r["index"].as_f64().unwrap();
        let density = r["hole_density_bound"].as_f64().unwrap();
        assert_eq!(density, 1.0 / idx * 2f64.ln());
    }
}

#[test]
fn tampered_tower_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = dyadic_config(tmp.path(), 8, "1/2");
    assert!(run(&["toeplitz-build", "--config", &cfg], tmp.path()).status.success());
    let path = tmp.path().join("tower.json");
    let mut doc = TowerDoc::parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
    // Flip a color inherited from the level above; on dyadic levels residue
    // `c` refines residue `c`.
    let (i, c) = doc
        .levels
        .iter()
        .enumerate()
        .find_map(|(i, l)| l.colors.find(|ch| ch != '*').map(|c| (i, c)))
        .expect("some level has a colored coset");
    let mut chars: Vec<char> = doc.levels[i + 1].colors.chars().collect();
    chars[c] = if chars[c] == '0' { '1' } else { '0' };
    doc.levels[i + 1].colors = chars.into_iter().collect();
    let tampered = tmp.path().join("tampered.json");
    std::fs::write(&tampered, doc.to_json()).unwrap();
    let o = run(&["entropy-report", "--config", &cfg, "--tower", &tampered.to_string_lossy()], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("changes a color inherited"), "{}", stderr(&o));
}

#[test]
fn tower_chain_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = dyadic_config(tmp.path(), 6, "1/2");
    assert!(run(&["toeplitz-build", "--config", &cfg], tmp.path()).status.success());
    let tower = tmp.path().join("tower.json").to_string_lossy().into_owned();
    let other = write_config(tmp.path(), r#"{"schema_version": 1, "chain": {"builtin": "cyclic", "moduli": [3, 9]}, "k": 2}"#);
    let o = run(&["entropy-report", "--config", &other, "--tower", &tower], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sofic_report_on_cyclic_levels() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"schema_version": 1, "chain": {"builtin": "dyadic", "depth": 3}, "probe": {"f": ["e", "a", "a^2", "a^3"]}}"#,
    );
    let o = run(&["sofic-report", "--config", &cfg], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let doc = json(tmp.path().join("sofic_report.json"));
    for l in doc["levels"].as_array().unwrap() {
        assert_eq!(l["orbits"], 1);
        assert_eq!(l["min_s1"].as_f64(), Some(1.0));
    }
    let z8 = &doc["levels"][2];
    let pair = z8["pairs"].as_array().unwrap().iter().find(|p| p["s"] == "a" && p["t"] == "a^3").unwrap();
    assert_eq!(pair["s2_fraction"].as_f64(), Some(1.0));
    // On Z/2, a and a^3 agree: S2 = 0.
    let z2 = &doc["levels"][0];
    let pair = z2["pairs"].as_array().unwrap().iter().find(|p| p["s"] == "a" && p["t"] == "a^3").unwrap();
    assert_eq!(pair["s2_fraction"].as_f64(), Some(0.0));
}

#[test]
fn microstates_sample_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["microstates", "--config", &sample("z4-alternating.json")], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let doc = json(tmp.path().join("microstates.json"));
    let rows = doc["rows"].as_array().unwrap();
    let at = |d: f64| rows.iter().find(|r| r["delta"].as_f64() == Some(d)).unwrap();
    assert_eq!(at(0.0)["count"], 2);
    assert_eq!(at(0.0)["n_eps"], 2);
    assert_eq!(at(1.0)["count"], 16);
}

#[test]
fn microstate_budget_exceeded() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"schema_version": 1, "chain": {"builtin": "dyadic", "depth": 6}, "k": 2,
            "subshift": {"quotient_level": 1, "seeds": [[0, 1]], "levels": [6]}}"#,
    );
    let o = run(&["microstates", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("smaller level"), "{}", stderr(&o));
}

#[test]
fn outputs_are_deterministic_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = dyadic_config(tmp.path(), 10, "2/3");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (dir, workers) in [(&a, "1"), (&b, "4")] {
        for cmd in ["toeplitz-build", "sofic-report"] {
            assert!(run(&[cmd, "--config", &cfg, "--workers", workers], dir).status.success());
        }
        let tower = dir.join("tower.json").to_string_lossy().into_owned();
        assert!(run(&["entropy-report", "--config", &cfg, "--tower", &tower, "--workers", workers], dir).status.success());
    }
    for f in [
        "tower.json",
        "construction_log.txt",
        "sofic_report.json",
        "sofic_report.csv",
        "entropy_report.json",
        "entropy_report.csv",
    ] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let m = json(a.join("manifest.toeplitz-build.json"));
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(m["artifacts"][0], "tower.json");
}

#[test]
fn depth_flag_truncates_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["chain-validate", "--config", &sample("z2n-kappa-half.json"), "--depth", "3"], tmp.path());
    assert!(o.status.success());
    assert_eq!(json(tmp.path().join("chain_report.json"))["indices"], serde_json::json!([2, 4, 8]));
}
