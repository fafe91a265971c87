//! Integration tests of the `screenaudit` binary: exit codes, emitted
//! files, and dataset round trips through the CLI surface.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use screenaudit::config::PipelineConfig;
use screenaudit::dataset::{self, SchemaMapping};
use screenaudit::sim;
use screenaudit::synth::{PlantedPlan, SyntheticSpec};

fn screenaudit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_screenaudit"))
        .args(args)
        .env_remove("SCREENAUDIT_OUT")
        .output()
        .expect("failed to launch screenaudit")
}

fn assert_code(out: &Output, expect: i32) {
    assert_eq!(
        out.status.code(),
        Some(expect),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn assert_files(dir: &Path, names: &[&str]) {
    for name in names {
        let path = dir.join(name);
        assert!(path.is_file(), "expected output file {}", path.display());
        assert!(
            path.metadata().unwrap().len() > 0,
            "output file {} is empty",
            path.display()
        );
    }
}

fn write_spec(dir: &Path, spec: &SyntheticSpec) -> PathBuf {
    let path = dir.join("spec.json");
    std::fs::write(&path, serde_json::to_string_pretty(spec).unwrap()).unwrap();
    path
}

fn small_spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        n_applicants: 4_000,
        n_models: 6,
        n_positions: 6,
        n_employers: 3,
        k_distribution: [(3u64, 1.0)].into_iter().collect(),
        base_rates: vec![0.5],
        seed,
        ..SyntheticSpec::default()
    }
}

#[test]
fn generate_then_reload_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec {
        planted: PlantedPlan {
            duplicates: 4,
            unscored: 3,
            all_reject_applicants: 1,
            ..PlantedPlan::default()
        },
        ..small_spec(11)
    };
    let spec_path = write_spec(dir.path(), &spec);
    let out = screenaudit(&[
        "generate",
        "--spec",
        &spec_path.to_string_lossy(),
        "--out",
        &dir.path().to_string_lossy(),
    ]);
    assert_code(&out, 0);
    assert_files(dir.path(), &["dataset.csv", "osim.csv", "ground_truth.json"]);

    let records =
        dataset::load_dataset(dir.path().join("dataset.csv"), &SchemaMapping::default()).unwrap();
    // 4000 core applicants × 3 applications, plus 4 planted duplicates.
    assert_eq!(records.len(), 4_000 * 3 + 4);
    let unscored = records.iter().filter(|r| r.score.is_none()).count();
    assert_eq!(unscored, 3);

    let osim = sim::load_outcome_matrix(dir.path().join("osim.csv")).unwrap();
    assert_eq!(osim.applicant_ids.len(), 4_000);
    assert_eq!(osim.model_ids.len(), 6);
    assert!(osim.complete.iter().all(|&c| c));
}

#[test]
fn audit_exits_zero_on_unbiased_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = write_spec(dir.path(), &small_spec(21));
    let gen = dir.path().join("gen");
    assert_code(
        &screenaudit(&[
            "generate",
            "--spec",
            &spec_path.to_string_lossy(),
            "--out",
            &gen.to_string_lossy(),
        ]),
        0,
    );
    let audit = dir.path().join("audit");
    let out = screenaudit(&[
        "audit",
        "--input",
        &gen.join("dataset.csv").to_string_lossy(),
        "--out",
        &audit.to_string_lossy(),
    ]);
    assert_code(&out, 0);
    assert_files(
        &audit,
        &["position_stats.csv", "soc_rollup.csv", "impact_summary.json"],
    );
}

#[test]
fn audit_exits_two_on_adverse_corpus() {
    let dir = tempfile::tempdir().unwrap();
    // A strong latent penalty for group_b on model m000 produces an
    // unambiguous per-position disparity.
    let mut spec = small_spec(31);
    spec.group_effects = [(
        "group_b".to_string(),
        [("m000".to_string(), -0.8)].into_iter().collect(),
    )]
    .into_iter()
    .collect();
    let spec_path = write_spec(dir.path(), &spec);
    let gen = dir.path().join("gen");
    assert_code(
        &screenaudit(&[
            "generate",
            "--spec",
            &spec_path.to_string_lossy(),
            "--out",
            &gen.to_string_lossy(),
        ]),
        0,
    );
    let audit = dir.path().join("audit");
    let out = screenaudit(&[
        "audit",
        "--input",
        &gen.join("dataset.csv").to_string_lossy(),
        "--out",
        &audit.to_string_lossy(),
    ]);
    assert_code(&out, 2);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains("group_b"),
        "flag detail should name the affected group:\n{stdout}"
    );
    let stats = std::fs::read_to_string(audit.join("position_stats.csv")).unwrap();
    assert!(stats.lines().any(|l| l.starts_with("p0000,group_b,") && l.ends_with(",true")));
}

#[test]
fn ingest_cleans_planted_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec {
        planted: PlantedPlan {
            duplicates: 5,
            test_models: 1,
            test_model_rows: 15,
            unscored: 4,
            identity_groups: vec![3],
            all_reject_applicants: 1,
        },
        ..small_spec(41)
    };
    let spec_path = write_spec(dir.path(), &spec);
    let gen = dir.path().join("gen");
    assert_code(
        &screenaudit(&[
            "generate",
            "--spec",
            &spec_path.to_string_lossy(),
            "--out",
            &gen.to_string_lossy(),
        ]),
        0,
    );
    let cfg = PipelineConfig {
        test_model_ids: ["testm00".to_string()].into_iter().collect(),
        ..PipelineConfig::default()
    };
    let cfg_path = dir.path().join("pipeline.json");
    std::fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let ing = dir.path().join("ing");
    let out = screenaudit(&[
        "ingest",
        "--input",
        &gen.join("dataset.csv").to_string_lossy(),
        "--config",
        &cfg_path.to_string_lossy(),
        "--out",
        &ing.to_string_lossy(),
    ]);
    assert_code(&out, 0);
    assert_files(&ing, &["cleaned.csv", "ingest_report.json"]);

    let cleaned =
        dataset::load_dataset(ing.join("cleaned.csv"), &SchemaMapping::default()).unwrap();
    // Duplicates, test-model rows, and unscored rows are all gone; the
    // identity-cluster applicants survive (no identity key configured).
    assert!(cleaned.iter().all(|r| r.score.is_some()));
    assert!(cleaned.iter().all(|r| r.model_id != "testm00"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ing.join("ingest_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["clean"]["deduplicated"], 5);
    assert_eq!(report["clean"]["removed_test_models"], 15);
    assert_eq!(report["clean"]["removed_unscored"], 4);
}

#[test]
fn homogenize_simulate_fit_emit_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec {
        k_distribution: (1..=4).map(|k| (k, 0.25)).collect(),
        ..small_spec(51)
    };
    let spec_path = write_spec(dir.path(), &spec);
    let gen = dir.path().join("gen");
    assert_code(
        &screenaudit(&[
            "generate",
            "--spec",
            &spec_path.to_string_lossy(),
            "--out",
            &gen.to_string_lossy(),
        ]),
        0,
    );
    let dataset_csv = gen.join("dataset.csv").to_string_lossy().into_owned();

    let homog = dir.path().join("homog");
    assert_code(
        &screenaudit(&["homogenize", "--input", &dataset_csv, "--out", &homog.to_string_lossy()]),
        0,
    );
    assert_files(
        &homog,
        &[
            "k_distribution.csv",
            "distributions.csv",
            "rejection_curve.csv",
            "homogenization.json",
        ],
    );

    let sim_dir = dir.path().join("sim");
    assert_code(
        &screenaudit(&[
            "simulate",
            "--input",
            &dataset_csv,
            "--osim",
            &gen.join("osim.csv").to_string_lossy(),
            "--k-max",
            "6",
            "--replicates",
            "40",
            "--out",
            &sim_dir.to_string_lossy(),
        ]),
        0,
    );
    assert_files(&sim_dir, &["simulation_curve.csv", "simulation.json"]);

    let fit = dir.path().join("fit");
    assert_code(
        &screenaudit(&[
            "fit",
            "--input",
            &homog.join("rejection_curve.csv").to_string_lossy(),
            "--y-column",
            "baseline",
            "--out",
            &fit.to_string_lossy(),
        ]),
        0,
    );
    assert_files(&fit, &["fit.json"]);
    let fit_json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fit.join("fit.json")).unwrap()).unwrap();
    assert!(fit_json["b"].as_f64().unwrap() < 0.0, "decay rate should be negative");
}

#[test]
fn bad_inputs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    // Missing input file.
    let out = screenaudit(&[
        "audit",
        "--input",
        &dir.path().join("nope.csv").to_string_lossy(),
        "--out",
        &dir.path().to_string_lossy(),
    ]);
    assert_code(&out, 1);
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());

    // Malformed generator spec.
    let bad_spec = dir.path().join("bad.json");
    std::fs::write(&bad_spec, r#"{"n_applicants": 0}"#).unwrap();
    let out = screenaudit(&[
        "generate",
        "--spec",
        &bad_spec.to_string_lossy(),
        "--out",
        &dir.path().to_string_lossy(),
    ]);
    assert_code(&out, 1);

    // Unknown field in the pipeline config.
    let gen = dir.path().join("gen");
    let spec_path = write_spec(dir.path(), &small_spec(61));
    assert_code(
        &screenaudit(&[
            "generate",
            "--spec",
            &spec_path.to_string_lossy(),
            "--out",
            &gen.to_string_lossy(),
        ]),
        0,
    );
    let bad_cfg = dir.path().join("bad_cfg.json");
    std::fs::write(&bad_cfg, r#"{"not_a_setting": true}"#).unwrap();
    let out = screenaudit(&[
        "ingest",
        "--input",
        &gen.join("dataset.csv").to_string_lossy(),
        "--config",
        &bad_cfg.to_string_lossy(),
        "--out",
        &dir.path().join("ing").to_string_lossy(),
    ]);
    assert_code(&out, 1);
}

#[test]
fn out_dir_env_var_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = write_spec(dir.path(), &small_spec(71));
    let env_out = dir.path().join("from_env");
    let out = Command::new(env!("CARGO_BIN_EXE_screenaudit"))
        .args(["generate", "--spec", &spec_path.to_string_lossy()])
        .env("SCREENAUDIT_OUT", &env_out)
        .output()
        .expect("failed to launch screenaudit");
    assert_code(&out, 0);
    assert_files(&env_out, &["dataset.csv", "osim.csv", "ground_truth.json"]);
}
