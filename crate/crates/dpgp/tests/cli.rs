use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dpgp::checkpoint::{load_checkpoint, save_checkpoint, WEIGHTS_FILE};
use dpgp::commands;
use dpgp::config::RunConfig;
use dpgp::dataset_io::{load_dataset, save_dataset, FEATURES_FILE};
use dpgp_core::models::{predict, ModelKind};
use dpgp_core::simgen::Split;
use tempfile::TempDir;

const TINY: &str = r#"{
  "dataset": {
    "id_values": [3000.0, 3300.0, 3600.0],
    "ood_values": [2600.0, 2800.0],
    "train_count": 20,
    "region": {"window_len": 10}
  },
  "model": {"latent_dim": 6, "rff_features": 16, "residual_blocks": 2, "median_rows": 20},
  "training": {"epochs": 4, "batch_size": 8, "mc_passes": 10, "ensemble_size": 2}
}"#;

fn dpgp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpgp"))
        .args(args)
        .env_remove("DPGP_OUT")
        .output()
        .expect("run dpgp")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
    config: PathBuf,
    data: PathBuf,
}

fn fixture() -> Fixture {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, TINY).unwrap();
    let data = dir.path().join("data");
    let out = dpgp(&["gen-data", "--config", s(&config), "--out", s(&data)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    Fixture { dir, config, data }
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn default_generation_counts() {
    let cfg = RunConfig::default();
    let d = commands::generate(&cfg).unwrap();
    assert_eq!((d.train.len(), d.id_test.len(), d.ood.len()), (1382, 346, 64));
    assert_eq!(d.width, 7000);
    assert_eq!(d, dpgp_core::simgen::build_dataset(&cfg.dataset, &cfg.simgen).unwrap());
}

#[test]
fn dataset_round_trip_and_corruption() {
    let f = fixture();
    let cfg = RunConfig::from_json(TINY).unwrap();
    let d = load_dataset(&f.data).unwrap();
    assert_eq!(d, commands::generate(&cfg).unwrap());
    assert_eq!(load_dataset(&f.data.join("dataset.json")).unwrap(), d);
    let copy = f.dir.path().join("copy");
    save_dataset(&d, &copy).unwrap();
    assert_eq!(read(&copy.join(FEATURES_FILE)), read(&f.data.join(FEATURES_FILE)));
    assert_eq!(read(&copy.join("dataset.json")), read(&f.data.join("dataset.json")));

    let blob = copy.join(FEATURES_FILE);
    let bytes = read(&blob);
    std::fs::write(&blob, &bytes[..bytes.len() - 4]).unwrap();
    let out = dpgp(&["svd-report", "--data", s(&copy), "--k", "4", "--out", s(&f.dir.path().join("svd"))]);
    assert_eq!(out.status.code(), Some(2));
    let mut flipped = bytes.clone();
    flipped[0] ^= 0x40;
    std::fs::write(&blob, flipped).unwrap();
    assert!(load_dataset(&copy).is_err());
}

#[test]
fn svd_report_bound_holds() {
    let f = fixture();
    let out_dir = f.dir.path().join("svd");
    let out = dpgp(&["svd-report", "--data", s(&f.data), "--k", "4", "--out", s(&out_dir)]);
    assert!(out.status.success());
    let r: commands::SvdReport = serde_json::from_slice(&read(&out_dir.join("svd_report.json"))).unwrap();
    assert_eq!((r.k, r.rows, r.cols), (4, 20, 70));
    assert_eq!(r.bound_violations, 0);
    assert!(r.max_norm_loss <= r.tail_energy);
}

#[test]
fn checkpoint_round_trip_and_rejections() {
    let f = fixture();
    let cfg = RunConfig::from_json(TINY).unwrap();
    let d = load_dataset(&f.data).unwrap();
    let x = d.features(Split::IdTest);
    for kind in ModelKind::ALL {
        let (model, _) = commands::train_model(&cfg.resolved(kind), &d, kind, 1).unwrap();
        let dir = f.dir.path().join(kind.name());
        save_checkpoint(&model, &dir).unwrap();
        let back = load_checkpoint(&dir, Some(kind)).unwrap();
        assert_eq!(back.export_tensors(), model.export_tensors());
        assert_eq!(predict(&back, &x, &cfg.training).unwrap(), predict(&model, &x, &cfg.training).unwrap());
        let other = ModelKind::ALL.into_iter().find(|k| *k != kind).unwrap();
        assert!(load_checkpoint(&dir, Some(other)).is_err());
        let blob = dir.join(WEIGHTS_FILE);
        let bytes = read(&blob);
        std::fs::write(&blob, &bytes[..bytes.len() - 8]).unwrap();
        assert!(load_checkpoint(&dir, None).is_err());
    }
}

#[test]
fn train_evaluate_and_reports_are_reproducible() {
    let f = fixture();
    let run = |tag: &str| {
        let m = f.dir.path().join(format!("model_{tag}"));
        let e = f.dir.path().join(format!("eval_{tag}"));
        let c = s(&f.config);
        let d = s(&f.data);
        for args in [
            vec!["train", "--config", c, "--data", d, "--kind", "dngpa", "--seed", "3", "--out", s(&m)],
            vec!["evaluate", "--config", c, "--model", s(&m), "--data", d, "--split", "ood", "--out", s(&e)],
            vec!["evaluate", "--config", c, "--model", s(&m), "--data", d, "--split", "id", "--out", s(&e)],
            vec!["ood-grid", "--config", c, "--model", s(&m), "--data", d, "--out", s(&e)],
            vec!["distance-report", "--config", c, "--model", s(&m), "--data", d, "--out", s(&e)],
        ] {
            let out = dpgp(&args);
            assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        }
        (m, e)
    };
    let (m1, e1) = run("a");
    let (m2, e2) = run("b");
    for (dir_a, dir_b, files) in [
        (&m1, &m2, &["model.json", "model.f64", "history.csv", "train_summary.json", "effective_config.json"][..]),
        (
            &e1,
            &e2,
            &[
                "predictions_ood.csv",
                "metrics_ood.json",
                "calibration_ood.csv",
                "metrics_id_test.json",
                "ood_grid.csv",
                "ood_grid.json",
                "distance.json",
                "distance_scatter.csv",
            ][..],
        ),
    ] {
        for name in files {
            assert_eq!(read(&dir_a.join(name)), read(&dir_b.join(name)), "{name}");
        }
    }
    let history = String::from_utf8(read(&m1.join("history.csv"))).unwrap();
    assert!(history.starts_with("epoch,train_loss,test_loss,lengthscale,noise,dropout_p\n"));
    // evaluation of the saved checkpoint equals evaluation of the in-memory model
    let cfg = RunConfig::from_json(TINY).unwrap();
    let d = load_dataset(&f.data).unwrap();
    let (model, _) = commands::train_model(&cfg.resolved(ModelKind::Dngpa), &d, ModelKind::Dngpa, 3).unwrap();
    let preds = predict(&model, &d.features(Split::Ood), &cfg.training).unwrap();
    let report = dpgp_core::metrics::evaluate(&preds, &d.ood.labels).unwrap();
    let saved: dpgp_core::metrics::EvaluationReport =
        serde_json::from_slice(&read(&e1.join("metrics_ood.json"))).unwrap();
    assert_eq!(saved, report);
}

#[test]
fn single_member_ensemble_has_zero_spread() {
    let f = fixture();
    let out = f.dir.path().join("ens");
    let o = dpgp(&[
        "ensemble", "--config", s(&f.config), "--data", s(&f.data), "--kind", "dqr", "--n", "1", "--out", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = String::from_utf8(read(&out.join("summary.csv"))).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some("split,metric,mean,std"));
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() >= 12);
    assert!(rows.iter().all(|r| r.ends_with(",0")), "{summary}");
}

#[test]
fn parallel_ensemble_matches_sequential() {
    let f = fixture();
    let cfg = RunConfig::from_json(TINY).unwrap().resolved(ModelKind::SvdDngpa);
    let d = load_dataset(&f.data).unwrap();
    let parallel = commands::run_ensemble_parallel(&RunConfig { workers: 2, ..cfg.clone() }, &d, ModelKind::SvdDngpa).unwrap();
    let sequential =
        dpgp_core::ensemble::run_ensemble(ModelKind::SvdDngpa, &cfg.model, &cfg.training, &d, None).unwrap();
    assert_eq!(parallel, sequential);
    assert_eq!(parallel.members.len(), 2);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"traning": {}, "model": {"latnt_dim": 3}}"#).unwrap();
    let out = dpgp(&["gen-data", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("model.latnt_dim") && err.contains("traning"), "{err}");
    let out = dpgp(&["train", "--data", s(&dir.path().join("missing")), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let out = dpgp(&["train", "--kind", "gp"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn divergence_exits_with_three() {
    let f = fixture();
    let cfg = f.dir.path().join("hot.json");
    let mut doc: serde_json::Value = serde_json::from_str(TINY).unwrap();
    doc["training"]["adam"] = serde_json::json!({"lr": 1e300});
    std::fs::write(&cfg, doc.to_string()).unwrap();
    let out = dpgp(&[
        "train", "--config", s(&cfg), "--data", s(&f.data), "--kind", "dqr", "--out", s(&f.dir.path().join("hot")),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn config_command_echoes_resolved_values() {
    let out = dpgp(&["config", "--kind", "bnn"]);
    assert!(out.status.success());
    let cfg: RunConfig = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cfg.kind, ModelKind::Bnn);
    assert_eq!(cfg.training.adam.lr, Some(1e-3));
    assert_eq!(cfg.model.latent_dim, 64);
    assert_eq!(cfg.model.rff_features, 128);
    assert_eq!(cfg.model.dropout_rate, 0.1);
    assert_eq!((cfg.model.resnet_sn, cfg.model.input_sn), (0.8, 1.2));
}

#[test]
fn output_directory_comes_from_environment() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, TINY).unwrap();
    let target = dir.path().join("from_env");
    let out = Command::new(env!("CARGO_BIN_EXE_dpgp"))
        .args(["gen-data", "--config", s(&cfg)])
        .env("DPGP_OUT", &target)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(target.join("dataset.json").is_file() && target.join(FEATURES_FILE).is_file());
}
