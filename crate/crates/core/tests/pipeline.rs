use std::path::{Path, PathBuf};
use std::process::Command;

use jointrecon::pipeline::{
    cmd_batch, cmd_evaluate, cmd_reconstruct, cmd_simulate, exit_code, BatchConfig, ExperimentConfig, Manifest, Method,
    KSPACE_CLEAN, KSPACE_CORRUPT, PHANTOM,
};
use jointrecon::Error;

fn small(dir: &Path) -> ExperimentConfig {
    ExperimentConfig {
        grid_size_px: 32,
        echo_train_length: 4,
        schedule_levels: 3,
        schedule_steps_per_level: 15,
        baseline_max_iters: 30,
        sampler_chains: 2,
        motion_search_range_deg_px: 1.0,
        motion_search_step_deg_px: 0.5,
        output_dir: dir.to_path_buf(),
        ..Default::default()
    }
}

fn overrides(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

#[test]
fn full_size_geometry_manifest_lists_twelve_states() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { grid_size_px: 384, num_coils: 1, output_dir: tmp.path().join("b"), ..Default::default() };
    let manifest = cmd_simulate(&cfg).unwrap();
    assert_eq!(manifest.num_trs, 12);
    assert_eq!(manifest.motion_states.len(), 12);
    assert_eq!(Manifest::load(&cfg.output_dir).unwrap(), manifest);
}

#[test]
fn simulate_is_byte_identical_on_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(tmp.path());
    let ma = cmd_simulate(&cfg).unwrap();
    let first: Vec<Vec<u8>> = ma.files.keys().map(|name| std::fs::read(cfg.output_dir.join(name)).unwrap()).collect();
    let mb = cmd_simulate(&cfg).unwrap();
    assert_eq!(ma, mb);
    for (name, bytes) in ma.files.keys().zip(&first) {
        assert_eq!(&std::fs::read(cfg.output_dir.join(name)).unwrap(), bytes, "{name}");
    }
}

#[test]
fn zero_amplitude_makes_corrupt_and_clean_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(tmp.path());
    cfg.motion_amplitude_deg_px = 0.0;
    cmd_simulate(&cfg).unwrap();
    let corrupt = std::fs::read(tmp.path().join(KSPACE_CORRUPT)).unwrap();
    let clean = std::fs::read(tmp.path().join(KSPACE_CLEAN)).unwrap();
    assert_eq!(corrupt, clean);

    let a = cmd_reconstruct(tmp.path(), Method::L1Corrupt, &[]).unwrap();
    let b = cmd_reconstruct(tmp.path(), Method::L1Clean, &[]).unwrap();
    assert_eq!(
        std::fs::read(a.dir.join("image.cimg")).unwrap(),
        std::fs::read(b.dir.join("image.cimg")).unwrap()
    );
}

#[test]
fn joint_writes_one_motion_row_per_tr_and_evaluates() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(tmp.path());
    cfg.acceleration = 1.0;
    let manifest = cmd_simulate(&cfg).unwrap();
    let joint = cmd_reconstruct(tmp.path(), Method::Joint, &[]).unwrap();
    let table = std::fs::read_to_string(joint.dir.join("motion_estimate.tsv")).unwrap();
    assert_eq!(table.lines().count(), manifest.num_trs + 1);
    assert!(std::fs::read_to_string(joint.dir.join("trace.csv")).unwrap().starts_with("iteration,level,fidelity,nrmse"));

    let rows = cmd_evaluate(tmp.path(), &[joint.dir.clone(), tmp.path().join(PHANTOM)]).unwrap();
    assert_eq!(rows[0].method, "joint");
    assert!(rows[0].motion_error.is_some());
    assert_eq!(rows[1].method, "phantom");
    assert_eq!(rows[1].report.nrmse_raw, 0.0);
    assert_eq!(rows[1].report.nrmse_aligned, 0.0);
    let csv = std::fs::read_to_string(tmp.path().join("evaluation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(tmp.path().join("plot_motion_joint.csv").exists());
    assert!(tmp.path().join("plot_trace_joint.csv").exists());
}

#[test]
fn edited_artifact_fails_integrity() {
    let tmp = tempfile::tempdir().unwrap();
    cmd_simulate(&small(tmp.path())).unwrap();
    let path = tmp.path().join(KSPACE_CORRUPT);
    let mut bytes = std::fs::read(&path).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    std::fs::write(&path, bytes).unwrap();
    let err = cmd_reconstruct(tmp.path(), Method::L1Corrupt, &[]).unwrap_err();
    assert!(matches!(err, Error::Integrity(_)), "{err}");
    assert_eq!(exit_code(&err), 4);
}

#[test]
fn divergence_propagates_with_trace() {
    let tmp = tempfile::tempdir().unwrap();
    cmd_simulate(&small(tmp.path())).unwrap();
    let err = cmd_reconstruct(tmp.path(), Method::Joint, &overrides(&[("schedule_step_rel", "1e7")])).unwrap_err();
    assert!(matches!(err, Error::Diverged { .. }), "{err}");
    assert_eq!(exit_code(&err), 3);
    assert!(tmp.path().join("joint").join("trace.csv").exists());
}

#[test]
fn data_keys_cannot_be_overridden_at_reconstruction() {
    let tmp = tempfile::tempdir().unwrap();
    cmd_simulate(&small(tmp.path())).unwrap();
    let err = cmd_reconstruct(tmp.path(), Method::L1Clean, &overrides(&[("grid_size_px", "64")])).unwrap_err();
    assert_eq!(exit_code(&err), 2);
}

fn batch_csvs(root: &Path) -> (String, String) {
    let cfg = BatchConfig {
        base: small(root),
        accelerations: vec![4.0, 8.0],
        instances: 2,
        methods: Method::ALL.to_vec(),
        workers: 2,
    };
    let rows = cmd_batch(&cfg).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 3);
    (
        std::fs::read_to_string(root.join("batch_results.csv")).unwrap(),
        std::fs::read_to_string(root.join("batch_summary.csv")).unwrap(),
    )
}

#[test]
fn batch_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let a = batch_csvs(&tmp.path().join("a"));
    let b = batch_csvs(&tmp.path().join("b"));
    assert_eq!(a, b);
    assert_eq!(a.1.lines().count(), 1 + 3 * 2);
}

fn bin(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_jointrecon")).args(args).output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn cli_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir: PathBuf = tmp.path().join("b");
    let d = dir.to_str().unwrap();
    assert_eq!(bin(&["simulate", "--grid_size_px", "30", "--output_dir", d]).0, 2);
    assert_eq!(bin(&["simulate", "--grid_size_px", "32", "--output_dir", d]).0, 0);
    let (code, _) = bin(&["reconstruct", "--bundle", d, "--method", "l1-clean", "--baseline_max_iters", "10"]);
    assert_eq!(code, 0);
    let (code, stdout) = bin(&["evaluate", "--bundle", d, &format!("{d}/l1-clean")]);
    assert_eq!(code, 0);
    assert!(stdout.starts_with("method,acceleration,nrmse_raw,nrmse_aligned"));
    assert_eq!(bin(&["reconstruct", "--bundle", d, "--method", "nope"]).0, 2);
    let diverge = ["reconstruct", "--bundle", d, "--method", "joint", "--schedule_step_rel", "1e7"];
    assert_eq!(bin(&diverge).0, 3);
    std::fs::write(dir.join(PHANTOM), b"tampered").unwrap();
    assert_eq!(bin(&["reconstruct", "--bundle", d, "--method", "l1-clean"]).0, 4);
}
