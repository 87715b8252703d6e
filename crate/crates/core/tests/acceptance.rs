//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line each and fails at the end if any criterion failed.
//!
//! `cargo test --release --test acceptance -- --nocapture`

mod common;

use common::*;
use jointrecon::acquisition::{add_noise, apply_forward, rotate_coords, translation_phase, KSpaceData, MotionOperator};
use jointrecon::gridmath::{dft_oracle_forward, nufft_forward, KCoords};
use jointrecon::motion::{global_offset_removed_error, simulate_motion, MotionPrior, MotionTrajectory};
use jointrecon::phantom::{birdcage_maps, cartesian_trajectory, shepp_logan};
use jointrecon::pipeline::{cmd_batch, BatchConfig, BatchRow, ExperimentConfig, Method};
use jointrecon::prior::{geometric_schedule, GaussianScore};
use jointrecon::sampler::{
    joint_langevin, joint_langevin_with, kappa_gradient, FdSteps, JointSampleConfig, KappaGradMode, MotionSearch,
    RunOptions,
};
use jointrecon::{Complex64, ComplexImage};
use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

// Written straight to the process stdout so the lines survive test capture.
fn report(name: &str, limit_s: f64, start: Instant, outcome: Outcome) -> bool {
    let secs = start.elapsed().as_secs_f64();
    let pass = outcome.pass && secs < limit_s;
    let _ = writeln!(
        std::io::stdout().lock(),
        "{} {name}: {} [{secs:.1} s, limit {limit_s:.0} s]",
        if pass { "PASS" } else { "FAIL" },
        outcome.detail
    );
    pass
}

fn adjoint_correctness() -> Outcome {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for &n in &[16usize, 32] {
        for &c in &[1usize, 4] {
            for &r in &[1.0f64, 4.0] {
                let traj = cartesian_trajectory(n, n / 8, r).unwrap();
                let maps = birdcage_maps(n, c).unwrap();
                let op = MotionOperator::new(&maps, &traj).unwrap();
                for seed in 0..5u64 {
                    let motion = simulate_motion(traj.num_trs(), 2.0, 300 + seed).unwrap();
                    let x = random_image(n, 400 + seed);
                    let y = KSpaceData::new(random_samples(c * traj.num_coords(), 500 + seed), c, 0.0).unwrap();
                    let lhs = vdot(&y.samples, &op.forward(&x, &motion).unwrap().samples);
                    let rhs = vdot(op.adjoint(&y, &motion).unwrap().data(), x.data());
                    worst = worst.max((lhs - rhs).norm() / (x.norm() * norm(&y.samples)));
                    cases += 1;
                }
            }
        }
    }
    Outcome { pass: worst <= 1e-6, detail: format!("{cases} cases, worst relative error {worst:.2e} (<= 1e-6)") }
}

fn nufft_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for case in 0..20u64 {
        let n = [8usize, 16, 32][case as usize % 3];
        let img = random_image(n, 600 + case);
        let coords = if case % 2 == 0 {
            random_coords(64 + 24 * case as usize, 1.45 * PI, 700 + case)
        } else {
            // rotated Cartesian lines: corners leave the [-pi, pi) box
            let traj = cartesian_trajectory(n, n / 8, if n == 32 { 4.0 } else { 1.0 }).unwrap();
            let motion = simulate_motion(traj.num_trs(), 40.0, 800 + case).unwrap();
            let rotated = rotate_coords(&traj, &motion).unwrap();
            KCoords::new(rotated.iter().take(512).copied().collect())
        };
        assert!(coords.len() <= 512);
        let err = rel_l2(&nufft_forward(&img, &coords).unwrap(), &dft_oracle_forward(&img, &coords).unwrap());
        worst = worst.max(err);
    }
    Outcome { pass: worst <= 1e-5, detail: format!("20 cases, worst relative L2 error {worst:.2e} (<= 1e-5)") }
}

fn convention_locks() -> Outcome {
    let n = 16;
    let traj = cartesian_trajectory(n, 4, 1.0).unwrap();
    let mut shift = MotionTrajectory::zeros(traj.num_trs());
    shift.states.iter_mut().for_each(|s| s.phi_x = 1.0);
    let phase = translation_phase(&traj, &shift, &traj.coords).unwrap();
    let phase_err = traj
        .coords
        .iter()
        .zip(&phase)
        .map(|(k, p)| (p - Complex64::from_polar(1.0, -k[0])).norm())
        .fold(0.0, f64::max);

    let x = random_image(n, 21);
    let moved: Vec<Complex64> = nufft_forward(&x, &traj.coords).unwrap().iter().zip(&phase).map(|(a, b)| a * b).collect();
    let shifted = ComplexImage::from_fn(n, |row, col| x[(row, (col + n - 1) % n)]);
    let shift_err = rel_l2(&moved, &nufft_forward(&shifted, &traj.coords).unwrap());

    let mut quarter = MotionTrajectory::zeros(traj.num_trs());
    quarter.states.iter_mut().for_each(|s| s.theta = 90.0);
    let rotated = rotate_coords(&traj, &quarter).unwrap();
    let rot_err = traj
        .coords
        .iter()
        .zip(rotated.iter())
        .map(|(k, r)| (r[0] + k[1]).abs().max((r[1] - k[0]).abs()))
        .fold(0.0, f64::max);

    Outcome {
        pass: phase_err <= 1e-12 && shift_err <= 1e-6 && rot_err <= 1e-12,
        detail: format!(
            "shift phase vs exp(-i kx) {phase_err:.1e}, vs circular shift {shift_err:.1e}, 90 deg map {rot_err:.1e}"
        ),
    }
}

fn gradient_fidelity() -> Outcome {
    let n = 32;
    let maps = birdcage_maps(n, 4).unwrap();
    let traj = cartesian_trajectory(n, 4, 4.0).unwrap();
    assert_eq!(traj.num_trs(), 2);
    let fd = FdSteps::default();
    let fine = FdSteps { theta: 1e-3, phi: 1e-3 };
    let mut worst_rel = 0.0f64;
    let mut worst_truth = 0.0f64;
    for seed in 0..10u64 {
        let x = shepp_logan(n, seed).unwrap();
        let truth = simulate_motion(2, 2.0, 900 + seed).unwrap();
        let y = apply_forward(&x, &maps, &traj, &truth).unwrap();
        let guess = simulate_motion(2, 2.0, 1000 + seed).unwrap();

        let a = kappa_gradient(&y, &x, &maps, &traj, &guess, KappaGradMode::AnalyticPhase, fine).unwrap();
        let f = kappa_gradient(&y, &x, &maps, &traj, &guess, KappaGradMode::FiniteDifference, fine).unwrap();
        let translation = |g: &[f64]| g.iter().enumerate().filter(|(i, _)| i % 3 != 0).map(|(_, v)| *v).collect::<Vec<_>>();
        let (ta, tf) = (translation(&a), translation(&f));
        let diff = ta.iter().zip(&tf).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        let scale = tf.iter().map(|v| v.abs()).fold(0.0, f64::max);
        worst_rel = worst_rel.max(diff / scale);

        // scale: gradient at the sampler's starting point (zero motion)
        let zero = MotionTrajectory::zeros(2);
        let g0 = kappa_gradient(&y, &x, &maps, &traj, &zero, KappaGradMode::AnalyticPhase, fd).unwrap();
        let g0_inf = g0.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for mode in [KappaGradMode::AnalyticPhase, KappaGradMode::FiniteDifference] {
            let g = kappa_gradient(&y, &x, &maps, &traj, &truth, mode, fd).unwrap();
            worst_truth = worst_truth.max(g.iter().map(|v| v.abs()).fold(0.0, f64::max) / g0_inf);
        }
    }
    Outcome {
        pass: worst_rel <= 1e-4 && worst_truth <= 1e-4,
        detail: format!(
            "10 cases, translation analytic vs FD {worst_rel:.2e} (<= 1e-4), |grad| at truth / initial {worst_truth:.2e} (<= 1e-4)"
        ),
    }
}

fn linear_gaussian() -> Outcome {
    let mut p = gaussian::problem();
    let (mean, _) = gaussian::closed_form(&p);
    let runs = 100;
    let mut acc = ComplexImage::zeros(gaussian::N);
    for seed in 0..runs {
        p.cfg.seed = seed;
        let out = joint_langevin(&p.y, &p.maps, &p.traj, &p.prior, &MotionPrior::default(), &p.cfg).unwrap();
        acc.axpy(Complex64::new(1.0 / runs as f64, 0.0), &out.image);
    }
    let rel = rel_l2(acc.data(), mean.data());
    Outcome { pass: rel <= 0.05, detail: format!("{runs} runs, relative error of the mean {rel:.4} (<= 0.05)") }
}

fn motion_only() -> Outcome {
    let n = 64;
    let maps = birdcage_maps(n, 4).unwrap();
    let traj = cartesian_trajectory(n, 8, 1.0).unwrap();
    let mut worst = [0.0f64; 3];
    for seed in 1..=5u64 {
        let x = shepp_logan(n, seed).unwrap();
        let truth = simulate_motion(traj.num_trs(), 2.0, seed + 100).unwrap();
        let y = add_noise(&apply_forward(&x, &maps, &traj, &truth).unwrap(), 0.1, seed + 200).unwrap();
        let cfg = JointSampleConfig {
            schedule: geometric_schedule(1.0, 0.001, 8, 50, 0.6e-6).unwrap(),
            motion_step_scale: 1.0,
            kappa_grad_mode: KappaGradMode::AnalyticPhase,
            search: Some(MotionSearch::default()),
            seed,
            ..Default::default()
        };
        let opts = RunOptions { initial_image: Some(x.clone()), freeze_image: true, ..Default::default() };
        let prior = GaussianScore::isotropic(n, 1.0).unwrap();
        let out = joint_langevin_with(&y, &maps, &traj, &prior, &MotionPrior::default(), &cfg, &opts).unwrap();
        let e = global_offset_removed_error(&out.motion, &truth).unwrap();
        worst = [worst[0].max(e.theta), worst[1].max(e.phi_x), worst[2].max(e.phi_y)];
    }
    Outcome {
        pass: worst.iter().all(|&v| v <= 0.1),
        detail: format!(
            "5 seeds, worst MAE theta {:.4} deg, phi_x {:.4} px, phi_y {:.4} px (<= 0.1)",
            worst[0], worst[1], worst[2]
        ),
    }
}

fn aligned(rows: &[BatchRow], method: &str, accel: f64) -> Vec<(usize, f64)> {
    rows.iter()
        .filter(|r| r.row.method == method && r.row.acceleration == accel)
        .map(|r| (r.instance, r.row.report.nrmse_aligned))
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

fn end_to_end(rows: &[BatchRow]) -> (Outcome, Outcome) {
    let mut ordering = true;
    let mut near_clean = true;
    let mut medians = vec![];
    let mut lines = vec![];
    for accel in [4.0, 8.0] {
        let joint = aligned(rows, "joint", accel);
        let corrupt = aligned(rows, "l1-corrupt", accel);
        let clean = aligned(rows, "l1-clean", accel);
        assert_eq!(joint.len(), 5);
        for ((i, j), (k, c)) in joint.iter().zip(&corrupt) {
            assert_eq!(i, k);
            ordering &= j < c;
        }
        let mj = median(joint.iter().map(|v| v.1).collect());
        let mc = median(clean.iter().map(|v| v.1).collect());
        near_clean &= mj <= 1.5 * mc;
        medians.push(mj);
        let per: Vec<String> =
            joint.iter().zip(&corrupt).map(|((_, j), (_, c))| format!("{j:.3}<{c:.3}")).collect();
        lines.push(format!("R={accel}: joint vs l1-corrupt {}, median joint {mj:.3} vs 1.5 x l1-clean {:.3}", per.join(" "), 1.5 * mc));
    }
    let trend = medians[1] >= medians[0];
    (
        Outcome { pass: ordering && near_clean, detail: lines.join("; ") },
        Outcome { pass: trend, detail: format!("median joint NRMSE R=4 {:.3}, R=8 {:.3}", medians[0], medians[1]) },
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let mut base = ExperimentConfig { grid_size_px: 32, echo_train_length: 4, schedule_levels: 3, schedule_steps_per_level: 15, ..Default::default() };
        base.baseline_max_iters = 30;
        base.sampler_chains = 2;
        base.output_dir = dir.path().join(name);
        let batch = BatchConfig {
            base,
            accelerations: vec![4.0, 8.0],
            instances: 2,
            methods: vec![Method::Joint, Method::L1Corrupt, Method::L1Clean],
            workers: 2,
        };
        cmd_batch(&batch).unwrap();
        let root = dir.path().join(name);
        ["batch_results.csv", "batch_summary.csv"].map(|f| std::fs::read(root.join(f)).unwrap())
    };
    let a = run("a");
    let b = run("b");
    Outcome { pass: a == b, detail: format!("two batch runs, {} + {} CSV bytes compared", a[0].len(), a[1].len()) }
}

#[test]
fn acceptance() {
    let mut passed = vec![];

    let t = Instant::now();
    passed.push(report("adjoint correctness", 30.0, t, adjoint_correctness()));
    let t = Instant::now();
    passed.push(report("NUFFT oracle equivalence", 60.0, t, nufft_oracle()));
    let t = Instant::now();
    passed.push(report("shift/rotation convention locks", f64::INFINITY, t, convention_locks()));
    let t = Instant::now();
    passed.push(report("gradient fidelity", 120.0, t, gradient_fidelity()));
    let t = Instant::now();
    passed.push(report("linear-Gaussian posterior", 300.0, t, linear_gaussian()));
    let t = Instant::now();
    passed.push(report("motion-only recovery", 600.0, t, motion_only()));

    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let batch = BatchConfig {
        base: ExperimentConfig { output_dir: dir.path().to_path_buf(), ..Default::default() },
        accelerations: vec![4.0, 8.0],
        instances: 5,
        methods: vec![Method::Joint, Method::L1Corrupt, Method::L1Clean],
        workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let rows = cmd_batch(&batch).unwrap();
    let (ordering, trend) = end_to_end(&rows);
    passed.push(report("end-to-end ordering", 45.0 * 60.0, t, ordering));
    passed.push(report("degradation trend", f64::INFINITY, t, trend));

    let t = Instant::now();
    passed.push(report("batch determinism", f64::INFINITY, t, determinism()));

    let failed = passed.iter().filter(|p| !**p).count();
    assert_eq!(failed, 0, "{failed} acceptance criteria failed");
}
