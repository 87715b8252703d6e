#![allow(dead_code)]

use jointrecon::gridmath::{ComplexImage, KCoords};
use jointrecon::rng;
use jointrecon::Complex64;
use rand::Rng;

pub fn random_image(n: usize, seed: u64) -> ComplexImage {
    let mut r = rng::seeded(seed);
    ComplexImage::from_fn(n, |_, _| rng::complex_normal(&mut r, 1.0))
}

pub fn random_coords(m: usize, extent: f64, seed: u64) -> KCoords {
    let mut r = rng::seeded(seed);
    KCoords::new((0..m).map(|_| [r.random_range(-extent..extent), r.random_range(-extent..extent)]).collect())
}

pub fn random_samples(m: usize, seed: u64) -> Vec<Complex64> {
    let mut r = rng::seeded(seed);
    (0..m).map(|_| rng::complex_normal(&mut r, 1.0)).collect()
}

pub fn rel_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

pub fn vdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub mod gaussian {
    use jointrecon::acquisition::{add_noise, apply_adjoint, apply_forward, KSpaceData};
    use jointrecon::motion::MotionTrajectory;
    use jointrecon::phantom::{cartesian_trajectory, CoilMaps, SampledTrajectory};
    use jointrecon::prior::{geometric_schedule, GaussianScore};
    use jointrecon::sampler::JointSampleConfig;
    use jointrecon::{ComplexImage, Complex64};

    pub const N: usize = 8;

    /// Identity coil, fully sampled, Gaussian image prior, motion frozen.
    pub struct Problem {
        pub maps: CoilMaps,
        pub traj: SampledTrajectory,
        pub y: KSpaceData,
        pub prior: GaussianScore,
        pub prior_var: f64,
        pub cfg: JointSampleConfig,
    }

    pub fn problem() -> Problem {
        let maps = CoilMaps::uniform(N);
        let traj = cartesian_trajectory(N, 2, 1.0).unwrap();
        let truth = super::random_image(N, 11);
        let mean = super::random_image(N, 12);
        let prior_var = 0.01;
        let clean = apply_forward(&truth, &maps, &traj, &MotionTrajectory::zeros(traj.num_trs())).unwrap();
        let y = add_noise(&clean, 0.5, 13).unwrap();
        let prior = GaussianScore::new(mean, vec![prior_var; N * N]).unwrap();
        let cfg = JointSampleConfig {
            schedule: geometric_schedule(1.0, 0.05, 5, 60, 1.5e-3).unwrap(),
            motion_step_scale: 0.0,
            ..Default::default()
        };
        Problem { maps, traj, y, prior, prior_var, cfg }
    }

    /// Mean and per-real-component precision of the final-level target
    /// `exp(-||y - Ax||^2 / (2 s^2)) p_v(x)` with `A^H A = L I`,
    /// `s^2 = sigma^2 + L s_L^2` and prior variance `v + s_L^2`.
    pub fn closed_form(p: &Problem) -> (ComplexImage, f64) {
        let lip = (N * N) as f64;
        let s_l = p.cfg.schedule.final_level();
        let s2 = p.y.noise_std.powi(2) + lip * s_l * s_l;
        let v = p.prior_var + s_l * s_l;
        let precision = lip / s2 + 1.0 / v;
        let aty = apply_adjoint(&p.y, &p.maps, &p.traj, &MotionTrajectory::zeros(p.traj.num_trs())).unwrap();
        let mut mean = aty.scaled(1.0 / s2);
        mean.axpy(Complex64::new(1.0 / v, 0.0), &p.prior.mean);
        (mean.scaled(1.0 / precision), precision)
    }

    /// Stationary variance of the unadjusted Langevin chain on a Gaussian
    /// of precision `p` with step `eta`.
    pub fn ula_variance(precision: f64, eta: f64) -> f64 {
        2.0 / (precision * (2.0 - eta * precision))
    }
}
