//! Motion-parameterised multi-coil forward model
//! `y = L_phi N_{R_theta K} S x + w` and its adjoint.
//!
//! Each TR's k-space coordinates are rotated by that TR's angle before the
//! NUFFT, then the samples pick up the translation phase evaluated at the
//! rotated coordinates.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::gridmath::{ComplexImage, KCoords, NufftPlan, Spectrum};
use crate::motion::{MotionState, MotionTrajectory};
use crate::phantom::{CoilMaps, SampledTrajectory};
use crate::{rng, Error, Result};

/// Measured multi-coil samples, coil-major then trajectory order.
#[derive(Clone, Debug, PartialEq)]
pub struct KSpaceData {
    pub samples: Vec<Complex64>,
    pub num_coils: usize,
    pub noise_std: f64,
}

impl KSpaceData {
    pub fn new(samples: Vec<Complex64>, num_coils: usize, noise_std: f64) -> Result<Self> {
        if num_coils == 0 || samples.len() % num_coils != 0 {
            return Err(Error::Dimension(format!("{} samples do not split into {num_coils} coils", samples.len())));
        }
        if !(noise_std >= 0.0) {
            return Err(Error::InvalidParameter(format!("noise_std must be >= 0, got {noise_std}")));
        }
        Ok(Self { samples, num_coils, noise_std })
    }

    pub fn zeros(num_coils: usize, num_coords: usize) -> Self {
        Self { samples: vec![Complex64::new(0.0, 0.0); num_coils * num_coords], num_coils, noise_std: 0.0 }
    }

    pub fn num_coords(&self) -> usize {
        self.samples.len() / self.num_coils
    }

    pub fn coil(&self, c: usize) -> &[Complex64] {
        let m = self.num_coords();
        &self.samples[c * m..(c + 1) * m]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.samples.iter().map(|v| v.norm_sqr()).sum()
    }
}

fn rotate(k: [f64; 2], theta_deg: f64) -> [f64; 2] {
    let (s, c) = theta_deg.to_radians().sin_cos();
    [c * k[0] - s * k[1], s * k[0] + c * k[1]]
}

#[inline]
fn phase_factor(k: [f64; 2], state: &MotionState) -> Complex64 {
    Complex64::from_polar(1.0, -(k[0] * state.phi_x + k[1] * state.phi_y))
}

fn check_motion(traj: &SampledTrajectory, motion: &MotionTrajectory) -> Result<()> {
    if motion.len() != traj.num_trs() {
        return Err(Error::LengthMismatch { expected: traj.num_trs(), actual: motion.len() });
    }
    Ok(())
}

/// Rotates every coordinate of TR `t` counter-clockwise by `theta_t`.
pub fn rotate_coords(traj: &SampledTrajectory, motion: &MotionTrajectory) -> Result<KCoords> {
    check_motion(traj, motion)?;
    let mut out = traj.coords.as_slice().to_vec();
    for (range, state) in traj.tr_boundaries.iter().zip(&motion.states) {
        for k in &mut out[range.clone()] {
            *k = rotate(*k, state.theta);
        }
    }
    Ok(KCoords::new(out))
}

/// Diagonal of `L_phi`: `exp(-i (k_x phi_x + k_y phi_y))` at the given
/// (already rotated) coordinates.
pub fn translation_phase(traj: &SampledTrajectory, motion: &MotionTrajectory, coords: &KCoords) -> Result<Vec<Complex64>> {
    check_motion(traj, motion)?;
    if coords.len() != traj.num_coords() {
        return Err(Error::LengthMismatch { expected: traj.num_coords(), actual: coords.len() });
    }
    let mut out = vec![Complex64::new(0.0, 0.0); coords.len()];
    for (range, state) in traj.tr_boundaries.iter().zip(&motion.states) {
        for j in range.clone() {
            out[j] = phase_factor(coords.as_slice()[j], state);
        }
    }
    Ok(out)
}

/// `A_kappa` bound to one coil set and trajectory, with a cached NUFFT plan.
#[derive(Clone, Debug)]
pub struct MotionOperator {
    plan: NufftPlan,
    maps: CoilMaps,
    traj: SampledTrajectory,
}

impl MotionOperator {
    pub fn new(maps: &CoilMaps, traj: &SampledTrajectory) -> Result<Self> {
        if maps.side() != traj.n {
            return Err(Error::Dimension(format!("coil maps are {0}x{0}, trajectory expects {1}", maps.side(), traj.n)));
        }
        Ok(Self { plan: NufftPlan::new(traj.n), maps: maps.clone(), traj: traj.clone() })
    }

    pub fn side(&self) -> usize {
        self.traj.n
    }

    pub fn num_coils(&self) -> usize {
        self.maps.num_coils()
    }

    pub fn num_coords(&self) -> usize {
        self.traj.num_coords()
    }

    pub fn trajectory(&self) -> &SampledTrajectory {
        &self.traj
    }

    pub fn maps(&self) -> &CoilMaps {
        &self.maps
    }

    fn check_image(&self, x: &ComplexImage) -> Result<()> {
        if x.side() != self.side() {
            return Err(Error::Dimension(format!("image is {0}x{0}, operator expects {1}", x.side(), self.side())));
        }
        Ok(())
    }

    fn check_data(&self, y: &KSpaceData) -> Result<()> {
        if y.num_coils != self.num_coils() || y.num_coords() != self.num_coords() {
            return Err(Error::Dimension(format!(
                "k-space holds {} coils x {} samples, operator expects {} x {}",
                y.num_coils,
                y.num_coords(),
                self.num_coils(),
                self.num_coords()
            )));
        }
        Ok(())
    }

    /// Oversampled spectra of `S_c x` for every coil. These do not depend on
    /// motion, so repeated evaluations under different motion reuse them.
    pub fn coil_spectra(&self, x: &ComplexImage) -> Result<Vec<Spectrum>> {
        self.check_image(x)?;
        self.maps.maps.par_iter().map(|s| self.plan.spectrum(&s.hadamard(x))).collect()
    }

    /// Noise-free samples of TR `tr` under `state`, coil-major.
    pub fn forward_tr(&self, spectra: &[Spectrum], tr: usize, state: &MotionState) -> Vec<Complex64> {
        let coords = self.traj.tr_coords(tr);
        let m = coords.len();
        let mut out = vec![Complex64::new(0.0, 0.0); m * spectra.len()];
        let mut vals = vec![Complex64::new(0.0, 0.0); spectra.len()];
        for (j, &k) in coords.iter().enumerate() {
            let kr = rotate(k, state.theta);
            let p = phase_factor(kr, state);
            Spectrum::sample_each(spectra, kr, &mut vals);
            for (c, v) in vals.iter().enumerate() {
                out[c * m + j] = v * p;
            }
        }
        out
    }

    /// Samples of TR `tr` from a measurement, coil-major.
    pub fn data_tr(&self, y: &KSpaceData, tr: usize) -> Vec<Complex64> {
        let range = self.traj.tr_boundaries[tr].clone();
        (0..y.num_coils).flat_map(|c| y.coil(c)[range.clone()].iter().copied()).collect()
    }

    pub fn forward_from_spectra(&self, spectra: &[Spectrum], motion: &MotionTrajectory) -> Result<KSpaceData> {
        check_motion(&self.traj, motion)?;
        let coords = rotate_coords(&self.traj, motion)?;
        let phase = translation_phase(&self.traj, motion, &coords)?;
        let nc = spectra.len();
        let m = coords.len();
        let per_coord: Vec<Vec<Complex64>> = coords
            .as_slice()
            .par_chunks(1024)
            .zip(phase.par_chunks(1024))
            .map(|(ks, ps)| {
                let mut vals = vec![Complex64::new(0.0, 0.0); nc];
                let mut block = Vec::with_capacity(ks.len() * nc);
                for (&k, p) in ks.iter().zip(ps) {
                    Spectrum::sample_each(spectra, k, &mut vals);
                    block.extend(vals.iter().map(|v| v * p));
                }
                block
            })
            .collect();
        let mut samples = vec![Complex64::new(0.0, 0.0); m * nc];
        for (j, v) in per_coord.concat().into_iter().enumerate() {
            samples[(j % nc) * m + j / nc] = v;
        }
        Ok(KSpaceData { samples, num_coils: nc, noise_std: 0.0 })
    }

    pub fn forward(&self, x: &ComplexImage, motion: &MotionTrajectory) -> Result<KSpaceData> {
        check_motion(&self.traj, motion)?;
        let spectra = self.coil_spectra(x)?;
        self.forward_from_spectra(&spectra, motion)
    }

    pub fn adjoint(&self, y: &KSpaceData, motion: &MotionTrajectory) -> Result<ComplexImage> {
        check_motion(&self.traj, motion)?;
        self.check_data(y)?;
        let coords = rotate_coords(&self.traj, motion)?;
        let phase = translation_phase(&self.traj, motion, &coords)?;
        let weighted: Vec<Vec<Complex64>> =
            (0..y.num_coils).map(|c| y.coil(c).iter().zip(&phase).map(|(v, p)| v * p.conj()).collect()).collect();
        let views: Vec<&[Complex64]> = weighted.iter().map(|w| w.as_slice()).collect();
        let mut grids: Vec<Vec<Complex64>> = (0..y.num_coils).map(|_| self.plan.empty_grid()).collect();
        self.plan.spread_each(&mut grids, &views, coords.as_slice());
        let per_coil: Vec<ComplexImage> = grids
            .into_par_iter()
            .enumerate()
            .map(|(c, grid)| {
                let img = self.plan.finish_adjoint(grid);
                let map = &self.maps.maps[c];
                let data = img.data().iter().zip(map.data()).map(|(v, s)| v * s.conj()).collect();
                ComplexImage::from_vec(img.side(), img.side(), data).expect("square")
            })
            .collect();
        let mut out = ComplexImage::zeros(self.side());
        for img in &per_coil {
            out.axpy(Complex64::new(1.0, 0.0), img);
        }
        Ok(out)
    }

    /// `||y - A_kappa x||^2`
    pub fn fidelity(&self, y: &KSpaceData, x: &ComplexImage, motion: &MotionTrajectory) -> Result<f64> {
        self.check_data(y)?;
        let ax = self.forward(x, motion)?;
        Ok(y.samples.iter().zip(&ax.samples).map(|(a, b)| (a - b).norm_sqr()).sum())
    }

    /// Largest eigenvalue of `A_0^H A_0` by power iteration.
    pub fn lipschitz(&self, iterations: usize, seed: u64) -> Result<f64> {
        let zero = MotionTrajectory::zeros(self.traj.num_trs());
        let mut r = rng::seeded(seed);
        let mut v = ComplexImage::from_fn(self.side(), |_, _| rng::complex_normal(&mut r, 1.0));
        let mut lambda = 0.0;
        for _ in 0..iterations.max(1) {
            let nv = v.norm();
            if !(nv > 0.0) || !nv.is_finite() {
                return Err(Error::NonFinite("power iteration vector".into()));
            }
            v.scale(1.0 / nv);
            let w = self.adjoint(&self.forward(&v, &zero)?, &zero)?;
            lambda = v.dot(&w).re;
            v = w;
        }
        if !lambda.is_finite() {
            return Err(Error::NonFinite("power iteration eigenvalue".into()));
        }
        Ok(lambda)
    }
}

pub fn apply_forward(x: &ComplexImage, maps: &CoilMaps, traj: &SampledTrajectory, motion: &MotionTrajectory) -> Result<KSpaceData> {
    MotionOperator::new(maps, traj)?.forward(x, motion)
}

pub fn apply_adjoint(y: &KSpaceData, maps: &CoilMaps, traj: &SampledTrajectory, motion: &MotionTrajectory) -> Result<ComplexImage> {
    MotionOperator::new(maps, traj)?.adjoint(y, motion)
}

/// Adds i.i.d. circular complex Gaussian noise with `E|w|^2 = sigma^2`.
pub fn add_noise(y: &KSpaceData, sigma: f64, seed: u64) -> Result<KSpaceData> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {sigma}")));
    }
    let mut out = y.clone();
    out.noise_std = sigma;
    if sigma == 0.0 {
        return Ok(out);
    }
    let mut r = rng::seeded(seed);
    let std = sigma / std::f64::consts::SQRT_2;
    out.samples.iter_mut().for_each(|v| *v += rng::complex_normal(&mut r, std));
    Ok(out)
}
