//! L1-wavelet regularised reconstruction with monotone FISTA.
//!
//! Solves `min_x 1/2 ||y - A_0 x||^2 + lambda ||W x||_1` where `A_0` is the
//! zero-motion forward operator and the coarsest approximation band of `W x`
//! is left unpenalised.

mod wavelet;

pub use wavelet::{wavelet_adjoint, wavelet_forward, WaveletCoeffs};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::acquisition::{KSpaceData, MotionOperator};
use crate::gridmath::ComplexImage;
use crate::motion::MotionTrajectory;
use crate::phantom::{CoilMaps, SampledTrajectory};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Wavelet {
    #[default]
    Daubechies4,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct L1WaveletConfig {
    pub lambda: f64,
    pub max_iters: usize,
    pub wavelet: Wavelet,
    pub decomposition_levels: usize,
    pub tol: f64,
}

impl Default for L1WaveletConfig {
    fn default() -> Self {
        Self { lambda: 0.0, max_iters: 200, wavelet: Wavelet::Daubechies4, decomposition_levels: 3, tol: 1e-6 }
    }
}

impl L1WaveletConfig {
    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Complex soft-thresholding: shrinks the magnitude by `t`, keeps the phase.
#[inline]
pub fn soft_threshold(v: Complex64, t: f64) -> Complex64 {
    let mag = v.norm();
    if mag <= t {
        Complex64::new(0.0, 0.0)
    } else {
        v * ((mag - t) / mag)
    }
}

/// Result of a FISTA run.
#[derive(Clone, Debug)]
pub struct L1WaveletOutput {
    pub image: ComplexImage,
    /// Objective at the accepted iterate after each iteration.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub lipschitz: f64,
}

struct Problem<'a> {
    op: &'a MotionOperator,
    y: &'a KSpaceData,
    motion: &'a MotionTrajectory,
    lambda: f64,
    levels: usize,
}

impl Problem<'_> {
    fn objective(&self, x: &ComplexImage) -> Result<f64> {
        let data = 0.5 * self.op.fidelity(self.y, x, &self.motion)?;
        Ok(data + self.lambda * wavelet_forward(x, self.levels).detail_l1())
    }

    fn gradient(&self, x: &ComplexImage) -> Result<ComplexImage> {
        let mut r = self.op.forward(x, &self.motion)?;
        r.samples.iter_mut().zip(&self.y.samples).for_each(|(a, b)| *a -= b);
        self.op.adjoint(&r, &self.motion)
    }

    fn prox(&self, v: &ComplexImage, t: f64) -> ComplexImage {
        let mut w = wavelet_forward(v, self.levels);
        for i in 0..w.data.len() {
            if !w.is_approx(i) {
                w.data[i] = soft_threshold(w.data[i], t);
            }
        }
        wavelet_adjoint(&w, v.side())
    }
}

pub fn l1_wavelet_reconstruct(y: &KSpaceData, maps: &CoilMaps, traj: &SampledTrajectory, cfg: &L1WaveletConfig) -> Result<ComplexImage> {
    Ok(l1_wavelet_solve(y, maps, traj, cfg)?.image)
}

/// Monotone FISTA with adaptive restart; step `1/L` with `L` from power
/// iteration on `A_0^H A_0`.
pub fn l1_wavelet_solve(y: &KSpaceData, maps: &CoilMaps, traj: &SampledTrajectory, cfg: &L1WaveletConfig) -> Result<L1WaveletOutput> {
    l1_wavelet_solve_with_motion(y, maps, traj, &MotionTrajectory::zeros(traj.num_trs()), cfg)
}

/// [`l1_wavelet_solve`] with the forward model `A_kappa` for a known motion
/// trajectory, e.g. to score a motion estimate.
pub fn l1_wavelet_solve_with_motion(
    y: &KSpaceData,
    maps: &CoilMaps,
    traj: &SampledTrajectory,
    motion: &MotionTrajectory,
    cfg: &L1WaveletConfig,
) -> Result<L1WaveletOutput> {
    cfg.validate()?;
    let op = MotionOperator::new(maps, traj)?;
    let lip = 1.01 * op.lipschitz(30, 0x11f)?;
    if !(lip > 0.0) {
        return Err(Error::NonFinite(format!("Lipschitz estimate {lip}")));
    }
    let problem = Problem {
        op: &op,
        y,
        motion,
        lambda: cfg.lambda,
        levels: cfg.decomposition_levels,
    };
    let n = traj.n;
    let mut x = ComplexImage::zeros(n);
    let mut fx = problem.objective(&x)?;
    let mut momentum = x.clone();
    let mut t = 1.0f64;
    let mut objective = Vec::with_capacity(cfg.max_iters);
    let mut iterations = 0;
    for _ in 0..cfg.max_iters {
        iterations += 1;
        let mut step = momentum.clone();
        step.axpy(Complex64::new(-1.0 / lip, 0.0), &problem.gradient(&momentum)?);
        let z = problem.prox(&step, cfg.lambda / lip);
        if !z.is_finite() {
            return Err(Error::NonFinite("FISTA iterate".into()));
        }
        let fz = problem.objective(&z)?;
        let change = z.sub(&x).norm() / z.norm().max(f64::MIN_POSITIVE);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let x_prev = x.clone();
        if fz <= fx {
            x = z.clone();
            fx = fz;
            momentum = x.clone();
            momentum.axpy(Complex64::new(t / t_next, 0.0), &z.sub(&x));
            momentum.axpy(Complex64::new((t - 1.0) / t_next, 0.0), &x.sub(&x_prev));
            t = t_next;
        } else {
            // restart from the last accepted iterate
            momentum = x.clone();
            t = 1.0;
        }
        objective.push(fx);
        if change < cfg.tol {
            break;
        }
    }
    Ok(L1WaveletOutput { image: x, objective, iterations, lipschitz: lip })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_soft_threshold() {
        assert!((soft_threshold(Complex64::new(0.5, 0.0), 0.2) - Complex64::new(0.3, 0.0)).norm() < 1e-15);
        assert_eq!(soft_threshold(Complex64::new(-0.1, 0.0), 0.2), Complex64::new(0.0, 0.0));
        assert!((soft_threshold(Complex64::new(-0.5, 0.0), 0.2) - Complex64::new(-0.3, 0.0)).norm() < 1e-15);
        let v = soft_threshold(Complex64::new(3.0, 4.0), 1.0);
        assert!((v - Complex64::new(2.4, 3.2)).norm() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let cfg = L1WaveletConfig { lambda: -1.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = L1WaveletConfig { max_iters: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
