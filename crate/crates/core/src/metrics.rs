//! NRMSE and rigid alignment of reconstructions to a reference.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gridmath::{centered_ifft, ComplexImage, KCoords, NufftPlan, Spectrum};
use crate::motion::MotionState;
use crate::{Error, Result};

/// `||est - ref|| / ||ref||`, on magnitudes when `magnitude_only` is set.
pub fn nrmse(estimate: &ComplexImage, reference: &ComplexImage, magnitude_only: bool) -> Result<f64> {
    if estimate.width() != reference.width() || estimate.height() != reference.height() {
        return Err(Error::Dimension(format!(
            "estimate is {}x{}, reference is {}x{}",
            estimate.width(),
            estimate.height(),
            reference.width(),
            reference.height()
        )));
    }
    let denom = reference.norm_sqr();
    if denom == 0.0 {
        return Err(Error::InvalidParameter("reference image is identically zero".into()));
    }
    let num: f64 = estimate
        .data()
        .iter()
        .zip(reference.data())
        .map(|(e, r)| if magnitude_only { (e.norm() - r.norm()).powi(2) } else { (e - r).norm_sqr() })
        .sum();
    Ok((num / denom).sqrt())
}

/// Rigid resampling with the forward-model conventions: the output spectrum
/// is `exp(-i k.phi) X(R_theta k)` on the Cartesian grid.
pub struct Resampler {
    n: usize,
    spectrum: Spectrum,
    grid: KCoords,
}

impl Resampler {
    pub fn new(image: &ComplexImage) -> Result<Self> {
        let n = image.side();
        let plan = NufftPlan::new(n);
        Ok(Self { n, spectrum: plan.spectrum(image)?, grid: KCoords::cartesian(n) })
    }

    /// Spectrum at the rotated grid, before translation.
    fn rotated(&self, theta: f64) -> Vec<Complex64> {
        let (s, c) = theta.to_radians().sin_cos();
        let pts: Vec<[f64; 2]> = self.grid.0.iter().map(|k| [c * k[0] - s * k[1], s * k[0] + c * k[1]]).collect();
        self.spectrum.sample_all(&pts)
    }

    fn translated(&self, rotated: &[Complex64], phi_x: f64, phi_y: f64) -> ComplexImage {
        let n = self.n;
        let data: Vec<Complex64> = rotated
            .iter()
            .zip(&self.grid.0)
            .map(|(v, k)| v * Complex64::from_polar(1.0, -(k[0] * phi_x + k[1] * phi_y)))
            .collect();
        centered_ifft(&ComplexImage::from_vec(n, n, data).expect("square"))
    }

    pub fn apply(&self, state: &MotionState) -> ComplexImage {
        self.translated(&self.rotated(state.theta), state.phi_x, state.phi_y)
    }
}

/// Applies `state` to `image` like the forward model does to the object.
pub fn rigid_transform(image: &ComplexImage, state: &MotionState) -> Result<ComplexImage> {
    Ok(Resampler::new(image)?.apply(state))
}

/// The transform undoing `state`.
pub fn inverse_transform(state: &MotionState) -> MotionState {
    let (s, c) = state.theta.to_radians().sin_cos();
    MotionState::new(
        -state.theta,
        -(c * state.phi_x - s * state.phi_y),
        -(s * state.phi_x + c * state.phi_y),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentSearch {
    pub theta_range: f64,
    pub theta_step: f64,
    pub phi_range: f64,
    pub phi_step: f64,
    pub refine_rounds: usize,
    pub resolution: f64,
    /// NRMSE decrease below which the identity is kept.
    pub min_gain: f64,
}

impl Default for AlignmentSearch {
    fn default() -> Self {
        Self { theta_range: 5.0, theta_step: 0.5, phi_range: 3.0, phi_step: 0.25, refine_rounds: 3, resolution: 0.01, min_gain: 1e-4 }
    }
}

fn grid_values(range: f64, step: f64) -> Vec<f64> {
    let m = (range / step).round() as i64;
    (-m..=m).map(|i| i as f64 * step).collect()
}

pub fn align_to_reference(estimate: &ComplexImage, reference: &ComplexImage) -> Result<(ComplexImage, MotionState)> {
    align_with(estimate, reference, &AlignmentSearch::default())
}

/// Finds the rigid transform of `estimate` minimizing magnitude NRMSE against
/// `reference`: exhaustive grid, then coordinate descent with step halving.
pub fn align_with(estimate: &ComplexImage, reference: &ComplexImage, search: &AlignmentSearch) -> Result<(ComplexImage, MotionState)> {
    nrmse(estimate, reference, true)?;
    let resampler = Resampler::new(estimate)?;
    let cost = |img: &ComplexImage| nrmse(img, reference, true).expect("checked dimensions");

    let thetas = grid_values(search.theta_range, search.theta_step);
    let phis = grid_values(search.phi_range, search.phi_step);
    // candidates are enumerated in (theta, phi_x, phi_y) order, so the first
    // minimum is the lowest-parameter tie
    let per_theta: Vec<(f64, MotionState)> = thetas
        .par_iter()
        .map(|&theta| {
            let rot = resampler.rotated(theta);
            let mut best = (f64::INFINITY, MotionState::default());
            for &px in &phis {
                for &py in &phis {
                    let c = cost(&resampler.translated(&rot, px, py));
                    if c < best.0 {
                        best = (c, MotionState::new(theta, px, py));
                    }
                }
            }
            best
        })
        .collect();
    let mut best = per_theta.into_iter().fold((f64::INFINITY, MotionState::default()), |a, b| if b.0 < a.0 { b } else { a });

    let mut steps = [search.theta_step / 2.0, search.phi_step / 2.0];
    loop {
        for _ in 0..search.refine_rounds {
            let mut moved = false;
            for param in 0..3 {
                let h = if param == 0 { steps[0] } else { steps[1] };
                for dir in [-1.0, 1.0] {
                    let mut cand = best.1;
                    *cand.get_mut(param) += dir * h;
                    let c = cost(&resampler.apply(&cand));
                    if c < best.0 {
                        best = (c, cand);
                        moved = true;
                    }
                }
            }
            if !moved {
                break;
            }
        }
        if steps[0] <= search.resolution && steps[1] <= search.resolution {
            break;
        }
        steps = steps.map(|s| (s / 2.0).max(search.resolution));
    }

    let identity = cost(estimate);
    if identity <= best.0 + search.min_gain {
        return Ok((estimate.clone(), MotionState::default()));
    }
    Ok((resampler.apply(&best.1), best.1))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub nrmse_raw: f64,
    pub nrmse_aligned: f64,
    pub alignment: MotionState,
    pub magnitude_only: bool,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain fields")
    }
}

pub fn evaluate(estimate: &ComplexImage, reference: &ComplexImage, magnitude_only: bool) -> Result<EvalReport> {
    let nrmse_raw = nrmse(estimate, reference, magnitude_only)?;
    let (aligned, alignment) = align_to_reference(estimate, reference)?;
    let nrmse_aligned = nrmse(&aligned, reference, magnitude_only)?;
    Ok(if nrmse_aligned <= nrmse_raw {
        EvalReport { nrmse_raw, nrmse_aligned, alignment, magnitude_only }
    } else {
        EvalReport { nrmse_raw, nrmse_aligned: nrmse_raw, alignment: MotionState::default(), magnitude_only }
    })
}
