use num_complex::Complex64;

use super::{NoiseLevel, ScoreProvider};
use crate::gridmath::ComplexImage;
use crate::{Error, Result};

/// Piecewise-smooth prior `exp(-beta * sum_p H(|grad x|_p))` with a Huber
/// penalty `H` on the isotropic complex gradient (forward differences,
/// replicated border).
///
/// The Huber threshold at level `s` is `8 beta s^2`, which caps the score's
/// curvature at `1/s^2` like a Gaussian-smoothed density.
#[derive(Clone, Debug, PartialEq)]
pub struct TotalVariationScore {
    pub beta: f64,
}

impl TotalVariationScore {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { beta })
    }

    pub fn threshold(&self, sigma: f64) -> f64 {
        8.0 * self.beta * sigma * sigma
    }

    /// `beta * sum_p H(|grad x|_p)`
    pub fn penalty(&self, x: &ComplexImage, sigma: f64) -> f64 {
        let delta = self.threshold(sigma);
        let (gx, gy) = gradient(x);
        gx.iter()
            .zip(&gy)
            .map(|(a, b)| {
                let t = (a.norm_sqr() + b.norm_sqr()).sqrt();
                if t <= delta {
                    t * t / (2.0 * delta)
                } else {
                    t - 0.5 * delta
                }
            })
            .sum::<f64>()
            * self.beta
    }
}

fn gradient(x: &ComplexImage) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = x.side();
    let d = x.data();
    let mut gx = vec![Complex64::new(0.0, 0.0); n * n];
    let mut gy = vec![Complex64::new(0.0, 0.0); n * n];
    for r in 0..n {
        for c in 0..n {
            let i = r * n + c;
            if c + 1 < n {
                gx[i] = d[i + 1] - d[i];
            }
            if r + 1 < n {
                gy[i] = d[i + n] - d[i];
            }
        }
    }
    (gx, gy)
}

impl ScoreProvider for TotalVariationScore {
    fn score(&self, x: &ComplexImage, level: NoiseLevel) -> Result<ComplexImage> {
        let n = x.side();
        let delta = self.threshold(level.sigma).max(f64::MIN_POSITIVE);
        let (mut gx, mut gy) = gradient(x);
        for (a, b) in gx.iter_mut().zip(gy.iter_mut()) {
            let t = (a.norm_sqr() + b.norm_sqr()).sqrt();
            let w = self.beta / t.max(delta);
            *a *= w;
            *b *= w;
        }
        // score = -D^T psi
        let mut out = ComplexImage::zeros(n);
        let o = out.data_mut();
        for r in 0..n {
            for c in 0..n {
                let i = r * n + c;
                if c + 1 < n {
                    o[i + 1] -= gx[i];
                    o[i] += gx[i];
                }
                if r + 1 < n {
                    o[i + n] -= gy[i];
                    o[i] += gy[i];
                }
            }
        }
        Ok(out)
    }
}
