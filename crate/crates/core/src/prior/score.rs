use num_complex::Complex64;
use std::f64::consts::{PI, SQRT_2};

use crate::baseline::{wavelet_adjoint, wavelet_forward};
use crate::gridmath::{centered_fft, centered_ifft, ComplexImage};
use crate::{Error, Result};

/// Index and value of the current smoothing level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseLevel {
    pub index: usize,
    pub sigma: f64,
}

impl NoiseLevel {
    pub fn new(index: usize, sigma: f64) -> Self {
        Self { index, sigma }
    }
}

/// Approximates `grad_x log p_sigma(x)`, the score of the prior smoothed by
/// Gaussian noise of std `sigma` per real component. Real and imaginary parts
/// are independent real coordinates.
pub trait ScoreProvider: Send + Sync {
    fn score(&self, x: &ComplexImage, level: NoiseLevel) -> Result<ComplexImage>;
}

/// Component-wise `-(x - mean) / (v + sigma^2)`.
pub fn gaussian_score(mean: &ComplexImage, variance: &[f64], x: &ComplexImage, sigma: f64) -> Result<ComplexImage> {
    if variance.len() != x.len() || mean.len() != x.len() {
        return Err(Error::Dimension("gaussian prior shape does not match the image".into()));
    }
    if variance.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidParameter("variance must be positive".into()));
    }
    let s2 = sigma * sigma;
    let data = x
        .data()
        .iter()
        .zip(mean.data())
        .zip(variance)
        .map(|((xv, m), v)| -(xv - m) / (v + s2))
        .collect();
    ComplexImage::from_vec(x.side(), x.side(), data)
}

/// Basis in which a [`GaussianScore`] covariance is diagonal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GaussianBasis {
    #[default]
    Identity,
    /// Unitary centred DFT; the variance is a power spectrum.
    Fourier,
}

/// Gaussian prior with diagonal covariance in a chosen orthonormal basis.
#[derive(Clone, Debug)]
pub struct GaussianScore {
    pub mean: ComplexImage,
    pub variance: Vec<f64>,
    pub basis: GaussianBasis,
}

impl GaussianScore {
    pub fn new(mean: ComplexImage, variance: Vec<f64>) -> Result<Self> {
        Self::with_basis(mean, variance, GaussianBasis::Identity)
    }

    pub fn with_basis(mean: ComplexImage, variance: Vec<f64>, basis: GaussianBasis) -> Result<Self> {
        if variance.len() != mean.len() {
            return Err(Error::Dimension("variance length must match the mean image".into()));
        }
        if variance.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidParameter("variance must be positive".into()));
        }
        Ok(Self { mean, variance, basis })
    }

    /// Zero-mean prior with the same variance everywhere.
    pub fn isotropic(n: usize, variance: f64) -> Result<Self> {
        Self::new(ComplexImage::zeros(n), vec![variance; n * n])
    }

    /// `log p_sigma(x)` up to an additive constant.
    pub fn log_density(&self, x: &ComplexImage, sigma: f64) -> f64 {
        let d = x.sub(&self.mean);
        let d = match self.basis {
            GaussianBasis::Identity => d,
            GaussianBasis::Fourier => unitary_fft(&d),
        };
        let s2 = sigma * sigma;
        -0.5 * d.data().iter().zip(&self.variance).map(|(v, var)| v.norm_sqr() / (var + s2)).sum::<f64>()
    }
}

fn unitary_fft(x: &ComplexImage) -> ComplexImage {
    centered_fft(x).scaled(1.0 / x.side() as f64)
}

fn unitary_ifft(x: &ComplexImage) -> ComplexImage {
    centered_ifft(x).scaled(x.side() as f64)
}

impl ScoreProvider for GaussianScore {
    fn score(&self, x: &ComplexImage, level: NoiseLevel) -> Result<ComplexImage> {
        match self.basis {
            GaussianBasis::Identity => gaussian_score(&self.mean, &self.variance, x, level.sigma),
            GaussianBasis::Fourier => {
                if x.len() != self.mean.len() {
                    return Err(Error::Dimension("gaussian prior shape does not match the image".into()));
                }
                let d = unitary_fft(&x.sub(&self.mean));
                let s2 = level.sigma * level.sigma;
                let data = d.data().iter().zip(&self.variance).map(|(v, var)| -v / (var + s2)).collect();
                Ok(unitary_ifft(&ComplexImage::from_vec(x.side(), x.side(), data)?))
            }
        }
    }
}

/// Sparsity prior: independent Laplace densities `(beta/2) exp(-beta |w|)`
/// on the real and imaginary parts of every Daubechies-4 detail coefficient,
/// and a wide zero-mean Gaussian on the approximation band.
///
/// Because the transform is orthonormal, smoothing the image with isotropic
/// Gaussian noise smooths each coefficient independently, so the score is the
/// exact score of the Gaussian-smoothed density.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveletLaplaceScore {
    pub beta: f64,
    pub approx_variance: f64,
    pub levels: usize,
    /// Rate divisor per coarser scale: scale `j` uses `beta / growth^(j-1)`.
    pub scale_growth: f64,
}

impl WaveletLaplaceScore {
    pub fn new(beta: f64, approx_variance: f64, levels: usize) -> Result<Self> {
        if !(beta > 0.0) || !(approx_variance > 0.0) {
            return Err(Error::InvalidParameter("beta and approx_variance must be positive".into()));
        }
        Ok(Self { beta, approx_variance, levels, scale_growth: 1.0 })
    }

    pub fn with_scale_growth(mut self, growth: f64) -> Result<Self> {
        if !(growth > 0.0) {
            return Err(Error::InvalidParameter("scale_growth must be positive".into()));
        }
        self.scale_growth = growth;
        Ok(self)
    }

    pub fn beta_at(&self, scale: usize) -> f64 {
        self.beta / self.scale_growth.powi(scale as i32 - 1)
    }
}

impl ScoreProvider for WaveletLaplaceScore {
    fn score(&self, x: &ComplexImage, level: NoiseLevel) -> Result<ComplexImage> {
        let mut w = wavelet_forward(x, self.levels);
        let s = level.sigma;
        let approx = 1.0 / (self.approx_variance + s * s);
        for i in 0..w.data.len() {
            let v = w.data[i];
            w.data[i] = match w.scale_of(i) {
                None => -v * approx,
                Some(j) => {
                    let beta = self.beta_at(j);
                    Complex64::new(smoothed_laplace_score(v.re, beta, s), smoothed_laplace_score(v.im, beta, s))
                }
            };
        }
        Ok(wavelet_adjoint(&w, x.side()))
    }
}

/// `log Phi(x)` for the standard normal CDF, accurate in both tails.
pub fn log_ndtr(x: f64) -> f64 {
    if x > 0.0 {
        (-0.5 * libm::erfc(x / SQRT_2)).ln_1p()
    } else if x > -20.0 {
        (0.5 * libm::erfc(-x / SQRT_2)).ln()
    } else {
        let z = 1.0 / (x * x);
        let series = 1.0 - z + 3.0 * z * z - 15.0 * z * z * z + 105.0 * z * z * z * z;
        -0.5 * x * x - (-x).ln() - 0.5 * (2.0 * PI).ln() + series.ln()
    }
}

/// Score of a Laplace density with rate `beta` convolved with `N(0, s^2)`.
///
/// With `A = exp(-beta w) Phi((w - beta s^2)/s)` and
/// `B = exp(beta w) Phi(-(w + beta s^2)/s)` the smoothed density is
/// proportional to `A + B` and its log-derivative is `beta (B - A)/(A + B)`.
pub fn smoothed_laplace_score(w: f64, beta: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return if w > 0.0 {
            -beta
        } else if w < 0.0 {
            beta
        } else {
            0.0
        };
    }
    let log_a = -beta * w + log_ndtr((w - beta * s * s) / s);
    let log_b = beta * w + log_ndtr(-(w + beta * s * s) / s);
    beta * (0.5 * (log_b - log_a)).tanh()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn random(n: usize, seed: u64) -> ComplexImage {
        let mut r = rng::seeded(seed);
        ComplexImage::from_fn(n, |_, _| rng::complex_normal(&mut r, 1.0))
    }

    #[test]
    fn standard_normal_cases() {
        let x = random(8, 1);
        let zero = ComplexImage::zeros(8);
        let ones = vec![1.0; 64];
        let s0 = gaussian_score(&zero, &ones, &x, 0.0).unwrap();
        assert!(s0.sub(&x.scaled(-1.0)).norm() < 1e-15);
        let s1 = gaussian_score(&zero, &ones, &x, 1.0).unwrap();
        assert!(s1.sub(&x.scaled(-0.5)).norm() < 1e-15);
        let m = random(8, 2);
        let v: Vec<f64> = (0..64).map(|i| 0.5 + i as f64 * 0.1).collect();
        assert!(gaussian_score(&m, &v, &m, 0.3).unwrap().norm() == 0.0);
        assert!(gaussian_score(&m, &vec![0.0; 64], &m, 0.3).is_err());
    }

    #[test]
    fn gaussian_score_matches_finite_differences() {
        let n = 8;
        let mean = random(n, 3);
        let var: Vec<f64> = (0..n * n).map(|i| 0.2 + (i % 7) as f64 * 0.3).collect();
        for basis in [GaussianBasis::Identity, GaussianBasis::Fourier] {
            let prior = GaussianScore::with_basis(mean.clone(), var.clone(), basis).unwrap();
            let x = random(n, 4);
            let sigma = 0.4;
            let score = prior.score(&x, NoiseLevel::new(0, sigma)).unwrap();
            let h = 1e-5;
            for i in 0..n * n {
                for (part, unit) in [(0, Complex64::new(h, 0.0)), (1, Complex64::new(0.0, h))] {
                    let mut xp = x.clone();
                    xp.data_mut()[i] += unit;
                    let mut xm = x.clone();
                    xm.data_mut()[i] -= unit;
                    let fd = (prior.log_density(&xp, sigma) - prior.log_density(&xm, sigma)) / (2.0 * h);
                    let an = if part == 0 { score.data()[i].re } else { score.data()[i].im };
                    assert!((fd - an).abs() <= 1e-6, "{basis:?} {i} {part}: {fd} vs {an}");
                }
            }
        }
    }

    #[test]
    fn gaussian_score_norm_identity() {
        let mean = random(8, 5);
        let x = random(8, 6);
        let prior = GaussianScore::new(mean.clone(), vec![2.0; 64]).unwrap();
        let s = prior.score(&x, NoiseLevel::new(0, 0.5)).unwrap();
        assert!((s.norm() - x.sub(&mean).norm() / 2.25).abs() < 1e-12);
    }

    #[test]
    fn log_ndtr_continuity() {
        for &x in &[-40.0, -25.0, -20.0, -5.0, -1.0, 0.0, 1.0, 8.0] {
            let lo = log_ndtr(x - 1e-9);
            let hi = log_ndtr(x + 1e-9);
            assert!((hi - lo).abs() < 1e-6 * (1.0 + x.abs()), "{x}");
        }
        assert!((log_ndtr(0.0) - 0.5f64.ln()).abs() < 1e-15);
        // asymptotic branch meets the erfc branch
        let a = (0.5 * libm::erfc(20.0 / SQRT_2)).ln();
        let z: f64 = 1.0 / 400.0;
        let b = -200.0 - 20f64.ln() - 0.5 * (2.0 * PI).ln() + (1.0 - z + 3.0 * z * z - 15.0 * z.powi(3) + 105.0 * z.powi(4)).ln();
        assert!((a - b).abs() < 1e-9);
    }

    /// Smoothed Laplace log-density by quadrature of the convolution.
    fn smoothed_laplace_log_density(w: f64, beta: f64, s: f64) -> f64 {
        // fixed grid with a node on the kink at zero
        let steps = 200_000;
        let hi = 3.0 + 12.0 * s;
        let lo = -hi;
        let h = (hi - lo) / steps as f64;
        let mut acc = 0.0;
        for i in 0..=steps {
            let u = lo + i as f64 * h;
            let weight = if i == 0 || i == steps { 0.5 } else { 1.0 };
            acc += weight * (-beta * u.abs()).exp() * (-(w - u).powi(2) / (2.0 * s * s)).exp();
        }
        (acc * h).ln()
    }

    #[test]
    fn smoothed_laplace_score_matches_quadrature() {
        for &(beta, s) in &[(1.0, 1.0), (5.0, 0.3), (30.0, 0.05)] {
            for &w in &[-1.0, -0.2, -0.01, 0.0, 0.03, 0.4, 2.0] {
                let d = 1e-4 * s;
                let fd = (smoothed_laplace_log_density(w + d, beta, s) - smoothed_laplace_log_density(w - d, beta, s)) / (2.0 * d);
                let an = smoothed_laplace_score(w, beta, s);
                assert!((fd - an).abs() <= 1e-4 * beta.max(1.0), "beta={beta} s={s} w={w}: {fd} vs {an}");
            }
        }
        assert_eq!(smoothed_laplace_score(0.0, 3.0, 0.5), 0.0);
        assert!(smoothed_laplace_score(1e3, 100.0, 0.01).is_finite());
        assert_eq!(smoothed_laplace_score(2.0, 3.0, 0.0), -3.0);
    }

    #[test]
    fn wavelet_laplace_score_is_finite_and_odd() {
        let prior = WaveletLaplaceScore::new(20.0, 1.0, 3).unwrap();
        let x = random(16, 7);
        let s = prior.score(&x, NoiseLevel::new(0, 0.1)).unwrap();
        let sn = prior.score(&x.scaled(-1.0), NoiseLevel::new(0, 0.1)).unwrap();
        assert!(s.is_finite());
        let mut sum = s.clone();
        sum.axpy(Complex64::new(1.0, 0.0), &sn);
        assert!(sum.norm() < 1e-9 * s.norm());
    }
}
