use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use super::ComplexImage;

/// Square 2D FFT over a row-major buffer. Both directions are unnormalised.
#[derive(Clone)]
pub struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("n", &self.n).finish()
    }
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// In place `X[m] = sum_r x[r] exp(-2 pi i m.r / n)`.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(&self.forward, data);
    }

    /// In place `x[r] = sum_m X[m] exp(+2 pi i m.r / n)` (no 1/n^2 factor).
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(&self.inverse, data);
    }

    fn run(&self, plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        let n = self.n;
        assert_eq!(data.len(), n * n);
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        // rows
        plan.process_with_scratch(data, &mut scratch);
        // columns
        let mut column = vec![Complex64::new(0.0, 0.0); n];
        for col in 0..n {
            for row in 0..n {
                column[row] = data[row * n + col];
            }
            plan.process_with_scratch(&mut column, &mut scratch);
            for row in 0..n {
                data[row * n + col] = column[row];
            }
        }
    }
}

/// Exact spectrum on the Cartesian grid `k = 2 pi (q - n/2) / n`, using the
/// same `exp(-i k.r)` convention as the non-uniform transform. Output is
/// indexed like [`super::KCoords::cartesian`].
pub fn centered_fft(image: &ComplexImage) -> ComplexImage {
    let n = image.side();
    let fft = Fft2::new(n);
    let mut buf = ifftshift(image.data(), n);
    fft.forward(&mut buf);
    ComplexImage::from_vec(n, n, fftshift(&buf, n)).expect("square")
}

/// Inverse of [`centered_fft`], including the `1/n^2` factor.
pub fn centered_ifft(spectrum: &ComplexImage) -> ComplexImage {
    let n = spectrum.side();
    let fft = Fft2::new(n);
    let mut buf = ifftshift(spectrum.data(), n);
    fft.inverse(&mut buf);
    let scale = 1.0 / (n * n) as f64;
    buf.iter_mut().for_each(|v| *v *= scale);
    ComplexImage::from_vec(n, n, fftshift(&buf, n)).expect("square")
}

/// Moves the centre sample (index n/2) to index 0 along both axes.
pub fn ifftshift(data: &[Complex64], n: usize) -> Vec<Complex64> {
    let h = n / 2;
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for row in 0..n {
        for col in 0..n {
            out[((row + n - h) % n) * n + (col + n - h) % n] = data[row * n + col];
        }
    }
    out
}

/// Moves index 0 to the centre (index n/2) along both axes.
pub fn fftshift(data: &[Complex64], n: usize) -> Vec<Complex64> {
    let h = n / 2;
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for row in 0..n {
        for col in 0..n {
            out[((row + h) % n) * n + (col + h) % n] = data[row * n + col];
        }
    }
    out
}
