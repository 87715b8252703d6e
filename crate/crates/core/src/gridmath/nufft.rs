//! Kaiser-Bessel gridding NUFFT between an `n x n` image and arbitrary 2D
//! k-space locations.
//!
//! The image is pre-divided by the kernel's Fourier transform, zero-padded to
//! an oversampled `m x m` grid and transformed; off-grid samples are then
//! interpolated from the periodic oversampled spectrum. The adjoint runs the
//! same steps transposed, so it is the exact conjugate transpose of the
//! forward map (no density compensation).

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

use super::fft::Fft2;
use super::{ComplexImage, KCoords};
use crate::{Error, Result};

pub const OVERSAMPLING: usize = 2;
pub const KERNEL_WIDTH: usize = 7;

const MAX_TAPS: usize = KERNEL_WIDTH + 1;

/// Modified Bessel function of the first kind, order zero.
pub fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * kf);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

#[derive(Clone, Copy, Debug)]
struct Taps {
    index: [usize; MAX_TAPS],
    weight: [f64; MAX_TAPS],
    count: usize,
}

const TABLE_SIZE: usize = 1 << 15;

/// Separable Kaiser-Bessel interpolation kernel on the oversampled grid.
#[derive(Clone, Debug)]
pub struct KaiserBessel {
    width: f64,
    beta: f64,
    grid: usize,
    /// Kernel sampled on `[0, width/2]`, interpolated linearly.
    table: Arc<[f64]>,
}

impl KaiserBessel {
    pub fn new(grid: usize) -> Self {
        let w = KERNEL_WIDTH as f64;
        let alpha = OVERSAMPLING as f64;
        // Beatty et al. shape parameter for the given width and oversampling.
        let beta = PI * ((w / alpha).powi(2) * (alpha - 0.5).powi(2) - 0.8).sqrt();
        let mut kb = Self { width: w, beta, grid, table: Arc::from(Vec::new()) };
        let step = 0.5 * w / TABLE_SIZE as f64;
        kb.table = (0..=TABLE_SIZE + 1).map(|i| kb.eval(i as f64 * step)).collect();
        kb
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Kernel value at a distance `u` measured in oversampled grid cells.
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        let t = 2.0 * u / self.width;
        let s = 1.0 - t * t;
        if s < 0.0 {
            0.0
        } else {
            bessel_i0(self.beta * s.sqrt())
        }
    }

    /// Continuous Fourier transform of the kernel (as a function of k in
    /// radians per pixel) evaluated at the spatial offset `r`.
    pub fn fourier(&self, r: f64) -> f64 {
        let support = self.width * 2.0 * PI / self.grid as f64;
        let a = 0.5 * support * r;
        let d = self.beta * self.beta - a * a;
        if d > 1e-12 {
            let s = d.sqrt();
            support * s.sinh() / s
        } else if d < -1e-12 {
            let s = (-d).sqrt();
            support * s.sin() / s
        } else {
            support
        }
    }

    #[inline]
    fn lookup(&self, u: f64) -> f64 {
        let pos = u.abs() * (2.0 * TABLE_SIZE as f64 / self.width);
        let i = pos as usize;
        if i >= TABLE_SIZE {
            return if i == TABLE_SIZE { self.table[TABLE_SIZE] } else { 0.0 };
        }
        let f = pos - i as f64;
        self.table[i] + f * (self.table[i + 1] - self.table[i])
    }

    #[inline]
    fn taps(&self, g: f64) -> Taps {
        let half = 0.5 * self.width;
        let start = (g - half).ceil() as i64;
        let end = (g + half).floor() as i64;
        let mut taps = Taps { index: [0; MAX_TAPS], weight: [0.0; MAX_TAPS], count: 0 };
        for m in start..=end {
            if taps.count == MAX_TAPS {
                break;
            }
            taps.index[taps.count] = m.rem_euclid(self.grid as i64) as usize;
            taps.weight[taps.count] = self.lookup(g - m as f64);
            taps.count += 1;
        }
        taps
    }
}

/// Reusable transform plan for one image size.
#[derive(Clone, Debug)]
pub struct NufftPlan {
    n: usize,
    grid: usize,
    kernel: KaiserBessel,
    /// Per-axis deapodisation factor for image index `0..n`.
    deapod: Vec<f64>,
    fft: Fft2,
}

/// Oversampled, pre-corrected spectrum of one image; sampling it at any
/// coordinate evaluates the forward transform there.
#[derive(Clone, Debug)]
pub struct Spectrum {
    grid: usize,
    kernel: KaiserBessel,
    data: Vec<Complex64>,
}

impl NufftPlan {
    pub fn new(n: usize) -> Self {
        let grid = OVERSAMPLING * n;
        let kernel = KaiserBessel::new(grid);
        let half = (n / 2) as f64;
        let deapod = (0..n)
            .map(|i| 2.0 * PI / (grid as f64 * kernel.fourier(i as f64 - half)))
            .collect();
        Self { n, grid, kernel, deapod, fft: Fft2::new(grid) }
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn grid_size(&self) -> usize {
        self.grid
    }

    #[inline]
    fn grid_coord(&self, k: f64) -> f64 {
        k * self.grid as f64 / (2.0 * PI)
    }

    fn check_image(&self, image: &ComplexImage) -> Result<()> {
        if image.side() != self.n {
            return Err(Error::Dimension(format!(
                "plan built for {0}x{0}, image is {1}x{1}",
                self.n,
                image.side()
            )));
        }
        Ok(())
    }

    /// Pre-corrects, zero-pads and transforms `image` onto the oversampled grid.
    pub fn spectrum(&self, image: &ComplexImage) -> Result<Spectrum> {
        self.check_image(image)?;
        let (n, m) = (self.n, self.grid);
        let h = n / 2;
        let mut data = vec![Complex64::new(0.0, 0.0); m * m];
        for row in 0..n {
            let gr = (row + m - h) % m;
            for col in 0..n {
                let gc = (col + m - h) % m;
                data[gr * m + gc] = image[(row, col)] * (self.deapod[row] * self.deapod[col]);
            }
        }
        self.fft.forward(&mut data);
        Ok(Spectrum { grid: m, kernel: self.kernel.clone(), data })
    }

    pub fn forward(&self, image: &ComplexImage, coords: &KCoords) -> Result<Vec<Complex64>> {
        if coords.is_empty() {
            return Err(Error::EmptyCoords);
        }
        Ok(self.spectrum(image)?.sample_all(coords.as_slice()))
    }

    /// Accumulates kernel-weighted samples onto an oversampled grid buffer.
    pub fn spread(&self, grid: &mut [Complex64], samples: &[Complex64], coords: &[[f64; 2]]) {
        let m = self.grid;
        debug_assert_eq!(grid.len(), m * m);
        for (y, k) in samples.iter().zip(coords) {
            let tx = self.kernel.taps(self.grid_coord(k[0]));
            let ty = self.kernel.taps(self.grid_coord(k[1]));
            for a in 0..ty.count {
                let row = &mut grid[ty.index[a] * m..(ty.index[a] + 1) * m];
                let wy = *y * ty.weight[a];
                for b in 0..tx.count {
                    row[tx.index[b]] += wy * tx.weight[b];
                }
            }
        }
    }

    /// [`Self::spread`] for several sample sets on the same coordinates,
    /// sharing the kernel weights. `samples[c]` is spread onto `grids[c]`.
    pub fn spread_each(&self, grids: &mut [Vec<Complex64>], samples: &[&[Complex64]], coords: &[[f64; 2]]) {
        let m = self.grid;
        for (j, k) in coords.iter().enumerate() {
            let tx = self.kernel.taps(self.grid_coord(k[0]));
            let ty = self.kernel.taps(self.grid_coord(k[1]));
            for (grid, ys) in grids.iter_mut().zip(samples) {
                let y = ys[j];
                for a in 0..ty.count {
                    let row = &mut grid[ty.index[a] * m..(ty.index[a] + 1) * m];
                    let wy = y * ty.weight[a];
                    for b in 0..tx.count {
                        row[tx.index[b]] += wy * tx.weight[b];
                    }
                }
            }
        }
    }

    pub fn empty_grid(&self) -> Vec<Complex64> {
        vec![Complex64::new(0.0, 0.0); self.grid * self.grid]
    }

    /// Inverse FFT of a spread grid, cropped and deapodised to the image.
    pub fn finish_adjoint(&self, mut grid: Vec<Complex64>) -> ComplexImage {
        let (n, m) = (self.n, self.grid);
        let h = n / 2;
        self.fft.inverse(&mut grid);
        ComplexImage::from_fn(n, |row, col| {
            let gr = (row + m - h) % m;
            let gc = (col + m - h) % m;
            grid[gr * m + gc] * (self.deapod[row] * self.deapod[col])
        })
    }

    pub fn adjoint(&self, samples: &[Complex64], coords: &KCoords) -> Result<ComplexImage> {
        if samples.len() != coords.len() {
            return Err(Error::LengthMismatch { expected: coords.len(), actual: samples.len() });
        }
        let mut grid = self.empty_grid();
        self.spread(&mut grid, samples, coords.as_slice());
        Ok(self.finish_adjoint(grid))
    }
}

impl Spectrum {
    /// Interpolated value of the image's transform at `k` (radians/pixel).
    #[inline]
    pub fn sample(&self, k: [f64; 2]) -> Complex64 {
        let m = self.grid;
        let scale = m as f64 / (2.0 * PI);
        let tx = self.kernel.taps(k[0] * scale);
        let ty = self.kernel.taps(k[1] * scale);
        let mut acc = Complex64::new(0.0, 0.0);
        for a in 0..ty.count {
            let row = &self.data[ty.index[a] * m..(ty.index[a] + 1) * m];
            let mut racc = Complex64::new(0.0, 0.0);
            for b in 0..tx.count {
                racc += row[tx.index[b]] * tx.weight[b];
            }
            acc += racc * ty.weight[a];
        }
        acc
    }

    /// Samples several spectra of the same size at `k`, sharing the kernel
    /// weights. `out[c]` receives the value of `spectra[c]`.
    pub fn sample_each(spectra: &[Spectrum], k: [f64; 2], out: &mut [Complex64]) {
        let Some(first) = spectra.first() else { return };
        let m = first.grid;
        let scale = m as f64 / (2.0 * PI);
        let tx = first.kernel.taps(k[0] * scale);
        let ty = first.kernel.taps(k[1] * scale);
        for (spec, o) in spectra.iter().zip(out.iter_mut()) {
            let mut acc = Complex64::new(0.0, 0.0);
            for a in 0..ty.count {
                let row = &spec.data[ty.index[a] * m..(ty.index[a] + 1) * m];
                let mut racc = Complex64::new(0.0, 0.0);
                for b in 0..tx.count {
                    racc += row[tx.index[b]] * tx.weight[b];
                }
                acc += racc * ty.weight[a];
            }
            *o = acc;
        }
    }

    pub fn sample_all(&self, coords: &[[f64; 2]]) -> Vec<Complex64> {
        if coords.len() >= 4096 {
            coords.par_iter().map(|&k| self.sample(k)).collect()
        } else {
            coords.iter().map(|&k| self.sample(k)).collect()
        }
    }
}

/// Forward NUFFT `y_j = sum_n x_n exp(-i k_j . r_n)`.
pub fn nufft_forward(image: &ComplexImage, coords: &KCoords) -> Result<Vec<Complex64>> {
    if coords.is_empty() {
        return Err(Error::EmptyCoords);
    }
    NufftPlan::new(image.side()).forward(image, coords)
}

/// Adjoint NUFFT `x_n = sum_j y_j exp(+i k_j . r_n)` onto an `n x n` grid.
pub fn nufft_adjoint(samples: &[Complex64], coords: &KCoords, n: usize) -> Result<ComplexImage> {
    NufftPlan::new(n).adjoint(samples, coords)
}
