use num_complex::Complex64;
use std::ops::{Index, IndexMut};

use crate::{Error, Result};

/// Square complex image stored row-major.
///
/// Pixel `(row, col)` sits at the spatial offset `r = (col - n/2, row - n/2)`
/// from the grid centre, so `x` runs along columns and `y` along rows.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexImage {
    n: usize,
    data: Vec<Complex64>,
}

impl ComplexImage {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<Complex64>) -> Result<Self> {
        if width != height {
            return Err(Error::NotSquare { width, height });
        }
        if data.len() != width * height {
            return Err(Error::LengthMismatch { expected: width * height, actual: data.len() });
        }
        Ok(Self { n: width, data })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for row in 0..n {
            for col in 0..n {
                data.push(f(row, col));
            }
        }
        Self { n, data }
    }

    /// Unit value at the grid centre `r = (0, 0)`.
    pub fn impulse(n: usize) -> Self {
        let mut img = Self::zeros(n);
        img[(n / 2, n / 2)] = Complex64::new(1.0, 0.0);
        img
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        self.n
    }

    pub fn height(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    /// Spatial offset of a row/column index from the grid centre.
    #[inline]
    pub fn offset(&self, index: usize) -> f64 {
        index as f64 - (self.n / 2) as f64
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn magnitude(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.norm()).collect()
    }

    pub fn max_magnitude(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: Complex64, other: &ComplexImage) {
        debug_assert_eq!(self.n, other.n);
        self.data.iter_mut().zip(&other.data).for_each(|(s, o)| *s += a * o);
    }

    pub fn sub(&self, other: &ComplexImage) -> ComplexImage {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        ComplexImage { n: self.n, data }
    }

    /// Hermitian inner product `sum conj(self) * other`.
    pub fn dot(&self, other: &ComplexImage) -> Complex64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    /// Element-wise product.
    pub fn hadamard(&self, other: &ComplexImage) -> ComplexImage {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect();
        ComplexImage { n: self.n, data }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

impl Index<(usize, usize)> for ComplexImage {
    type Output = Complex64;

    fn index(&self, (row, col): (usize, usize)) -> &Complex64 {
        &self.data[row * self.n + col]
    }
}

impl IndexMut<(usize, usize)> for ComplexImage {
    fn index_mut(&mut self, (row, col): (usize, usize)) -> &mut Complex64 {
        &mut self.data[row * self.n + col]
    }
}

/// 2D k-space coordinates in radians per pixel.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KCoords(pub Vec<[f64; 2]>);

impl KCoords {
    pub fn new(points: Vec<[f64; 2]>) -> Self {
        Self(points)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[[f64; 2]] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, [f64; 2]> {
        self.0.iter()
    }

    /// Every on-grid Cartesian coordinate `2 pi (q - n/2) / n`, row-major
    /// with `ky` varying slowest.
    pub fn cartesian(n: usize) -> Self {
        let step = 2.0 * std::f64::consts::PI / n as f64;
        let half = (n / 2) as f64;
        let mut pts = Vec::with_capacity(n * n);
        for row in 0..n {
            for col in 0..n {
                pts.push([(col as f64 - half) * step, (row as f64 - half) * step]);
            }
        }
        Self(pts)
    }
}

impl From<Vec<[f64; 2]>> for KCoords {
    fn from(v: Vec<[f64; 2]>) -> Self {
        Self(v)
    }
}
