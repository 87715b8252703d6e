//! Orthonormal multi-level 2D Daubechies-4 transform with periodic
//! boundaries, laid out in the usual Mallat pyramid.

use num_complex::Complex64;

use crate::gridmath::ComplexImage;

/// Daubechies scaling filter with four vanishing moments (eight taps).
const DB4_LOW: [f64; 8] = [
    0.230_377_813_308_855_23,
    0.714_846_570_552_541_5,
    0.630_880_767_929_590_4,
    -0.027_983_769_416_983_85,
    -0.187_034_811_718_881_14,
    0.030_841_381_835_986_965,
    0.032_883_011_666_982_945,
    -0.010_597_401_784_997_278,
];

fn db4_high() -> [f64; 8] {
    let mut g = [0.0; 8];
    for (k, v) in g.iter_mut().enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        *v = sign * DB4_LOW[7 - k];
    }
    g
}

/// Wavelet coefficients of a (possibly zero-padded) square image.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveletCoeffs {
    /// Padded side length, divisible by `2^levels`.
    pub side: usize,
    pub levels: usize,
    pub data: Vec<Complex64>,
}

impl WaveletCoeffs {
    /// Side of the coarsest approximation band (top-left corner).
    pub fn approx_side(&self) -> usize {
        self.side >> self.levels
    }

    pub fn is_approx(&self, index: usize) -> bool {
        let a = self.approx_side();
        index / self.side < a && index % self.side < a
    }

    /// Detail scale of a coefficient, 1 for the finest band, `None` in the
    /// approximation band.
    pub fn scale_of(&self, index: usize) -> Option<usize> {
        let m = (index / self.side).max(index % self.side);
        (1..=self.levels).find(|&j| m >= self.side >> j)
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Sum of coefficient magnitudes outside the approximation band.
    pub fn detail_l1(&self) -> f64 {
        self.data.iter().enumerate().filter(|(i, _)| !self.is_approx(*i)).map(|(_, v)| v.norm()).sum()
    }
}

fn padded_side(n: usize, levels: usize) -> usize {
    let block = 1usize << levels;
    n.div_ceil(block) * block
}

fn analyze(line: &mut [Complex64], buf: &mut [Complex64], high: &[f64; 8]) {
    let m = line.len();
    let half = m / 2;
    for i in 0..half {
        let mut a = Complex64::new(0.0, 0.0);
        let mut d = Complex64::new(0.0, 0.0);
        for k in 0..8 {
            let v = line[(2 * i + k) % m];
            a += v * DB4_LOW[k];
            d += v * high[k];
        }
        buf[i] = a;
        buf[half + i] = d;
    }
    line.copy_from_slice(&buf[..m]);
}

fn synthesize(line: &mut [Complex64], buf: &mut [Complex64], high: &[f64; 8]) {
    let m = line.len();
    let half = m / 2;
    buf[..m].iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
    for i in 0..half {
        let (a, d) = (line[i], line[half + i]);
        for k in 0..8 {
            buf[(2 * i + k) % m] += a * DB4_LOW[k] + d * high[k];
        }
    }
    line.copy_from_slice(&buf[..m]);
}

/// Applies `f` to every row then every column of the top-left `s x s` block.
fn separable(data: &mut [Complex64], side: usize, s: usize, rows_first: bool, f: &mut dyn FnMut(&mut [Complex64])) {
    let mut line = vec![Complex64::new(0.0, 0.0); s];
    let do_rows = |data: &mut [Complex64], f: &mut dyn FnMut(&mut [Complex64])| {
        for r in 0..s {
            f(&mut data[r * side..r * side + s]);
        }
    };
    let mut do_cols = |data: &mut [Complex64], f: &mut dyn FnMut(&mut [Complex64])| {
        for c in 0..s {
            for r in 0..s {
                line[r] = data[r * side + c];
            }
            f(&mut line);
            for r in 0..s {
                data[r * side + c] = line[r];
            }
        }
    };
    if rows_first {
        do_rows(data, f);
        do_cols(data, f);
    } else {
        do_cols(data, f);
        do_rows(data, f);
    }
}

/// Multi-level forward transform. Images whose side is not divisible by
/// `2^levels` are zero-padded at the bottom/right first.
pub fn wavelet_forward(x: &ComplexImage, levels: usize) -> WaveletCoeffs {
    let n = x.side();
    let side = padded_side(n, levels);
    let mut data = vec![Complex64::new(0.0, 0.0); side * side];
    for r in 0..n {
        data[r * side..r * side + n].copy_from_slice(&x.data()[r * n..(r + 1) * n]);
    }
    let high = db4_high();
    let mut buf = vec![Complex64::new(0.0, 0.0); side];
    let mut s = side;
    for _ in 0..levels {
        if s < 2 {
            break;
        }
        separable(&mut data, side, s, true, &mut |l| analyze(l, &mut buf, &high));
        s /= 2;
    }
    WaveletCoeffs { side, levels, data }
}

/// Adjoint (= inverse) of [`wavelet_forward`], cropped back to `n x n`.
pub fn wavelet_adjoint(coeffs: &WaveletCoeffs, n: usize) -> ComplexImage {
    let side = coeffs.side;
    let mut data = coeffs.data.clone();
    let high = db4_high();
    let mut buf = vec![Complex64::new(0.0, 0.0); side];
    let sizes: Vec<usize> = (0..coeffs.levels).map(|l| side >> l).filter(|&s| s >= 2).collect();
    for &s in sizes.iter().rev() {
        separable(&mut data, side, s, false, &mut |l| synthesize(l, &mut buf, &high));
    }
    ComplexImage::from_fn(n, |r, c| data[r * side + c])
}
