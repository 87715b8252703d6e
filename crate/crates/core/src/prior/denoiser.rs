//! Denoiser-backed score via Tweedie's relation `(D(x, sigma) - x) / sigma^2`.
//!
//! Denoiser parameter file, little-endian:
//!
//! ```text
//! magic    4 bytes  "JRDN"
//! version  u32      1
//! layers   u32      L
//! L times:
//!   rows   u32      odd
//!   cols   u32      odd
//!   weights rows*cols f64, row-major
//! ```
//!
//! Each layer is a circular 2D correlation applied to the real and imaginary
//! parts; layers are applied in file order.

use num_complex::Complex64;
use std::path::Path;

use super::{NoiseLevel, ScoreProvider};
use crate::gridmath::ComplexImage;
use crate::{Error, Result};

pub const DENOISER_MAGIC: &[u8; 4] = b"JRDN";
pub const DENOISER_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
}

/// Stack of circular convolution layers.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvDenoiser {
    pub layers: Vec<ConvLayer>,
}

impl ConvDenoiser {
    pub fn new(layers: Vec<ConvLayer>) -> Result<Self> {
        for (i, l) in layers.iter().enumerate() {
            if l.rows % 2 == 0 || l.cols % 2 == 0 || l.weights.len() != l.rows * l.cols {
                return Err(Error::Format(format!("denoiser layer {i}: kernel must be odd-sized with rows*cols weights")));
            }
            if l.weights.iter().any(|w| !w.is_finite()) {
                return Err(Error::Format(format!("denoiser layer {i}: non-finite weight")));
            }
        }
        Ok(Self { layers })
    }

    /// The shipped 3x3 binomial smoother.
    pub fn smoothing() -> Self {
        let w = [1.0, 2.0, 1.0, 2.0, 4.0, 2.0, 1.0, 2.0, 1.0].iter().map(|v| v / 16.0).collect();
        Self { layers: vec![ConvLayer { rows: 3, cols: 3, weights: w }] }
    }

    /// Single 1x1 unit layer, `D(x) = x`.
    pub fn identity() -> Self {
        Self { layers: vec![ConvLayer { rows: 1, cols: 1, weights: vec![1.0] }] }
    }

    pub fn check_shape(&self, n: usize) -> Result<()> {
        if let Some(l) = self.layers.iter().find(|l| l.rows > n || l.cols > n) {
            return Err(Error::Dimension(format!("{}x{} denoiser kernel does not fit a {n}x{n} image", l.rows, l.cols)));
        }
        Ok(())
    }

    pub fn apply(&self, x: &ComplexImage) -> Result<ComplexImage> {
        let n = x.side();
        self.check_shape(n)?;
        let mut cur = x.clone();
        for l in &self.layers {
            let (hr, hc) = (l.rows / 2, l.cols / 2);
            cur = ComplexImage::from_fn(n, |row, col| {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..l.rows {
                    let rr = (row + n + i - hr) % n;
                    for j in 0..l.cols {
                        let cc = (col + n + j - hc) % n;
                        acc += cur[(rr, cc)] * l.weights[i * l.cols + j];
                    }
                }
                acc
            });
        }
        Ok(cur)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(DENOISER_MAGIC);
        out.extend_from_slice(&DENOISER_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for l in &self.layers {
            out.extend_from_slice(&(l.rows as u32).to_le_bytes());
            out.extend_from_slice(&(l.cols as u32).to_le_bytes());
            for w in &l.weights {
                out.extend_from_slice(&w.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = crate::io::ByteReader::new(bytes);
        if r.take(4)? != DENOISER_MAGIC {
            return Err(Error::Format("not a denoiser parameter file".into()));
        }
        let version = r.u32()?;
        if version != DENOISER_VERSION {
            return Err(Error::Format(format!("unsupported denoiser version {version}")));
        }
        let count = r.u32()? as usize;
        let mut layers = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let weights = (0..rows * cols).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            layers.push(ConvLayer { rows, cols, weights });
        }
        r.finish()?;
        Self::new(layers)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::Format(format!("cannot read denoiser {}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }
}

/// `(D(x) - x) / sigma^2`
pub fn denoiser_score(denoiser: &ConvDenoiser, x: &ComplexImage, sigma: f64) -> Result<ComplexImage> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("denoiser score needs sigma > 0, got {sigma}")));
    }
    let mut out = denoiser.apply(x)?;
    out.axpy(Complex64::new(-1.0, 0.0), x);
    out.scale(1.0 / (sigma * sigma));
    Ok(out)
}

/// Score provider wrapping a loaded denoiser.
#[derive(Clone, Debug)]
pub struct DenoiserScore {
    pub denoiser: ConvDenoiser,
}

impl DenoiserScore {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self { denoiser: ConvDenoiser::load(path)? })
    }
}

impl ScoreProvider for DenoiserScore {
    fn score(&self, x: &ComplexImage, level: NoiseLevel) -> Result<ComplexImage> {
        denoiser_score(&self.denoiser, x, level.sigma)
    }
}
