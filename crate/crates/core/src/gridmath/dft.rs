use num_complex::Complex64;

use super::{ComplexImage, KCoords};
use crate::{Error, Result};

/// Largest image side accepted by the brute-force oracle.
pub const ORACLE_MAX_SIDE: usize = 64;

/// Direct evaluation of `y_j = sum_n x_n exp(-i k_j . r_n)`.
pub fn dft_oracle_forward(image: &ComplexImage, coords: &KCoords) -> Result<Vec<Complex64>> {
    let n = image.side();
    if n > ORACLE_MAX_SIDE {
        return Err(Error::OracleTooLarge(n));
    }
    let mut out = Vec::with_capacity(coords.len());
    for k in coords.iter() {
        let mut acc = Complex64::new(0.0, 0.0);
        for row in 0..n {
            let ry = image.offset(row);
            for col in 0..n {
                let rx = image.offset(col);
                let phase = -(k[0] * rx + k[1] * ry);
                acc += image[(row, col)] * Complex64::from_polar(1.0, phase);
            }
        }
        out.push(acc);
    }
    Ok(out)
}

/// Direct evaluation of `x_n = sum_j y_j exp(+i k_j . r_n)`.
pub fn dft_oracle_adjoint(samples: &[Complex64], coords: &KCoords, n: usize) -> Result<ComplexImage> {
    if n > ORACLE_MAX_SIDE {
        return Err(Error::OracleTooLarge(n));
    }
    if samples.len() != coords.len() {
        return Err(Error::LengthMismatch { expected: coords.len(), actual: samples.len() });
    }
    let half = (n / 2) as f64;
    Ok(ComplexImage::from_fn(n, |row, col| {
        let (rx, ry) = (col as f64 - half, row as f64 - half);
        samples
            .iter()
            .zip(coords.iter())
            .map(|(y, k)| y * Complex64::from_polar(1.0, k[0] * rx + k[1] * ry))
            .sum()
    }))
}
