//! Synthetic data: Shepp-Logan phantoms, birdcage coil maps and Cartesian
//! echo-train sampling.

use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::PI;
use std::ops::Range;

use crate::gridmath::{ComplexImage, KCoords};
use crate::{rng, Error, Result};

/// Modified Shepp-Logan ellipses: intensity, semi-axes (a, b), centre
/// (x0, y0) and rotation in degrees, on the unit square `[-1, 1]^2`.
pub const MODIFIED_SHEPP_LOGAN: [[f64; 6]; 10] = [
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0],
    [-0.2, 0.11, 0.31, 0.22, 0.0, -18.0],
    [-0.2, 0.16, 0.41, -0.22, 0.0, 18.0],
    [0.1, 0.21, 0.25, 0.0, 0.35, 0.0],
    [0.1, 0.046, 0.046, 0.0, 0.1, 0.0],
    [0.1, 0.046, 0.046, 0.0, -0.1, 0.0],
    [0.1, 0.046, 0.023, -0.08, -0.605, 0.0],
    [0.1, 0.023, 0.023, 0.0, -0.606, 0.0],
    [0.1, 0.023, 0.046, 0.06, -0.605, 0.0],
];

/// Unit-square coordinates of pixel `(row, col)`; `y` points up.
pub fn pixel_position(n: usize, row: usize, col: usize) -> (f64, f64) {
    let h = (n / 2) as f64;
    ((col as f64 - h) / h, (h - row as f64) / h)
}

fn inside_ellipse(e: &[f64; 6], x: f64, y: f64) -> bool {
    let (s, c) = e[5].to_radians().sin_cos();
    let (dx, dy) = (x - e[3], y - e[4]);
    let u = dx * c + dy * s;
    let v = -dx * s + dy * c;
    (u / e[1]).powi(2) + (v / e[2]).powi(2) <= 1.0
}

/// Modified Shepp-Logan phantom with a smooth seeded phase.
///
/// Seed 0 keeps the canonical intensities; other seeds scale the inner
/// ellipses by factors in `[0.75, 1.25]`. The phase is a random quadratic
/// polynomial over the unit square. Magnitudes are normalised to max 1.
pub fn shepp_logan(n: usize, contrast_seed: u64) -> Result<ComplexImage> {
    if n < 8 {
        return Err(Error::InvalidParameter(format!("phantom size must be >= 8, got {n}")));
    }
    let mut r = rng::seeded(contrast_seed ^ 0x5eed_5105);
    let mut table = MODIFIED_SHEPP_LOGAN;
    if contrast_seed != 0 {
        for e in table.iter_mut().skip(2) {
            e[0] *= r.random_range(0.75..1.25);
        }
    }
    let coeffs: Vec<f64> = (0..6).map(|_| r.random_range(-0.5..0.5) * PI).collect();
    let mut img = ComplexImage::from_fn(n, |row, col| {
        let (x, y) = pixel_position(n, row, col);
        let mag: f64 = table.iter().filter(|e| inside_ellipse(e, x, y)).map(|e| e[0]).sum();
        let phase = coeffs[0] + coeffs[1] * x + coeffs[2] * y + 0.5 * (coeffs[3] * x * x + coeffs[4] * x * y + coeffs[5] * y * y);
        Complex64::from_polar(mag.abs(), phase)
    });
    let max = img.max_magnitude();
    if max > 0.0 {
        img.scale(1.0 / max);
    }
    Ok(img)
}

/// Boolean support of the phantom's outer ellipse.
pub fn phantom_support(n: usize) -> Vec<bool> {
    let outer = &MODIFIED_SHEPP_LOGAN[0];
    (0..n * n)
        .map(|i| {
            let (x, y) = pixel_position(n, i / n, i % n);
            inside_ellipse(outer, x, y)
        })
        .collect()
}

/// Complex receive sensitivities, one image per coil.
#[derive(Clone, Debug, PartialEq)]
pub struct CoilMaps {
    pub maps: Vec<ComplexImage>,
}

impl CoilMaps {
    pub fn new(maps: Vec<ComplexImage>) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::InvalidParameter("at least one coil map required".into()));
        }
        let n = maps[0].side();
        if maps.iter().any(|m| m.side() != n) {
            return Err(Error::Dimension("coil maps differ in size".into()));
        }
        Ok(Self { maps })
    }

    /// Single coil with unit sensitivity.
    pub fn uniform(n: usize) -> Self {
        Self { maps: vec![ComplexImage::from_fn(n, |_, _| Complex64::new(1.0, 0.0))] }
    }

    pub fn num_coils(&self) -> usize {
        self.maps.len()
    }

    pub fn side(&self) -> usize {
        self.maps[0].side()
    }

    /// Root-sum-of-squares magnitude per pixel.
    pub fn rss(&self) -> Vec<f64> {
        let len = self.maps[0].len();
        (0..len)
            .map(|i| self.maps.iter().map(|m| m.data()[i].norm_sqr()).sum::<f64>().sqrt())
            .collect()
    }
}

/// Birdcage sensitivities: coils evenly spaced on a circle of radius 1.5
/// (unit-square units), amplitude `1/distance`, phase rotating around the
/// coil; normalised to unit root-sum-of-squares.
pub fn birdcage_maps(n: usize, num_coils: usize) -> Result<CoilMaps> {
    if num_coils == 0 {
        return Err(Error::InvalidParameter("num_coils must be >= 1".into()));
    }
    const RADIUS: f64 = 1.5;
    let h = n as f64 / 2.0;
    let mut maps: Vec<ComplexImage> = (0..num_coils)
        .map(|c| {
            let angle = c as f64 * 2.0 * PI / num_coils as f64;
            let (cx, cy) = (RADIUS * angle.cos(), RADIUS * angle.sin());
            ComplexImage::from_fn(n, |row, col| {
                let x = (col as f64 - h) / h - cx;
                let y = (row as f64 - h) / h - cy;
                let rr = (x * x + y * y).sqrt();
                Complex64::from_polar(1.0 / rr, x.atan2(-y) - angle)
            })
        })
        .collect();
    let rss = CoilMaps { maps: maps.clone() }.rss();
    for m in maps.iter_mut() {
        m.data_mut().iter_mut().zip(&rss).for_each(|(v, s)| *v /= *s);
    }
    Ok(CoilMaps { maps })
}

/// Cartesian k-space coordinates grouped into TRs of `etl` readout lines.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledTrajectory {
    pub n: usize,
    pub etl: usize,
    pub accel: f64,
    pub coords: KCoords,
    /// Coordinate index range of each TR.
    pub tr_boundaries: Vec<Range<usize>>,
    /// Phase-encode line indices acquired in each TR, in echo order.
    pub tr_lines: Vec<Vec<usize>>,
}

impl SampledTrajectory {
    pub fn num_trs(&self) -> usize {
        self.tr_boundaries.len()
    }

    pub fn num_coords(&self) -> usize {
        self.coords.len()
    }

    pub fn tr_coords(&self, tr: usize) -> &[[f64; 2]] {
        &self.coords.as_slice()[self.tr_boundaries[tr].clone()]
    }

    /// Index of the TR holding coordinate `j`.
    pub fn tr_of(&self, j: usize) -> usize {
        self.tr_boundaries.iter().position(|r| r.contains(&j)).expect("coordinate index in range")
    }

    /// All selected phase-encode lines in ascending order.
    pub fn selected_lines(&self) -> Vec<usize> {
        let mut lines: Vec<usize> = self.tr_lines.iter().flatten().copied().collect();
        lines.sort_unstable();
        lines
    }
}

/// Equispaced Cartesian sub-sampling along the phase-encode axis with an
/// interleaved line-to-TR assignment (line `j` goes to TR `j mod num_trs`).
///
/// The centre line (`ky = 0`) is always acquired.
pub fn cartesian_trajectory(n: usize, etl: usize, accel: f64) -> Result<SampledTrajectory> {
    if n == 0 || etl == 0 {
        return Err(Error::InvalidParameter("n and etl must be positive".into()));
    }
    if !(accel >= 1.0) || !accel.is_finite() {
        return Err(Error::InvalidParameter(format!("acceleration must be >= 1, got {accel}")));
    }
    let lines_f = n as f64 / accel;
    let num_lines = lines_f.round() as usize;
    if (lines_f - num_lines as f64).abs() > 1e-9 || num_lines == 0 || num_lines % etl != 0 {
        return Err(Error::InvalidParameter(format!(
            "n={n} is not divisible by etl*accel={}",
            etl as f64 * accel
        )));
    }
    let num_trs = num_lines / etl;
    let center = n / 2;
    let raw: Vec<i64> = (0..num_lines).map(|j| (j as f64 * accel).round() as i64).collect();
    let anchor = raw[((center as f64 / accel).round() as usize).min(num_lines - 1)];
    let shift = center as i64 - anchor;
    let mut lines: Vec<usize> = raw.iter().map(|p| (p + shift).rem_euclid(n as i64) as usize).collect();
    lines.sort_unstable();

    let mut tr_lines = vec![Vec::with_capacity(etl); num_trs];
    for (j, &line) in lines.iter().enumerate() {
        tr_lines[j % num_trs].push(line);
    }
    let step = 2.0 * PI / n as f64;
    let half = center as f64;
    let mut coords = Vec::with_capacity(num_lines * n);
    let mut tr_boundaries = Vec::with_capacity(num_trs);
    for tr in &tr_lines {
        let start = coords.len();
        for &pe in tr {
            let ky = (pe as f64 - half) * step;
            coords.extend((0..n).map(|q| [(q as f64 - half) * step, ky]));
        }
        tr_boundaries.push(start..coords.len());
    }
    Ok(SampledTrajectory { n, etl, accel, coords: KCoords::new(coords), tr_boundaries, tr_lines })
}
