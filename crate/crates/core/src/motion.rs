//! Rigid in-plane motion, one state per repetition time (TR).

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::{rng, Error, Result};

/// Parameters per motion state, in the order used by flattened vectors.
pub const PARAMS_PER_STATE: usize = 3;

/// Rigid motion during one TR: rotation in degrees, translation in pixels.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MotionState {
    pub theta: f64,
    pub phi_x: f64,
    pub phi_y: f64,
}

impl MotionState {
    pub fn new(theta: f64, phi_x: f64, phi_y: f64) -> Self {
        Self { theta, phi_x, phi_y }
    }

    pub fn is_finite(&self) -> bool {
        self.theta.is_finite() && self.phi_x.is_finite() && self.phi_y.is_finite()
    }

    pub fn get(&self, param: usize) -> f64 {
        match param {
            0 => self.theta,
            1 => self.phi_x,
            2 => self.phi_y,
            _ => panic!("motion parameter index {param} out of range"),
        }
    }

    pub fn get_mut(&mut self, param: usize) -> &mut f64 {
        match param {
            0 => &mut self.theta,
            1 => &mut self.phi_x,
            2 => &mut self.phi_y,
            _ => panic!("motion parameter index {param} out of range"),
        }
    }
}

/// Ordered motion states, one per TR.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MotionTrajectory {
    pub states: Vec<MotionState>,
}

impl MotionTrajectory {
    pub fn new(states: Vec<MotionState>) -> Self {
        Self { states }
    }

    pub fn zeros(num_trs: usize) -> Self {
        Self { states: vec![MotionState::default(); num_trs] }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// `[theta_0, phi_x_0, phi_y_0, theta_1, ...]`
    pub fn to_vec(&self) -> Vec<f64> {
        self.states.iter().flat_map(|s| [s.theta, s.phi_x, s.phi_y]).collect()
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        if values.len() % PARAMS_PER_STATE != 0 {
            return Err(Error::Format(format!("{} motion values is not a multiple of 3", values.len())));
        }
        Ok(Self {
            states: values.chunks_exact(3).map(|c| MotionState::new(c[0], c[1], c[2])).collect(),
        })
    }

    /// Tab-separated table with one row per TR.
    pub fn to_table(&self) -> String {
        let mut out = String::from("index\ttheta_deg\tphi_x_px\tphi_y_px\n");
        for (i, s) in self.states.iter().enumerate() {
            let _ = writeln!(out, "{i}\t{}\t{}\t{}", s.theta, s.phi_x, s.phi_y);
        }
        out
    }

    pub fn from_table(text: &str) -> Result<Self> {
        let mut states = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("index") {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::Format(format!("motion table line {}: expected 4 fields", lineno + 1)));
            }
            let idx: usize = fields[0]
                .parse()
                .map_err(|_| Error::Format(format!("motion table line {}: bad index", lineno + 1)))?;
            if idx != states.len() {
                return Err(Error::Format(format!("motion table line {}: index {idx} out of order", lineno + 1)));
            }
            let mut v = [0.0; 3];
            for (slot, f) in v.iter_mut().zip(&fields[1..]) {
                *slot = f
                    .parse()
                    .map_err(|_| Error::Format(format!("motion table line {}: bad value {f:?}", lineno + 1)))?;
            }
            states.push(MotionState::new(v[0], v[1], v[2]));
        }
        Ok(Self { states })
    }
}

/// Draws `3 * num_trs` i.i.d. values uniform on `[-amplitude, amplitude]`.
pub fn simulate_motion(num_trs: usize, amplitude: f64, seed: u64) -> Result<MotionTrajectory> {
    if num_trs == 0 {
        return Err(Error::InvalidParameter("num_trs must be at least 1".into()));
    }
    if !(amplitude >= 0.0) || !amplitude.is_finite() {
        return Err(Error::InvalidParameter(format!("motion amplitude must be >= 0, got {amplitude}")));
    }
    let mut r = rng::seeded(seed);
    let mut draw = || if amplitude == 0.0 { 0.0 } else { r.random_range(-amplitude..=amplitude) };
    let states = (0..num_trs).map(|_| MotionState::new(draw(), draw(), draw())).collect();
    Ok(MotionTrajectory { states })
}

/// Uniform box prior `U(-bound, bound)` on every motion parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionPrior {
    bound: f64,
}

impl MotionPrior {
    pub fn uniform(bound: f64) -> Result<Self> {
        if !(bound > 0.0) || !bound.is_finite() {
            return Err(Error::InvalidParameter(format!("prior bound must be > 0, got {bound}")));
        }
        Ok(Self { bound })
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }
}

impl Default for MotionPrior {
    fn default() -> Self {
        Self { bound: 15.0 }
    }
}

/// Gradient of `log q` per flattened parameter plus boundary flags.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorGradient {
    pub grad: Vec<f64>,
    pub flagged: Vec<bool>,
}

impl PriorGradient {
    pub fn any_flagged(&self) -> bool {
        self.flagged.iter().any(|&f| f)
    }
}

/// Barrier strength applied beyond the box.
const BARRIER_STRENGTH: f64 = 1.0;

/// Zero inside the box; at or beyond the boundary the parameter is flagged and
/// receives the quadratic-barrier gradient `-(|v| - bound) sign(v)`.
pub fn prior_log_grad(traj: &MotionTrajectory, prior: &MotionPrior) -> PriorGradient {
    let values = traj.to_vec();
    let mut grad = Vec::with_capacity(values.len());
    let mut flagged = Vec::with_capacity(values.len());
    for v in values {
        if v.abs() < prior.bound {
            grad.push(0.0);
            flagged.push(false);
        } else {
            grad.push(-BARRIER_STRENGTH * (v.abs() - prior.bound) * v.signum());
            flagged.push(true);
        }
    }
    PriorGradient { grad, flagged }
}

/// Mean absolute error per parameter type after removing a global offset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MotionError {
    pub theta: f64,
    pub phi_x: f64,
    pub phi_y: f64,
}

impl MotionError {
    pub fn max(&self) -> f64 {
        self.theta.max(self.phi_x).max(self.phi_y)
    }
}

pub fn global_offset_removed_error(est: &MotionTrajectory, truth: &MotionTrajectory) -> Result<MotionError> {
    if est.len() != truth.len() {
        return Err(Error::LengthMismatch { expected: truth.len(), actual: est.len() });
    }
    if est.is_empty() {
        return Ok(MotionError::default());
    }
    let count = est.len() as f64;
    let mut out = [0.0; 3];
    for (p, slot) in out.iter_mut().enumerate() {
        let diffs: Vec<f64> = est.states.iter().zip(&truth.states).map(|(e, t)| e.get(p) - t.get(p)).collect();
        let offset = diffs.iter().sum::<f64>() / count;
        *slot = diffs.iter().map(|d| (d - offset).abs()).sum::<f64>() / count;
    }
    Ok(MotionError { theta: out[0], phi_x: out[1], phi_y: out[2] })
}
