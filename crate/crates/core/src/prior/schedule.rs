use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Geometric sequence of smoothing levels with a per-level Langevin step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub levels: Vec<f64>,
    pub steps_per_level: usize,
    pub base_step: f64,
}

impl NoiseSchedule {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn total_steps(&self) -> usize {
        self.levels.len() * self.steps_per_level
    }

    pub fn final_level(&self) -> f64 {
        *self.levels.last().expect("non-empty schedule")
    }

    /// `eta_i = eps * (sigma_i / sigma_L)^2`
    pub fn step_size(&self, level: usize) -> f64 {
        self.base_step * (self.levels[level] / self.final_level()).powi(2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() || self.levels.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParameter("schedule levels must be positive".into()));
        }
        if self.levels.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidParameter("schedule levels must be strictly decreasing".into()));
        }
        if self.steps_per_level == 0 || !(self.base_step > 0.0) {
            return Err(Error::InvalidParameter("steps_per_level and base_step must be positive".into()));
        }
        Ok(())
    }
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        geometric_schedule(1.0, 0.01, 10, 30, 2e-5).expect("valid defaults")
    }
}

/// `num_levels` values from `sigma_max` down to `sigma_min` with a constant ratio.
pub fn geometric_schedule(sigma_max: f64, sigma_min: f64, num_levels: usize, steps_per_level: usize, eps: f64) -> Result<NoiseSchedule> {
    if !(sigma_min > 0.0) || !(sigma_max > sigma_min) || !sigma_max.is_finite() {
        return Err(Error::InvalidParameter(format!("need sigma_max > sigma_min > 0, got {sigma_max}, {sigma_min}")));
    }
    if num_levels < 2 {
        return Err(Error::InvalidParameter("at least two noise levels required".into()));
    }
    let ratio = (sigma_min / sigma_max).powf(1.0 / (num_levels - 1) as f64);
    let mut levels: Vec<f64> = (0..num_levels).map(|i| sigma_max * ratio.powi(i as i32)).collect();
    levels[num_levels - 1] = sigma_min;
    let schedule = NoiseSchedule { levels, steps_per_level, base_step: eps };
    schedule.validate()?;
    Ok(schedule)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_levels() {
        let s = geometric_schedule(10.0, 0.01, 4, 5, 1e-3).unwrap();
        let ratio = (0.01f64 / 10.0).powf(1.0 / 3.0);
        assert_eq!(s.levels[0], 10.0);
        for w in s.levels.windows(2) {
            assert!((w[1] / w[0] - ratio).abs() < 1e-12);
        }
        let two = geometric_schedule(3.0, 0.5, 2, 1, 1.0).unwrap();
        assert_eq!(two.levels, vec![3.0, 0.5]);
        assert_eq!(s.step_size(3), 1e-3);
        assert!((s.step_size(0) - 1e-3 * 1e6).abs() < 1e-6);
    }

    #[test]
    fn invalid_bounds() {
        assert!(geometric_schedule(0.01, 1.0, 4, 5, 1e-3).is_err());
        assert!(geometric_schedule(1.0, 0.0, 4, 5, 1e-3).is_err());
        assert!(geometric_schedule(1.0, 0.1, 1, 5, 1e-3).is_err());
        assert!(geometric_schedule(1.0, 0.1, 3, 0, 1e-3).is_err());
    }

    #[test]
    fn defaults() {
        let s = NoiseSchedule::default();
        assert_eq!(s.num_levels(), 10);
        assert_eq!(s.steps_per_level, 30);
        assert_eq!(s.levels[0], 1.0);
        assert_eq!(s.final_level(), 0.01);
    }
}
