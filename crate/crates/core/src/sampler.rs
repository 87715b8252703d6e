//! Joint annealed Langevin sampling over the image and per-TR motion.
//!
//! For every noise level `i` and each of its inner steps:
//!
//! ```text
//! x     <- x + eta_i (A_k^H (y - A_k x) / s_eff^2 + score(x, i)) + z,   z  ~ N(0, 2 eta_i)
//! kappa <- kappa - lam_i grad_k ||y - A_k x||^2 / s_eff^2
//!                + lam_i grad_k log q(kappa) + xi,                        xi ~ N(0, 2 lam_i)
//! ```
//!
//! with `lam_i = motion_step_scale * eta_i`. The motion step descends the
//! data residual, i.e. it ascends the log-posterior. `s_eff` anneals the
//! likelihood together with the prior level, see [`effective_sigma`].

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::acquisition::{KSpaceData, MotionOperator};
use crate::gridmath::{ComplexImage, Spectrum};
use crate::metrics::nrmse;
use crate::motion::{prior_log_grad, MotionPrior, MotionState, MotionTrajectory, PARAMS_PER_STATE};
use crate::phantom::{CoilMaps, SampledTrajectory};
use crate::prior::{NoiseLevel, NoiseSchedule, ScoreProvider};
use crate::{rng, Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum KappaGradMode {
    /// Central differences for every parameter.
    #[default]
    FiniteDifference,
    /// Exact translation derivatives; rotation still by central differences.
    AnalyticPhase,
}

/// Central-difference steps: degrees for rotation, pixels for translation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdSteps {
    pub theta: f64,
    pub phi: f64,
}

impl Default for FdSteps {
    fn default() -> Self {
        Self { theta: 0.01, phi: 0.01 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointSampleConfig {
    pub schedule: NoiseSchedule,
    /// `lambda_i / eta_i`; zero disables motion updates.
    pub motion_step_scale: f64,
    /// Independent chains; the one with the lowest final data fidelity is kept.
    pub chains: usize,
    /// Chains after the first start from motion drawn uniformly on
    /// `[-init_spread, init_spread]` (degrees and pixels).
    pub init_spread: f64,
    /// Per-TR grid search run before the Langevin steps of selected levels.
    pub search: Option<MotionSearch>,
    pub kappa_grad_mode: KappaGradMode,
    pub fd_step_theta: f64,
    pub fd_step_phi: f64,
    pub seed: u64,
    pub record_every: usize,
}

impl Default for JointSampleConfig {
    fn default() -> Self {
        Self {
            schedule: NoiseSchedule::default(),
            motion_step_scale: 1e-3,
            chains: 1,
            init_spread: 0.0,
            search: None,
            kappa_grad_mode: KappaGradMode::FiniteDifference,
            fd_step_theta: 0.01,
            fd_step_phi: 0.01,
            seed: 0,
            record_every: 10,
        }
    }
}

impl JointSampleConfig {
    pub fn fd_steps(&self) -> FdSteps {
        FdSteps { theta: self.fd_step_theta, phi: self.fd_step_phi }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if !(self.motion_step_scale >= 0.0) || !self.motion_step_scale.is_finite() {
            return Err(Error::InvalidParameter("motion_step_scale must be >= 0".into()));
        }
        if !(self.fd_step_theta > 0.0) || !(self.fd_step_phi > 0.0) {
            return Err(Error::InvalidParameter("finite-difference steps must be positive".into()));
        }
        if self.chains == 0 {
            return Err(Error::InvalidParameter("chains must be >= 1".into()));
        }
        if !(self.init_spread >= 0.0) {
            return Err(Error::InvalidParameter("init_spread must be >= 0".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter("record_every must be >= 1".into()));
        }
        if let Some(search) = &self.search {
            search.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub level: usize,
    pub fidelity: f64,
    pub nrmse: Option<f64>,
    pub motion: MotionTrajectory,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JointTrace {
    pub records: Vec<TraceRecord>,
}

impl JointTrace {
    /// `iteration,level,fidelity,nrmse,theta_0,phi_x_0,phi_y_0,...`; the
    /// NRMSE column is empty when no reference was supplied.
    pub fn to_csv(&self) -> String {
        let num_trs = self.records.first().map(|r| r.motion.len()).unwrap_or(0);
        let mut out = String::from("iteration,level,fidelity,nrmse");
        for t in 0..num_trs {
            let _ = write!(out, ",theta_{t},phi_x_{t},phi_y_{t}");
        }
        out.push('\n');
        for r in &self.records {
            let _ = write!(out, "{},{},{},", r.iteration, r.level, r.fidelity);
            if let Some(v) = r.nrmse {
                let _ = write!(out, "{v}");
            }
            for s in &r.motion.states {
                let _ = write!(out, ",{},{},{}", s.theta, s.phi_x, s.phi_y);
            }
            out.push('\n');
        }
        out
    }

    /// Median fidelity of the records belonging to each level.
    pub fn median_fidelity_per_level(&self) -> Vec<(usize, f64)> {
        let mut levels: Vec<usize> = self.records.iter().map(|r| r.level).collect();
        levels.dedup();
        levels
            .into_iter()
            .map(|l| {
                let mut v: Vec<f64> = self.records.iter().filter(|r| r.level == l).map(|r| r.fidelity).collect();
                v.sort_by(|a, b| a.total_cmp(b));
                (l, v[v.len() / 2])
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct JointOutput {
    pub image: ComplexImage,
    pub motion: MotionTrajectory,
    pub trace: JointTrace,
    /// Index of the kept chain.
    pub chain: usize,
    /// Final data fidelity of every chain; `inf` for a diverged chain.
    pub chain_fidelity: Vec<f64>,
}

/// Optional inputs beyond the configuration.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Reference image for trace NRMSE.
    pub reference: Option<ComplexImage>,
    /// Starting image instead of `N(0, sigma_1^2)` noise.
    pub initial_image: Option<ComplexImage>,
    pub initial_motion: Option<MotionTrajectory>,
    /// Keep the image fixed and update motion only.
    pub freeze_image: bool,
}

/// Exhaustive per-TR search over `theta in [-theta_range, theta_range]` and
/// `phi_x, phi_y in [-phi_range, phi_range]` with the image held fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionSearch {
    pub theta_range: f64,
    pub theta_step: f64,
    pub phi_range: f64,
    pub phi_step: f64,
    /// Levels at whose start the search runs.
    pub levels: Vec<usize>,
}

impl Default for MotionSearch {
    fn default() -> Self {
        Self { theta_range: 3.0, theta_step: 0.25, phi_range: 3.0, phi_step: 0.25, levels: vec![0] }
    }
}

impl MotionSearch {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_range >= 0.0) || !(self.phi_range >= 0.0) || !(self.theta_step > 0.0) || !(self.phi_step > 0.0) {
            return Err(Error::InvalidParameter("search ranges must be >= 0 and steps > 0".into()));
        }
        Ok(())
    }
}

fn symmetric_grid(range: f64, step: f64) -> Vec<f64> {
    let m = (range / step).floor() as i64;
    (-m..=m).map(|i| i as f64 * step).collect()
}

/// Best grid state of one TR, or `current` if no grid point has a lower
/// residual. For a fixed rotation the translation only multiplies each sample
/// by `exp(-i k'.phi)`, so every translation reuses one rotated model.
fn search_tr(
    op: &MotionOperator,
    spectra: &[Spectrum],
    y_tr: &[Complex64],
    tr: usize,
    current: &MotionState,
    search: &MotionSearch,
) -> MotionState {
    let coords = op.trajectory().tr_coords(tr);
    let m = coords.len();
    let y_energy: f64 = y_tr.iter().map(|v| v.norm_sqr()).sum();
    let mut best = (residual_norm(y_tr, &op.forward_tr(spectra, tr, current)), *current);
    let phis = symmetric_grid(search.phi_range, search.phi_step);
    for theta in symmetric_grid(search.theta_range, search.theta_step) {
        let model = op.forward_tr(spectra, tr, &MotionState::new(theta, 0.0, 0.0));
        let model_energy: f64 = model.iter().map(|v| v.norm_sqr()).sum();
        let mut cross = vec![Complex64::new(0.0, 0.0); m];
        for (j, (yv, mv)) in y_tr.iter().zip(&model).enumerate() {
            cross[j % m] += yv.conj() * mv;
        }
        let (s, c) = theta.to_radians().sin_cos();
        let rotated: Vec<[f64; 2]> = coords.iter().map(|k| [c * k[0] - s * k[1], s * k[0] + c * k[1]]).collect();
        let table = |axis: usize| -> Vec<Vec<Complex64>> {
            phis.iter().map(|p| rotated.iter().map(|k| Complex64::from_polar(1.0, -k[axis] * p)).collect()).collect()
        };
        let (ex, ey) = (table(0), table(1));
        for (a, px) in phis.iter().enumerate() {
            let weighted: Vec<Complex64> = cross.iter().zip(&ex[a]).map(|(c, e)| c * e).collect();
            for (b, py) in phis.iter().enumerate() {
                let inner: Complex64 = weighted.iter().zip(&ey[b]).map(|(w, e)| w * e).sum();
                let res = y_energy + model_energy - 2.0 * inner.re;
                if res < best.0 {
                    best = (res, MotionState::new(theta, *px, *py));
                }
            }
        }
    }
    best.1
}

/// Runs [`MotionSearch`] on every TR in parallel for the image behind
/// `spectra`.
pub fn search_motion(
    op: &MotionOperator,
    y: &KSpaceData,
    spectra: &[Spectrum],
    motion: &MotionTrajectory,
    search: &MotionSearch,
) -> Result<MotionTrajectory> {
    search.validate()?;
    let num_trs = op.trajectory().num_trs();
    if motion.len() != num_trs {
        return Err(Error::LengthMismatch { expected: num_trs, actual: motion.len() });
    }
    let states = (0..num_trs)
        .into_par_iter()
        .map(|tr| search_tr(op, spectra, &op.data_tr(y, tr), tr, &motion.states[tr], search))
        .collect();
    Ok(MotionTrajectory::new(states))
}

/// `sqrt(sigma^2 + level^2)`
pub fn effective_sigma(level: f64, sigma: f64) -> Result<f64> {
    if !(level >= 0.0) || !(sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise levels must be >= 0, got {level}, {sigma}")));
    }
    if level == 0.0 && sigma == 0.0 {
        return Err(Error::InvalidParameter("effective sigma undefined when both levels are zero".into()));
    }
    Ok(level.hypot(sigma))
}

fn perturbed(state: &MotionState, param: usize, delta: f64) -> MotionState {
    let mut s = *state;
    *s.get_mut(param) += delta;
    s
}

fn residual_norm(y: &[Complex64], model: &[Complex64]) -> f64 {
    y.iter().zip(model).map(|(a, b)| (a - b).norm_sqr()).sum()
}

/// Gradient of `||y_t - A_t(kappa_t) x||^2` for one TR together with the
/// Gauss-Newton curvature `2 ||d(A_t x)/d kappa_p||^2` of each parameter.
fn tr_gradient(
    op: &MotionOperator,
    spectra: &[Spectrum],
    y_tr: &[Complex64],
    tr: usize,
    state: &MotionState,
    mode: KappaGradMode,
    fd: FdSteps,
) -> ([f64; PARAMS_PER_STATE], [f64; PARAMS_PER_STATE]) {
    let mut g = [0.0; PARAMS_PER_STATE];
    let mut curv = [0.0; PARAMS_PER_STATE];
    let mut central = |param: usize, h: f64| {
        let plus = op.forward_tr(spectra, tr, &perturbed(state, param, h));
        let minus = op.forward_tr(spectra, tr, &perturbed(state, param, -h));
        g[param] = (residual_norm(y_tr, &plus) - residual_norm(y_tr, &minus)) / (2.0 * h);
        curv[param] = 2.0 * plus.iter().zip(&minus).map(|(a, b)| ((a - b) / (2.0 * h)).norm_sqr()).sum::<f64>();
    };
    central(0, fd.theta);
    match mode {
        KappaGradMode::FiniteDifference => {
            central(1, fd.phi);
            central(2, fd.phi);
        }
        KappaGradMode::AnalyticPhase => {
            // r = y - P X(k'), dr/dphi = i k' P X(k')
            let model = op.forward_tr(spectra, tr, state);
            let coords = op.trajectory().tr_coords(tr);
            let (s, c) = state.theta.to_radians().sin_cos();
            let m = coords.len();
            for (j, (yv, mv)) in y_tr.iter().zip(&model).enumerate() {
                let k = coords[j % m];
                let kr = [c * k[0] - s * k[1], s * k[0] + c * k[1]];
                let w = (yv - mv).conj() * Complex64::new(0.0, 1.0) * mv;
                let e = mv.norm_sqr();
                g[1] += 2.0 * kr[0] * w.re;
                g[2] += 2.0 * kr[1] * w.re;
                curv[1] += 2.0 * kr[0] * kr[0] * e;
                curv[2] += 2.0 * kr[1] * kr[1] * e;
            }
        }
    }
    (g, curv)
}

fn gradient_and_curvature(
    op: &MotionOperator,
    y: &KSpaceData,
    spectra: &[Spectrum],
    motion: &MotionTrajectory,
    mode: KappaGradMode,
    fd: FdSteps,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let num_trs = op.trajectory().num_trs();
    if motion.len() != num_trs {
        return Err(Error::LengthMismatch { expected: num_trs, actual: motion.len() });
    }
    let per_tr: Vec<_> = (0..num_trs)
        .into_par_iter()
        .map(|tr| {
            let y_tr = op.data_tr(y, tr);
            tr_gradient(op, spectra, &y_tr, tr, &motion.states[tr], mode, fd)
        })
        .collect();
    Ok(per_tr.into_iter().map(|(g, c)| (g.to_vec(), c.to_vec())).fold((vec![], vec![]), |mut acc, (g, c)| {
        acc.0.extend(g);
        acc.1.extend(c);
        acc
    }))
}

/// Gradient of `||y - A_kappa x||^2` with respect to every motion parameter,
/// reusing the coil spectra of `x`.
pub fn kappa_gradient_from_spectra(
    op: &MotionOperator,
    y: &KSpaceData,
    spectra: &[Spectrum],
    motion: &MotionTrajectory,
    mode: KappaGradMode,
    fd: FdSteps,
) -> Result<Vec<f64>> {
    Ok(gradient_and_curvature(op, y, spectra, motion, mode, fd)?.0)
}

pub fn kappa_gradient(
    y: &KSpaceData,
    x: &ComplexImage,
    maps: &CoilMaps,
    traj: &SampledTrajectory,
    motion: &MotionTrajectory,
    mode: KappaGradMode,
    fd: FdSteps,
) -> Result<Vec<f64>> {
    let op = MotionOperator::new(maps, traj)?;
    if y.num_coils != op.num_coils() || y.num_coords() != op.num_coords() {
        return Err(Error::Dimension("k-space does not match coils and trajectory".into()));
    }
    let spectra = op.coil_spectra(x)?;
    kappa_gradient_from_spectra(&op, y, &spectra, motion, mode, fd)
}

pub fn joint_langevin(
    y: &KSpaceData,
    maps: &CoilMaps,
    traj: &SampledTrajectory,
    prior_x: &dyn ScoreProvider,
    prior_k: &MotionPrior,
    cfg: &JointSampleConfig,
) -> Result<JointOutput> {
    joint_langevin_with(y, maps, traj, prior_x, prior_k, cfg, &RunOptions::default())
}

/// Runs `cfg.chains` chains in parallel and keeps the one whose final
/// state has the lowest data fidelity. Chain `c` uses seed `cfg.seed + c`;
/// chains after the first start from a uniform draw of width
/// `cfg.init_spread` around the initial motion.
pub fn joint_langevin_with(
    y: &KSpaceData,
    maps: &CoilMaps,
    traj: &SampledTrajectory,
    prior_x: &dyn ScoreProvider,
    prior_k: &MotionPrior,
    cfg: &JointSampleConfig,
    opts: &RunOptions,
) -> Result<JointOutput> {
    cfg.validate()?;
    if cfg.chains == 1 {
        return run_chain(y, maps, traj, prior_x, prior_k, cfg, opts);
    }
    let base = match &opts.initial_motion {
        Some(m) => m.clone(),
        None => MotionTrajectory::zeros(traj.num_trs()),
    };
    let runs: Vec<Result<JointOutput>> = (0..cfg.chains)
        .into_par_iter()
        .map(|c| {
            let chain_cfg = JointSampleConfig { seed: cfg.seed.wrapping_add(c as u64), chains: 1, ..cfg.clone() };
            let mut chain_opts = opts.clone();
            if c > 0 {
                let mut r = rng::seeded(cfg.seed ^ (0x5eed_0000 + c as u64));
                let values: Vec<f64> = base
                    .to_vec()
                    .iter()
                    .map(|v| v + cfg.init_spread * r.random_range(-1.0..=1.0))
                    .collect();
                chain_opts.initial_motion = Some(MotionTrajectory::from_slice(&values)?);
            }
            run_chain(y, maps, traj, prior_x, prior_k, &chain_cfg, &chain_opts)
        })
        .collect();
    let fidelity: Vec<f64> = runs
        .iter()
        .map(|r| match r {
            Ok(out) => out.trace.records.last().map(|l| l.fidelity).unwrap_or(f64::INFINITY),
            Err(_) => f64::INFINITY,
        })
        .collect();
    let best = (0..runs.len())
        .filter(|&c| runs[c].is_ok())
        .min_by(|&a, &b| fidelity[a].total_cmp(&fidelity[b]).then(a.cmp(&b)));
    let mut runs = runs;
    match best {
        Some(c) => {
            let mut out = runs.swap_remove(c)?;
            out.chain = c;
            out.chain_fidelity = fidelity;
            Ok(out)
        }
        None => runs.swap_remove(0),
    }
}

fn run_chain(
    y: &KSpaceData,
    maps: &CoilMaps,
    traj: &SampledTrajectory,
    prior_x: &dyn ScoreProvider,
    prior_k: &MotionPrior,
    cfg: &JointSampleConfig,
    opts: &RunOptions,
) -> Result<JointOutput> {
    cfg.validate()?;
    let op = MotionOperator::new(maps, traj)?;
    if y.num_coils != op.num_coils() || y.num_coords() != op.num_coords() {
        return Err(Error::Dimension("k-space does not match coils and trajectory".into()));
    }
    if !(y.noise_std >= 0.0) {
        return Err(Error::InvalidParameter("noise_std must be >= 0".into()));
    }
    let n = traj.n;
    let schedule = &cfg.schedule;
    let mut r = rng::seeded(cfg.seed);

    // Image-domain smoothing of std s maps to roughly s * sqrt(L) in k-space.
    let lipschitz = op.lipschitz(20, cfg.seed ^ 0xa11ce)?;
    let op_scale = lipschitz.sqrt();

    let mut x = match &opts.initial_image {
        Some(img) if img.side() == n => img.clone(),
        Some(_) => return Err(Error::Dimension("initial image size mismatch".into())),
        None => {
            let s0 = schedule.levels[0];
            ComplexImage::from_fn(n, |_, _| rng::complex_normal(&mut r, s0))
        }
    };
    let mut motion = match &opts.initial_motion {
        Some(m) if m.len() == traj.num_trs() => m.clone(),
        Some(m) => return Err(Error::LengthMismatch { expected: traj.num_trs(), actual: m.len() }),
        None => MotionTrajectory::zeros(traj.num_trs()),
    };

    let mut trace = JointTrace::default();
    let mut initial_fidelity = None;
    let total = schedule.total_steps();
    let mut iteration = 0;
    let mut last: Option<TraceRecord> = None;

    for (level, &sigma_level) in schedule.levels.iter().enumerate() {
        let eta = schedule.step_size(level);
        let lam = cfg.motion_step_scale * eta;
        let s_eff = effective_sigma(sigma_level * op_scale, y.noise_std)?;
        let inv_var = 1.0 / (s_eff * s_eff);
        if let Some(search) = cfg.search.as_ref().filter(|s| s.levels.contains(&level)) {
            motion = search_motion(&op, y, &op.coil_spectra(&x)?, &motion, search)?;
        }
        for _ in 0..schedule.steps_per_level {
            let spectra = op.coil_spectra(&x)?;
            let model = op.forward_from_spectra(&spectra, &motion)?;
            let mut resid = model;
            resid.samples.iter_mut().zip(&y.samples).for_each(|(m, v)| *m = v - *m);
            let fidelity = resid.norm_sqr();
            let init = *initial_fidelity.get_or_insert(fidelity.max(f64::MIN_POSITIVE));

            let record = TraceRecord {
                iteration,
                level,
                fidelity,
                nrmse: match &opts.reference {
                    Some(reference) => Some(nrmse(&x, reference, true)?),
                    None => None,
                },
                motion: motion.clone(),
            };
            if !fidelity.is_finite() || fidelity > 1e6 * init {
                trace.records.push(record);
                return Err(Error::Diverged { iteration, fidelity, initial: init, trace: Box::new(trace) });
            }
            if iteration % cfg.record_every == 0 {
                trace.records.push(record);
            } else {
                last = Some(record);
            }

            // motion update uses (x_t, kappa_t)
            let new_motion = if lam > 0.0 {
                let (grad, curv) = gradient_and_curvature(&op, y, &spectra, &motion, cfg.kappa_grad_mode, cfg.fd_steps())?;
                let prior = prior_log_grad(&motion, prior_k);
                let values: Vec<f64> = motion
                    .to_vec()
                    .iter()
                    .zip(grad.iter().zip(&prior.grad))
                    .zip(&curv)
                    .map(|((v, (g, p)), h)| {
                        let precond = if *h > lipschitz { lipschitz / h } else { 1.0 };
                        let step = lam * precond;
                        let xi: f64 = r.sample(rand_distr::StandardNormal);
                        v + step * (p - g * inv_var) + (2.0 * step).sqrt() * xi
                    })
                    .collect();
                Some(MotionTrajectory::from_slice(&values)?)
            } else {
                None
            };

            if !opts.freeze_image {
                let mut drift = op.adjoint(&resid, &motion)?;
                drift.scale(inv_var);
                drift.axpy(Complex64::new(1.0, 0.0), &prior_x.score(&x, NoiseLevel::new(level, sigma_level))?);
                x.axpy(Complex64::new(eta, 0.0), &drift);
                let z_std = (2.0 * eta).sqrt();
                x.data_mut().iter_mut().for_each(|v| *v += rng::complex_normal(&mut r, z_std));
                if !x.is_finite() {
                    return Err(Error::Diverged { iteration, fidelity: f64::INFINITY, initial: init, trace: Box::new(trace) });
                }
            }
            if let Some(m) = new_motion {
                motion = m;
            }
            iteration += 1;
        }
    }
    debug_assert_eq!(iteration, total);

    // final state
    let fidelity = op.fidelity(y, &x, &motion)?;
    if let Some(l) = last.take() {
        if trace.records.last().map(|r| r.iteration) != Some(l.iteration) {
            trace.records.push(l);
        }
    }
    trace.records.push(TraceRecord {
        iteration: total,
        level: schedule.num_levels() - 1,
        fidelity,
        nrmse: match &opts.reference {
            Some(reference) => Some(nrmse(&x, reference, true)?),
            None => None,
        },
        motion: motion.clone(),
    });
    Ok(JointOutput { image: x, motion, trace, chain: 0, chain_fidelity: vec![fidelity] })
}

/// Unconditional annealed Langevin sampling from a score provider alone.
pub fn sample_prior(prior: &dyn ScoreProvider, schedule: &NoiseSchedule, n: usize, seed: u64) -> Result<ComplexImage> {
    schedule.validate()?;
    let mut r = rng::seeded(seed);
    let s0 = schedule.levels[0];
    let mut x = ComplexImage::from_fn(n, |_, _| rng::complex_normal(&mut r, s0));
    for (level, &sigma) in schedule.levels.iter().enumerate() {
        let eta = schedule.step_size(level);
        let z_std = (2.0 * eta).sqrt();
        for _ in 0..schedule.steps_per_level {
            let score = prior.score(&x, NoiseLevel::new(level, sigma))?;
            x.axpy(Complex64::new(eta, 0.0), &score);
            x.data_mut().iter_mut().for_each(|v| *v += rng::complex_normal(&mut r, z_std));
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn effective_sigma_cases() {
        assert_eq!(effective_sigma(0.0, 0.7).unwrap(), 0.7);
        assert_eq!(effective_sigma(0.3, 0.0).unwrap(), 0.3);
        assert!((effective_sigma(3.0, 4.0).unwrap() - 5.0).abs() < 1e-15);
        assert!(effective_sigma(0.0, 0.0).is_err());
        assert!(effective_sigma(-1.0, 1.0).is_err());
    }

    #[test]
    fn trace_csv_layout() {
        let trace = JointTrace {
            records: vec![TraceRecord {
                iteration: 3,
                level: 1,
                fidelity: 2.5,
                nrmse: None,
                motion: MotionTrajectory::new(vec![MotionState::new(1.0, -0.5, 0.25); 2]),
            }],
        };
        let csv = trace.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "iteration,level,fidelity,nrmse,theta_0,phi_x_0,phi_y_0,theta_1,phi_x_1,phi_y_1");
        assert_eq!(lines.next().unwrap(), "3,1,2.5,,1,-0.5,0.25,1,-0.5,0.25");
    }

    #[test]
    fn config_validation() {
        let cfg = JointSampleConfig { fd_step_phi: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = JointSampleConfig { motion_step_scale: -1.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        assert!(JointSampleConfig::default().validate().is_ok());
    }
}
