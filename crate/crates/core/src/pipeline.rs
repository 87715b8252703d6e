//! Simulate / reconstruct / evaluate / batch drivers and the experiment
//! configuration they share.
//!
//! A bundle directory written by [`cmd_simulate`] contains:
//!
//! ```text
//! config.txt            experiment configuration (key = value)
//! phantom.cimg          ground-truth image
//! maps.cimg             coil sensitivities
//! trajectory.traj       sampling trajectory
//! motion_truth.tsv      ground-truth motion, one row per TR
//! kspace_corrupt.ksp    motion-corrupted noisy k-space
//! kspace_clean.ksp      motion-free k-space with the same noise draw
//! manifest.json         config echo, motion states, SHA-256 of every file above
//! ```
//!
//! [`cmd_reconstruct`] writes `<bundle>/<method>/` with `image.cimg`,
//! `trace.csv`, `config.txt`, `recon.json` and, for `joint`,
//! `motion_estimate.tsv`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::acquisition::{add_noise, MotionOperator};
use crate::baseline::{l1_wavelet_solve, L1WaveletConfig};
use crate::gridmath::ComplexImage;
use crate::io;
use crate::metrics::{evaluate, EvalReport};
use crate::motion::{global_offset_removed_error, simulate_motion, MotionError, MotionPrior, MotionTrajectory};
use crate::phantom::{birdcage_maps, cartesian_trajectory, shepp_logan};
use crate::prior::{geometric_schedule, TotalVariationScore};
use crate::sampler::{joint_langevin_with, JointSampleConfig, KappaGradMode, MotionSearch, RunOptions};
use crate::{Error, Result};

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG: &str = "config.txt";
pub const PHANTOM: &str = "phantom.cimg";
pub const MAPS: &str = "maps.cimg";
pub const TRAJECTORY: &str = "trajectory.traj";
pub const MOTION_TRUTH: &str = "motion_truth.tsv";
pub const KSPACE_CORRUPT: &str = "kspace_corrupt.ksp";
pub const KSPACE_CLEAN: &str = "kspace_clean.ksp";
const BUNDLE_FILES: [&str; 7] = [CONFIG, PHANTOM, MAPS, TRAJECTORY, MOTION_TRUTH, KSPACE_CORRUPT, KSPACE_CLEAN];

/// Everything needed to simulate one slice and reconstruct it.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub grid_size_px: usize,
    pub num_coils: usize,
    pub echo_train_length: usize,
    pub acceleration: f64,
    pub motion_amplitude_deg_px: f64,
    pub noise_sigma: f64,
    pub schedule_sigma_max: f64,
    pub schedule_sigma_min: f64,
    pub schedule_levels: usize,
    pub schedule_steps_per_level: usize,
    /// Final-level step size divided by `schedule_sigma_min^2`.
    pub schedule_step_rel: f64,
    pub prior_tv_beta: f64,
    pub motion_step_scale: f64,
    pub motion_bound_deg_px: f64,
    pub kappa_gradient: KappaGradMode,
    pub fd_step_deg: f64,
    pub fd_step_px: f64,
    pub trace_every: usize,
    pub sampler_chains: usize,
    pub sampler_init_spread_deg_px: f64,
    /// Half-width of the per-TR motion grid search; 0 disables it.
    pub motion_search_range_deg_px: f64,
    pub motion_search_step_deg_px: f64,
    /// Levels at whose start the grid search runs.
    pub motion_search_levels: Vec<usize>,
    /// `lambda` divided by the largest eigenvalue of `A^H A`.
    pub baseline_lambda_rel: f64,
    pub baseline_max_iters: usize,
    pub baseline_wavelet_levels: usize,
    pub seed_phantom: u64,
    pub seed_motion: u64,
    pub seed_noise: u64,
    pub seed_sampler: u64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            grid_size_px: 64,
            num_coils: 4,
            echo_train_length: 8,
            acceleration: 4.0,
            motion_amplitude_deg_px: 2.0,
            noise_sigma: 0.1,
            schedule_sigma_max: 0.3,
            schedule_sigma_min: 0.001,
            schedule_levels: 10,
            schedule_steps_per_level: 300,
            schedule_step_rel: 0.6,
            prior_tv_beta: 100.0,
            motion_step_scale: 1.0,
            motion_bound_deg_px: 15.0,
            kappa_gradient: KappaGradMode::AnalyticPhase,
            fd_step_deg: 0.01,
            fd_step_px: 0.01,
            trace_every: 10,
            sampler_chains: 8,
            sampler_init_spread_deg_px: 3.0,
            motion_search_range_deg_px: 0.0,
            motion_search_step_deg_px: 0.25,
            motion_search_levels: vec![0],
            baseline_lambda_rel: 1e-3,
            baseline_max_iters: 200,
            baseline_wavelet_levels: 3,
            seed_phantom: 1,
            seed_motion: 101,
            seed_noise: 201,
            seed_sampler: 1,
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Keys that only affect reconstruction and may be overridden per run.
pub const RECONSTRUCTION_KEYS: [&str; 22] = [
    "schedule_sigma_max",
    "schedule_sigma_min",
    "schedule_levels",
    "schedule_steps_per_level",
    "schedule_step_rel",
    "prior_tv_beta",
    "motion_step_scale",
    "motion_bound_deg_px",
    "kappa_gradient",
    "fd_step_deg",
    "fd_step_px",
    "trace_every",
    "sampler_chains",
    "sampler_init_spread_deg_px",
    "motion_search_range_deg_px",
    "motion_search_step_deg_px",
    "motion_search_levels",
    "baseline_lambda_rel",
    "baseline_max_iters",
    "baseline_wavelet_levels",
    "seed_sampler",
    "output_dir",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("{key}: cannot parse {value:?}")))
}

fn grad_mode_name(mode: KappaGradMode) -> &'static str {
    match mode {
        KappaGradMode::AnalyticPhase => "analytic",
        KappaGradMode::FiniteDifference => "finite-difference",
    }
}

impl ExperimentConfig {
    pub const KEYS: [&'static str; 31] = [
        "grid_size_px",
        "num_coils",
        "echo_train_length",
        "acceleration",
        "motion_amplitude_deg_px",
        "noise_sigma",
        "schedule_sigma_max",
        "schedule_sigma_min",
        "schedule_levels",
        "schedule_steps_per_level",
        "schedule_step_rel",
        "prior_tv_beta",
        "motion_step_scale",
        "motion_bound_deg_px",
        "kappa_gradient",
        "fd_step_deg",
        "fd_step_px",
        "trace_every",
        "sampler_chains",
        "sampler_init_spread_deg_px",
    "motion_search_range_deg_px",
    "motion_search_step_deg_px",
    "motion_search_levels",
        "baseline_lambda_rel",
        "baseline_max_iters",
        "baseline_wavelet_levels",
        "seed_phantom",
        "seed_motion",
        "seed_noise",
        "seed_sampler",
        "output_dir",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "grid_size_px" => self.grid_size_px = parse(key, value)?,
            "num_coils" => self.num_coils = parse(key, value)?,
            "echo_train_length" => self.echo_train_length = parse(key, value)?,
            "acceleration" => self.acceleration = parse(key, value)?,
            "motion_amplitude_deg_px" => self.motion_amplitude_deg_px = parse(key, value)?,
            "noise_sigma" => self.noise_sigma = parse(key, value)?,
            "schedule_sigma_max" => self.schedule_sigma_max = parse(key, value)?,
            "schedule_sigma_min" => self.schedule_sigma_min = parse(key, value)?,
            "schedule_levels" => self.schedule_levels = parse(key, value)?,
            "schedule_steps_per_level" => self.schedule_steps_per_level = parse(key, value)?,
            "schedule_step_rel" => self.schedule_step_rel = parse(key, value)?,
            "prior_tv_beta" => self.prior_tv_beta = parse(key, value)?,
            "motion_step_scale" => self.motion_step_scale = parse(key, value)?,
            "motion_bound_deg_px" => self.motion_bound_deg_px = parse(key, value)?,
            "kappa_gradient" => {
                self.kappa_gradient = match value.trim() {
                    "analytic" => KappaGradMode::AnalyticPhase,
                    "finite-difference" => KappaGradMode::FiniteDifference,
                    other => {
                        return Err(Error::InvalidParameter(format!(
                            "kappa_gradient must be analytic or finite-difference, got {other:?}"
                        )))
                    }
                }
            }
            "fd_step_deg" => self.fd_step_deg = parse(key, value)?,
            "fd_step_px" => self.fd_step_px = parse(key, value)?,
            "trace_every" => self.trace_every = parse(key, value)?,
            "sampler_chains" => self.sampler_chains = parse(key, value)?,
            "sampler_init_spread_deg_px" => self.sampler_init_spread_deg_px = parse(key, value)?,
            "motion_search_range_deg_px" => self.motion_search_range_deg_px = parse(key, value)?,
            "motion_search_step_deg_px" => self.motion_search_step_deg_px = parse(key, value)?,
            "motion_search_levels" => {
                self.motion_search_levels = value
                    .split(',')
                    .map(str::trim)
                    .filter(|v| !v.is_empty())
                    .map(|v| parse(key, v))
                    .collect::<Result<_>>()?
            }
            "baseline_lambda_rel" => self.baseline_lambda_rel = parse(key, value)?,
            "baseline_max_iters" => self.baseline_max_iters = parse(key, value)?,
            "baseline_wavelet_levels" => self.baseline_wavelet_levels = parse(key, value)?,
            "seed_phantom" => self.seed_phantom = parse(key, value)?,
            "seed_motion" => self.seed_motion = parse(key, value)?,
            "seed_noise" => self.seed_noise = parse(key, value)?,
            "seed_sampler" => self.seed_sampler = parse(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value.trim()),
            _ => return Err(Error::InvalidParameter(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "grid_size_px" => self.grid_size_px.to_string(),
            "num_coils" => self.num_coils.to_string(),
            "echo_train_length" => self.echo_train_length.to_string(),
            "acceleration" => self.acceleration.to_string(),
            "motion_amplitude_deg_px" => self.motion_amplitude_deg_px.to_string(),
            "noise_sigma" => self.noise_sigma.to_string(),
            "schedule_sigma_max" => self.schedule_sigma_max.to_string(),
            "schedule_sigma_min" => self.schedule_sigma_min.to_string(),
            "schedule_levels" => self.schedule_levels.to_string(),
            "schedule_steps_per_level" => self.schedule_steps_per_level.to_string(),
            "schedule_step_rel" => self.schedule_step_rel.to_string(),
            "prior_tv_beta" => self.prior_tv_beta.to_string(),
            "motion_step_scale" => self.motion_step_scale.to_string(),
            "motion_bound_deg_px" => self.motion_bound_deg_px.to_string(),
            "kappa_gradient" => grad_mode_name(self.kappa_gradient).to_string(),
            "fd_step_deg" => self.fd_step_deg.to_string(),
            "fd_step_px" => self.fd_step_px.to_string(),
            "trace_every" => self.trace_every.to_string(),
            "sampler_chains" => self.sampler_chains.to_string(),
            "sampler_init_spread_deg_px" => self.sampler_init_spread_deg_px.to_string(),
            "motion_search_range_deg_px" => self.motion_search_range_deg_px.to_string(),
            "motion_search_step_deg_px" => self.motion_search_step_deg_px.to_string(),
            "motion_search_levels" => {
                self.motion_search_levels.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(",")
            }
            "baseline_lambda_rel" => self.baseline_lambda_rel.to_string(),
            "baseline_max_iters" => self.baseline_max_iters.to_string(),
            "baseline_wavelet_levels" => self.baseline_wavelet_levels.to_string(),
            "seed_phantom" => self.seed_phantom.to_string(),
            "seed_motion" => self.seed_motion.to_string(),
            "seed_noise" => self.seed_noise.to_string(),
            "seed_sampler" => self.seed_sampler.to_string(),
            "output_dir" => self.output_dir.display().to_string(),
            _ => return None,
        })
    }

    /// Parses `key = value` lines; `#` starts a comment. Unset keys keep
    /// their defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("config line {}: expected key = value", lineno + 1)))?;
            cfg.set(key.trim(), value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in Self::KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("known key"));
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn to_map(&self) -> BTreeMap<String, String> {
        Self::KEYS.iter().map(|k| (k.to_string(), self.get(k).expect("known key"))).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.into()));
        if self.grid_size_px < 8 || self.num_coils == 0 || self.echo_train_length == 0 {
            return bad("grid_size_px >= 8, num_coils >= 1 and echo_train_length >= 1 required");
        }
        let lines = self.grid_size_px as f64 / self.acceleration;
        if !(self.acceleration >= 1.0)
            || (lines - lines.round()).abs() > 1e-9
            || lines.round() as usize % self.echo_train_length != 0
        {
            return bad("grid_size_px must be divisible by echo_train_length * acceleration");
        }
        if !(self.motion_amplitude_deg_px >= 0.0) || !(self.noise_sigma >= 0.0) {
            return bad("motion amplitude and noise sigma must be >= 0");
        }
        if !(self.motion_bound_deg_px > self.motion_amplitude_deg_px) {
            return bad("motion_bound_deg_px must exceed motion_amplitude_deg_px");
        }
        if self.trace_every == 0 || self.baseline_max_iters == 0 {
            return bad("trace_every and baseline_max_iters must be positive");
        }
        if !(self.baseline_lambda_rel >= 0.0) || !(self.prior_tv_beta > 0.0) || !(self.schedule_step_rel > 0.0) {
            return bad("baseline_lambda_rel >= 0, prior_tv_beta > 0 and schedule_step_rel > 0 required");
        }
        if !(self.motion_search_range_deg_px >= 0.0) || self.motion_search_levels.iter().any(|&l| l >= self.schedule_levels) {
            return bad("motion_search_range_deg_px must be >= 0 and motion_search_levels below schedule_levels");
        }
        self.sampler_config()?.validate()
    }

    pub fn num_trs(&self) -> usize {
        (self.grid_size_px as f64 / self.acceleration).round() as usize / self.echo_train_length
    }

    pub fn sampler_config(&self) -> Result<JointSampleConfig> {
        let s_min = self.schedule_sigma_min;
        Ok(JointSampleConfig {
            schedule: geometric_schedule(
                self.schedule_sigma_max,
                s_min,
                self.schedule_levels,
                self.schedule_steps_per_level,
                self.schedule_step_rel * s_min * s_min,
            )?,
            motion_step_scale: self.motion_step_scale,
            kappa_grad_mode: self.kappa_gradient,
            fd_step_theta: self.fd_step_deg,
            fd_step_phi: self.fd_step_px,
            seed: self.seed_sampler,
            record_every: self.trace_every,
            chains: self.sampler_chains,
            init_spread: self.sampler_init_spread_deg_px,
            search: (self.motion_search_range_deg_px > 0.0).then(|| MotionSearch {
                theta_range: self.motion_search_range_deg_px,
                theta_step: self.motion_search_step_deg_px,
                phi_range: self.motion_search_range_deg_px,
                phi_step: self.motion_search_step_deg_px,
                levels: self.motion_search_levels.clone(),
            }),
        })
    }

    /// Shifts every seed by `offset`, giving an independent instance.
    pub fn with_seed_offset(&self, offset: u64) -> Self {
        let mut c = self.clone();
        c.seed_phantom += offset;
        c.seed_motion += offset;
        c.seed_noise += offset;
        c.seed_sampler += offset;
        c
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "joint")]
    Joint,
    #[serde(rename = "l1-corrupt")]
    L1Corrupt,
    #[serde(rename = "l1-clean")]
    L1Clean,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Joint, Method::L1Corrupt, Method::L1Clean];

    pub fn name(self) -> &'static str {
        match self {
            Method::Joint => "joint",
            Method::L1Corrupt => "l1-corrupt",
            Method::L1Clean => "l1-clean",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method {s:?}; expected joint, l1-corrupt or l1-clean")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub config: BTreeMap<String, String>,
    pub num_trs: usize,
    /// Ground-truth `[theta_deg, phi_x_px, phi_y_px]` per TR.
    pub motion_states: Vec<[f64; 3]>,
    /// File name to lowercase hex SHA-256.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn load(bundle: impl AsRef<Path>) -> Result<Self> {
        let path = bundle.as_ref().join(MANIFEST);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Integrity(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Integrity(format!("malformed manifest: {e}")))
    }

    /// Recomputes every listed hash and fails on the first mismatch.
    pub fn verify(&self, bundle: impl AsRef<Path>) -> Result<()> {
        for name in BUNDLE_FILES {
            if !self.files.contains_key(name) {
                return Err(Error::Integrity(format!("manifest does not list {name}")));
            }
        }
        for (name, want) in &self.files {
            let path = bundle.as_ref().join(name);
            let bytes = std::fs::read(&path).map_err(|e| Error::Integrity(format!("cannot read {name}: {e}")))?;
            if &sha256_hex(&bytes) != want {
                return Err(Error::Integrity(format!("{name} does not match its manifest hash")));
            }
        }
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("cannot create {}: {e}", dir.display()))))
}

/// Writes a simulated bundle into `cfg.output_dir` and returns its manifest.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<Manifest> {
    cfg.validate()?;
    let n = cfg.grid_size_px;
    let x = shepp_logan(n, cfg.seed_phantom)?;
    let maps = birdcage_maps(n, cfg.num_coils)?;
    let traj = cartesian_trajectory(n, cfg.echo_train_length, cfg.acceleration)?;
    let motion = simulate_motion(traj.num_trs(), cfg.motion_amplitude_deg_px, cfg.seed_motion)?;
    let op = MotionOperator::new(&maps, &traj)?;
    let corrupt = add_noise(&op.forward(&x, &motion)?, cfg.noise_sigma, cfg.seed_noise)?;
    let clean = add_noise(&op.forward(&x, &MotionTrajectory::zeros(traj.num_trs()))?, cfg.noise_sigma, cfg.seed_noise)?;

    let artifacts: Vec<(&str, Vec<u8>)> = vec![
        (CONFIG, cfg.to_text().into_bytes()),
        (PHANTOM, io::encode_image(&x)),
        (MAPS, io::encode_images(&maps.maps)?),
        (TRAJECTORY, io::encode_trajectory(&traj)),
        (MOTION_TRUTH, motion.to_table().into_bytes()),
        (KSPACE_CORRUPT, io::encode_kspace(&corrupt)),
        (KSPACE_CLEAN, io::encode_kspace(&clean)),
    ];
    let dir = &cfg.output_dir;
    create_dir(dir)?;
    let mut files = BTreeMap::new();
    for (name, bytes) in &artifacts {
        io::write_bytes(dir.join(name), bytes)?;
        files.insert(name.to_string(), sha256_hex(bytes));
    }
    let manifest = Manifest {
        format_version: io::FORMAT_VERSION,
        config: cfg.to_map(),
        num_trs: traj.num_trs(),
        motion_states: motion.states.iter().map(|s| [s.theta, s.phi_x, s.phi_y]).collect(),
        files,
    };
    io::write_bytes(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(manifest)
}

/// Loaded and verified contents of a bundle.
pub struct Bundle {
    pub dir: PathBuf,
    pub config: ExperimentConfig,
    pub manifest: Manifest,
    pub phantom: ComplexImage,
    pub maps: crate::phantom::CoilMaps,
    pub trajectory: crate::phantom::SampledTrajectory,
    pub motion_truth: MotionTrajectory,
    pub kspace_corrupt: crate::acquisition::KSpaceData,
    pub kspace_clean: crate::acquisition::KSpaceData,
}

impl Bundle {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let manifest = Manifest::load(&dir)?;
        manifest.verify(&dir)?;
        let config = ExperimentConfig::load(dir.join(CONFIG))?;
        Ok(Self {
            phantom: io::load_image(dir.join(PHANTOM))?,
            maps: io::load_coil_maps(dir.join(MAPS))?,
            trajectory: io::load_trajectory(dir.join(TRAJECTORY))?,
            motion_truth: MotionTrajectory::from_table(&std::fs::read_to_string(dir.join(MOTION_TRUTH))?)?,
            kspace_corrupt: io::load_kspace(dir.join(KSPACE_CORRUPT))?,
            kspace_clean: io::load_kspace(dir.join(KSPACE_CLEAN))?,
            dir,
            config,
            manifest,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconInfo {
    pub method: Method,
    pub acceleration: f64,
}

#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub dir: PathBuf,
    pub method: Method,
    pub image: ComplexImage,
    pub motion: Option<MotionTrajectory>,
}

/// Applies `key=value` overrides restricted to [`RECONSTRUCTION_KEYS`].
pub fn apply_overrides(cfg: &mut ExperimentConfig, overrides: &[(String, String)]) -> Result<()> {
    for (k, v) in overrides {
        if !RECONSTRUCTION_KEYS.contains(&k.as_str()) {
            return Err(Error::InvalidParameter(format!("{k} describes the data and cannot be overridden here")));
        }
        cfg.set(k, v)?;
    }
    cfg.validate()
}

/// Runs `method` on a verified bundle and writes `<bundle>/<method>/`.
pub fn cmd_reconstruct(bundle_dir: impl AsRef<Path>, method: Method, overrides: &[(String, String)]) -> Result<Reconstruction> {
    let bundle = Bundle::open(bundle_dir)?;
    let mut cfg = bundle.config.clone();
    apply_overrides(&mut cfg, overrides)?;
    let out = bundle.dir.join(method.name());
    create_dir(&out)?;

    let (image, motion, trace_csv) = match method {
        Method::Joint => {
            let prior = TotalVariationScore::new(cfg.prior_tv_beta)?;
            let prior_k = MotionPrior::uniform(cfg.motion_bound_deg_px)?;
            let opts = RunOptions { reference: Some(bundle.phantom.clone()), ..Default::default() };
            let run = joint_langevin_with(
                &bundle.kspace_corrupt,
                &bundle.maps,
                &bundle.trajectory,
                &prior,
                &prior_k,
                &cfg.sampler_config()?,
                &opts,
            );
            let run = match run {
                Err(Error::Diverged { iteration, fidelity, initial, trace }) => {
                    io::write_bytes(out.join("trace.csv"), trace.to_csv().as_bytes())?;
                    return Err(Error::Diverged { iteration, fidelity, initial, trace });
                }
                other => other?,
            };
            io::write_bytes(out.join("motion_estimate.tsv"), run.motion.to_table().as_bytes())?;
            (run.image, Some(run.motion), run.trace.to_csv())
        }
        Method::L1Corrupt | Method::L1Clean => {
            let y = if method == Method::L1Corrupt { &bundle.kspace_corrupt } else { &bundle.kspace_clean };
            let lip = MotionOperator::new(&bundle.maps, &bundle.trajectory)?.lipschitz(30, 0x11f)?;
            let bcfg = L1WaveletConfig {
                lambda: cfg.baseline_lambda_rel * lip,
                max_iters: cfg.baseline_max_iters,
                decomposition_levels: cfg.baseline_wavelet_levels,
                ..Default::default()
            };
            let run = l1_wavelet_solve(y, &bundle.maps, &bundle.trajectory, &bcfg)?;
            let mut csv = String::from("iteration,objective\n");
            for (i, v) in run.objective.iter().enumerate() {
                let _ = writeln!(csv, "{},{v}", i + 1);
            }
            (run.image, None, csv)
        }
    };
    io::save_image(out.join("image.cimg"), &image)?;
    io::write_bytes(out.join("trace.csv"), trace_csv.as_bytes())?;
    io::write_bytes(out.join(CONFIG), cfg.to_text().as_bytes())?;
    let info = ReconInfo { method, acceleration: cfg.acceleration };
    io::write_bytes(out.join("recon.json"), serde_json::to_string_pretty(&info)?.as_bytes())?;
    Ok(Reconstruction { dir: out, method, image, motion })
}

/// One evaluated reconstruction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub method: String,
    pub acceleration: f64,
    pub report: EvalReport,
    /// Offset-removed motion MAE; joint reconstructions only.
    pub motion_error: Option<MotionError>,
}

pub const EVAL_HEADER: &str = "method,acceleration,nrmse_raw,nrmse_aligned,align_theta_deg,align_phi_x_px,align_phi_y_px,\
mae_theta_deg,mae_phi_x_px,mae_phi_y_px";

impl EvalRow {
    pub fn csv_fields(&self) -> String {
        let r = &self.report;
        let mut s = format!(
            "{},{},{:.6},{:.6},{:.4},{:.4},{:.4}",
            self.method,
            self.acceleration,
            r.nrmse_raw,
            r.nrmse_aligned,
            r.alignment.theta,
            r.alignment.phi_x,
            r.alignment.phi_y
        );
        match &self.motion_error {
            Some(e) => {
                let _ = write!(s, ",{:.6},{:.6},{:.6}", e.theta, e.phi_x, e.phi_y);
            }
            None => s.push_str(",,,"),
        }
        s
    }
}

fn load_reconstruction(path: &Path) -> Result<(String, ComplexImage, Option<MotionTrajectory>, Option<String>)> {
    if path.is_dir() {
        let info: ReconInfo = serde_json::from_str(&std::fs::read_to_string(path.join("recon.json"))?)?;
        let image = io::load_image(path.join("image.cimg"))?;
        let motion_path = path.join("motion_estimate.tsv");
        let motion = if motion_path.exists() {
            Some(MotionTrajectory::from_table(&std::fs::read_to_string(motion_path)?)?)
        } else {
            None
        };
        let trace = std::fs::read_to_string(path.join("trace.csv")).ok();
        Ok((info.method.name().to_string(), image, motion, trace))
    } else {
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Ok((name, io::load_image(path)?, None, None))
    }
}

/// Scores reconstructions (method directories or bare `.cimg` files)
/// against the bundle phantom. Writes `evaluation.csv` plus plot-data series
/// `plot_trace_<method>.csv` and `plot_motion_<method>.csv` into the bundle.
pub fn cmd_evaluate(bundle_dir: impl AsRef<Path>, recons: &[PathBuf]) -> Result<Vec<EvalRow>> {
    let bundle = Bundle::open(bundle_dir)?;
    let mut rows = Vec::with_capacity(recons.len());
    for path in recons {
        let (method, image, motion, trace) = load_reconstruction(path)?;
        if image.side() != bundle.phantom.side() {
            return Err(Error::Dimension(format!(
                "{} is {} px, phantom is {} px",
                path.display(),
                image.side(),
                bundle.phantom.side()
            )));
        }
        let report = evaluate(&image, &bundle.phantom, true)?;
        let motion_error = match &motion {
            Some(m) => Some(global_offset_removed_error(m, &bundle.motion_truth)?),
            None => None,
        };
        if let Some(trace) = trace {
            io::write_bytes(bundle.dir.join(format!("plot_trace_{method}.csv")), trace.as_bytes())?;
        }
        if let Some(m) = &motion {
            io::write_bytes(bundle.dir.join(format!("plot_motion_{method}.csv")), motion_series(&bundle.motion_truth, m).as_bytes())?;
        }
        rows.push(EvalRow { method, acceleration: bundle.config.acceleration, report, motion_error });
    }
    io::write_bytes(bundle.dir.join("evaluation.csv"), eval_csv(&rows).as_bytes())?;
    Ok(rows)
}

/// `tr,theta_true,theta_est,phi_x_true,phi_x_est,phi_y_true,phi_y_est`
pub fn motion_series(truth: &MotionTrajectory, est: &MotionTrajectory) -> String {
    let mut out = String::from("tr,theta_true,theta_est,phi_x_true,phi_x_est,phi_y_true,phi_y_est\n");
    for (i, (t, e)) in truth.states.iter().zip(&est.states).enumerate() {
        let _ = writeln!(out, "{i},{},{},{},{},{},{}", t.theta, e.theta, t.phi_x, e.phi_x, t.phi_y, e.phi_y);
    }
    out
}

pub fn eval_csv(rows: &[EvalRow]) -> String {
    let mut out = format!("{EVAL_HEADER}\n");
    for r in rows {
        let _ = writeln!(out, "{}", r.csv_fields());
    }
    out
}

#[derive(Clone, Debug)]
pub struct BatchConfig {
    pub base: ExperimentConfig,
    pub accelerations: Vec<f64>,
    /// Instance `i` uses the base seeds shifted by `i`.
    pub instances: usize,
    pub methods: Vec<Method>,
    pub workers: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchRow {
    pub instance: usize,
    pub row: EvalRow,
}

fn bundle_name(accel: f64, instance: usize) -> String {
    format!("R{accel}_i{instance}")
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m == 0 {
        f64::NAN
    } else if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

/// Simulates, reconstructs and evaluates every (instance, R, method) job on
/// a pool of `workers` threads. Writes `batch_results.csv` (one row per job)
/// and `batch_summary.csv` (one row per method and R) into `base.output_dir`.
pub fn cmd_batch(batch: &BatchConfig) -> Result<Vec<BatchRow>> {
    if batch.accelerations.is_empty() || batch.instances == 0 || batch.methods.is_empty() || batch.workers == 0 {
        return Err(Error::InvalidParameter("batch needs accelerations, instances, methods and workers".into()));
    }
    let root = batch.base.output_dir.clone();
    let mut cells = Vec::new();
    for &accel in &batch.accelerations {
        for instance in 0..batch.instances {
            let mut cfg = batch.base.with_seed_offset(instance as u64);
            cfg.acceleration = accel;
            cfg.output_dir = root.join(bundle_name(accel, instance));
            cfg.validate()?;
            cells.push((accel, instance, cfg));
        }
    }
    create_dir(&root)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(batch.workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build worker pool: {e}")))?;

    let rows: Vec<Vec<BatchRow>> = pool.install(|| {
        cells.par_iter().try_for_each(|(_, _, cfg)| cmd_simulate(cfg).map(|_| ()))?;
        let jobs: Vec<(usize, Method)> =
            (0..cells.len()).flat_map(|c| batch.methods.iter().map(move |&m| (c, m))).collect();
        jobs.par_iter()
            .map(|&(c, m)| cmd_reconstruct(&cells[c].2.output_dir, m, &[]).map(|_| ()))
            .collect::<Result<Vec<()>>>()?;
        cells
            .par_iter()
            .map(|(_, instance, cfg)| {
                let dirs: Vec<PathBuf> = batch.methods.iter().map(|m| cfg.output_dir.join(m.name())).collect();
                let rows = cmd_evaluate(&cfg.output_dir, &dirs)?;
                Ok(rows.into_iter().map(|row| BatchRow { instance: *instance, row }).collect())
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let rows: Vec<BatchRow> = rows.into_iter().flatten().collect();

    let mut csv = format!("instance,{EVAL_HEADER}\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{}", r.instance, r.row.csv_fields());
    }
    io::write_bytes(root.join("batch_results.csv"), csv.as_bytes())?;
    io::write_bytes(root.join("batch_summary.csv"), batch_summary(&rows).as_bytes())?;
    Ok(rows)
}

/// One row per (method, R): medians and means of raw and aligned NRMSE.
pub fn batch_summary(rows: &[BatchRow]) -> String {
    let mut groups: BTreeMap<(String, u64), (f64, Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        let e = groups
            .entry((r.row.method.clone(), r.row.acceleration.to_bits()))
            .or_insert((r.row.acceleration, vec![], vec![]));
        e.1.push(r.row.report.nrmse_raw);
        e.2.push(r.row.report.nrmse_aligned);
    }
    let mut out = String::from("method,acceleration,count,median_nrmse_raw,median_nrmse_aligned,mean_nrmse_aligned\n");
    for ((method, _), (accel, mut raw, mut aligned)) in groups {
        let mean = aligned.iter().sum::<f64>() / aligned.len() as f64;
        let _ = writeln!(
            out,
            "{method},{accel},{},{:.6},{:.6},{:.6}",
            raw.len(),
            median(&mut raw),
            median(&mut aligned),
            mean
        );
    }
    out
}

/// Process exit code for an error: 2 configuration, 3 divergence,
/// 4 integrity, 1 anything else.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidParameter(_) => 2,
        Error::Diverged { .. } => 3,
        Error::Integrity(_) | Error::Format(_) => 4,
        _ => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.acceleration = 8.0;
        cfg.kappa_gradient = KappaGradMode::FiniteDifference;
        cfg.output_dir = PathBuf::from("some/dir");
        let back = ExperimentConfig::from_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn config_rejects_unknown_keys_and_bad_geometry() {
        assert!(ExperimentConfig::from_text("colour = red").is_err());
        assert!(ExperimentConfig::from_text("grid_size_px = 60").is_err());
        assert!(ExperimentConfig::from_text("acceleration = 0.5").is_err());
        assert!(ExperimentConfig::from_text("grid_size_px = 64\n# comment\nacceleration = 8  # trailing").is_ok());
    }

    #[test]
    fn methods_parse_by_name() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("joint2".parse::<Method>().is_err());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
