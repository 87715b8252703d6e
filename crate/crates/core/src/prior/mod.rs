//! Annealing schedules and score providers.

mod denoiser;
mod schedule;
mod score;
mod tv;

pub use denoiser::{denoiser_score, ConvDenoiser, ConvLayer, DenoiserScore, DENOISER_MAGIC, DENOISER_VERSION};
pub use schedule::{geometric_schedule, NoiseSchedule};
pub use score::{
    gaussian_score, log_ndtr, smoothed_laplace_score, GaussianBasis, GaussianScore, NoiseLevel, ScoreProvider,
    WaveletLaplaceScore,
};
pub use tv::TotalVariationScore;
