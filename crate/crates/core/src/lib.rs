//! Joint rigid-motion estimation and reconstruction of sub-sampled multi-coil
//! MRI by annealed Langevin sampling of the joint posterior over the image and
//! the per-TR motion parameters.
//!
//! The crate is organised bottom-up:
//!
//! * [`gridmath`]: images, k-space coordinates, and the non-uniform Fourier
//!   transform (Kaiser-Bessel gridding) with a brute-force oracle.
//! * [`motion`]: per-TR rigid motion states, simulation, and the box prior.
//! * [`phantom`]: Shepp-Logan phantoms, birdcage coil maps, and Cartesian
//!   echo-train trajectories.
//! * [`acquisition`]: the motion-parameterised forward operator and its adjoint.
//! * [`prior`]: noise schedules and score providers.
//! * [`sampler`]: joint Langevin updates over image and motion.
//! * [`baseline`]: L1-wavelet FISTA reconstruction.
//! * [`metrics`]: NRMSE with rigid alignment.
//! * [`io`] and [`pipeline`]: on-disk formats and the simulate / reconstruct /
//!   evaluate / batch drivers used by the `jointrecon` binary.

pub mod acquisition;
pub mod baseline;
pub mod error;
pub mod gridmath;
pub mod io;
pub mod metrics;
pub mod motion;
pub mod phantom;
pub mod pipeline;
pub mod prior;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
pub use gridmath::{ComplexImage, KCoords};
pub use num_complex::Complex64;
