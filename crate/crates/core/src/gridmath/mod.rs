//! Complex images, k-space coordinates and the non-uniform Fourier transform.

mod dft;
pub mod fft;
mod image;
mod nufft;

pub use dft::{dft_oracle_adjoint, dft_oracle_forward, ORACLE_MAX_SIDE};
pub use fft::{centered_fft, centered_ifft, Fft2};
pub use image::{ComplexImage, KCoords};
pub use nufft::{bessel_i0, nufft_adjoint, nufft_forward, KaiserBessel, NufftPlan, Spectrum, KERNEL_WIDTH, OVERSAMPLING};
