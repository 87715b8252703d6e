//! Non-uniform FFT against the brute-force DFT, plus the adjoint test.

use jointrecon::gridmath::{dft_oracle_forward, nufft_adjoint, nufft_forward, KCoords};
use jointrecon::phantom::shepp_logan;
use jointrecon::{rng, Complex64};
use rand::Rng;

fn main() -> jointrecon::Result<()> {
    let n = 32;
    let image = shepp_logan(n, 0)?;
    let mut r = rng::seeded(7);
    // includes coordinates outside [-pi, pi), as produced by rotating corners
    let coords = KCoords::new((0..400).map(|_| [r.random_range(-4.4..4.4), r.random_range(-4.4..4.4)]).collect());

    let fast = nufft_forward(&image, &coords)?;
    let exact = dft_oracle_forward(&image, &coords)?;
    let err: f64 = fast.iter().zip(&exact).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
        / exact.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    println!("forward vs DFT, relative L2 error: {err:.2e}");

    let y: Vec<Complex64> = (0..coords.len()).map(|_| rng::complex_normal(&mut r, 1.0)).collect();
    let lhs: Complex64 = fast.iter().zip(&y).map(|(a, b)| a.conj() * b).sum();
    let back = nufft_adjoint(&y, &coords, n)?;
    let rhs: Complex64 = image.data().iter().zip(back.data()).map(|(a, b)| a.conj() * b).sum();
    println!("<Ax, y> = {lhs:.6}");
    println!("<x, A^H y> = {rhs:.6}");
    println!("adjoint mismatch: {:.2e}", (lhs - rhs).norm() / lhs.norm());
    Ok(())
}
