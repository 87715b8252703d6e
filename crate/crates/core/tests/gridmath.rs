mod common;

use common::*;
use jointrecon::gridmath::*;
use jointrecon::{Complex64, Error};
use proptest::prelude::*;
use std::f64::consts::PI;

#[test]
fn impulse_transforms_to_ones() {
    let coords = random_coords(50, 4.0, 1);
    let y = nufft_forward(&ComplexImage::impulse(16), &coords).unwrap();
    for v in y {
        assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-6, "{v}");
    }
}

#[test]
fn forward_matches_direct_sum() {
    let img = random_image(16, 11);
    let coords = random_coords(200, PI, 12);
    let fast = nufft_forward(&img, &coords).unwrap();
    let exact = dft_oracle_forward(&img, &coords).unwrap();
    assert!(rel_l2(&fast, &exact) <= 1e-6, "{}", rel_l2(&fast, &exact));
}

#[test]
fn oracle_agreement_out_of_box() {
    for (i, &n) in [8usize, 16, 32].iter().enumerate() {
        let img = random_image(n, 100 + i as u64);
        let coords = random_coords(512, 1.45 * PI, 200 + i as u64);
        let err = rel_l2(&nufft_forward(&img, &coords).unwrap(), &dft_oracle_forward(&img, &coords).unwrap());
        assert!(err <= 1e-5, "n={n} err={err}");
    }
}

#[test]
fn on_grid_equals_centered_fft() {
    let n = 16;
    let img = random_image(n, 5);
    let coords = KCoords::cartesian(n);
    let fast = nufft_forward(&img, &coords).unwrap();
    let spec = centered_fft(&img);
    assert!(rel_l2(&fast, spec.data()) <= 1e-6);
    // and the FFT route itself agrees with the direct sum
    let exact = dft_oracle_forward(&img, &coords).unwrap();
    assert!(rel_l2(spec.data(), &exact) <= 1e-12);
}

#[test]
fn adjoint_of_dc_sample_is_constant() {
    let img = nufft_adjoint(&[Complex64::new(1.0, 0.0)], &KCoords::new(vec![[0.0, 0.0]]), 16).unwrap();
    let ones = vec![Complex64::new(1.0, 0.0); 256];
    assert!(rel_l2(img.data(), &ones) <= 1e-6);
    // edge pixels carry the largest deapodisation error
    for v in img.data() {
        assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-5, "{v}");
    }
}

#[test]
fn adjoint_dot_product_test() {
    for (i, &n) in [8usize, 16, 32].iter().enumerate() {
        let x = random_image(n, 30 + i as u64);
        let coords = random_coords(300, 4.0, 40 + i as u64);
        let y = random_samples(300, 50 + i as u64);
        let ax = nufft_forward(&x, &coords).unwrap();
        let ahy = nufft_adjoint(&y, &coords, n).unwrap();
        let lhs = vdot(&y, &ax);
        let rhs = vdot(ahy.data(), x.data());
        let rel = (lhs - rhs).norm() / (x.norm() * norm(&y));
        assert!(rel <= 1e-6, "n={n} rel={rel}");
    }
}

#[test]
fn adjoint_matches_direct_sum() {
    let coords = random_coords(64, 4.0, 8);
    let y = random_samples(64, 9);
    let fast = nufft_adjoint(&y, &coords, 16).unwrap();
    let exact = dft_oracle_adjoint(&y, &coords, 16).unwrap();
    assert!(rel_l2(fast.data(), exact.data()) <= 1e-6);
}

#[test]
fn rank_one_round_trip_has_unit_magnitude() {
    let coords = KCoords::new(vec![[0.7, -1.9]]);
    let y = nufft_forward(&ComplexImage::impulse(16), &coords).unwrap();
    let img = nufft_adjoint(&y, &coords, 16).unwrap();
    for v in img.data() {
        assert!((v.norm() - 1.0).abs() < 1e-5, "{v}");
    }
}

#[test]
fn oracle_simple_cases() {
    let coords = random_coords(10, PI, 2);
    let zeros = dft_oracle_forward(&ComplexImage::zeros(8), &coords).unwrap();
    assert!(zeros.iter().all(|v| v.norm() == 0.0));
    let ones = dft_oracle_forward(&ComplexImage::impulse(8), &coords).unwrap();
    assert!(ones.iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-15));
}

#[test]
fn oracle_reassociation() {
    // Column-outer summation with separable phase factors.
    let n = 8;
    let img = random_image(n, 77);
    let coords = random_coords(10, PI, 78);
    let direct = dft_oracle_forward(&img, &coords).unwrap();
    let half = (n / 2) as f64;
    let reassoc: Vec<Complex64> = coords
        .iter()
        .map(|k| {
            (0..n)
                .map(|col| {
                    let ex = Complex64::from_polar(1.0, -k[0] * (col as f64 - half));
                    ex * (0..n)
                        .map(|row| img[(row, col)] * Complex64::from_polar(1.0, -k[1] * (row as f64 - half)))
                        .sum::<Complex64>()
                })
                .sum()
        })
        .collect();
    assert!(rel_l2(&direct, &reassoc) < 1e-13);
}

#[test]
fn error_paths() {
    assert!(matches!(nufft_forward(&ComplexImage::zeros(8), &KCoords::default()), Err(Error::EmptyCoords)));
    assert!(matches!(
        nufft_adjoint(&random_samples(3, 0), &random_coords(4, 1.0, 0), 8),
        Err(Error::LengthMismatch { .. })
    ));
    assert!(matches!(
        dft_oracle_forward(&ComplexImage::zeros(ORACLE_MAX_SIDE + 2), &random_coords(1, 1.0, 0)),
        Err(Error::OracleTooLarge(_))
    ));
    assert!(matches!(ComplexImage::from_vec(4, 5, vec![Complex64::default(); 20]), Err(Error::NotSquare { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn forward_is_linear(seed in 0u64..10_000, a_re in -2.0f64..2.0, a_im in -2.0f64..2.0, b_re in -2.0f64..2.0) {
        let n = 16;
        let x = random_image(n, seed);
        let z = random_image(n, seed + 1);
        let coords = random_coords(64, 4.0, seed + 2);
        let (a, b) = (Complex64::new(a_re, a_im), Complex64::new(b_re, 0.5));
        let mut comb = x.scaled(0.0);
        comb.axpy(a, &x);
        comb.axpy(b, &z);
        let plan = NufftPlan::new(n);
        let lhs = plan.forward(&comb, &coords).unwrap();
        let fx = plan.forward(&x, &coords).unwrap();
        let fz = plan.forward(&z, &coords).unwrap();
        let rhs: Vec<Complex64> = fx.iter().zip(&fz).map(|(p, q)| a * p + b * q).collect();
        prop_assert!(rel_l2(&lhs, &rhs) <= 1e-10);
    }
}
