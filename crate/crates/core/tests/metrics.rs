mod common;

use jointrecon::metrics::{align_to_reference, evaluate, inverse_transform, nrmse, rigid_transform};
use jointrecon::motion::MotionState;
use jointrecon::phantom::shepp_logan;
use jointrecon::{Complex64, ComplexImage};
use proptest::prelude::*;

fn blob(n: usize) -> ComplexImage {
    let c = n as f64 / 2.0;
    ComplexImage::from_fn(n, |r, col| {
        let dx = col as f64 - c - 3.0;
        let dy = r as f64 - c + 2.0;
        let a = (-(dx * dx / 40.0 + dy * dy / 15.0)).exp();
        let b = 0.6 * (-((dx + 9.0).powi(2) + (dy - 6.0).powi(2)) / 12.0).exp();
        Complex64::new(a + b, 0.0)
    })
}

#[test]
fn rotation_is_undone_by_alignment() {
    let reference = blob(48);
    let moved = rigid_transform(&reference, &MotionState::new(2.0, 0.0, 0.0)).unwrap();
    let (aligned, t) = align_to_reference(&moved, &reference).unwrap();
    assert!((t.theta + 2.0).abs() < 0.05, "{t:?}");
    assert!(t.phi_x.abs() < 0.05 && t.phi_y.abs() < 0.05, "{t:?}");
    assert!(nrmse(&aligned, &reference, true).unwrap() < 1e-2);
}

#[test]
fn shift_is_undone_by_alignment() {
    let reference = blob(48);
    let moved = rigid_transform(&reference, &MotionState::new(0.0, 1.5, -0.75)).unwrap();
    let (_, t) = align_to_reference(&moved, &reference).unwrap();
    assert!(t.theta.abs() < 0.05, "{t:?}");
    assert!((t.phi_x + 1.5).abs() < 0.05 && (t.phi_y - 0.75).abs() < 0.05, "{t:?}");
}

#[test]
fn alignment_estimate_is_inverse_of_applied_motion() {
    let reference = blob(48);
    let applied = MotionState::new(-1.5, 0.8, 1.2);
    let moved = rigid_transform(&reference, &applied).unwrap();
    let (_, t) = align_to_reference(&moved, &reference).unwrap();
    let want = inverse_transform(&applied);
    assert!((t.theta - want.theta).abs() < 0.05, "{t:?} vs {want:?}");
    assert!((t.phi_x - want.phi_x).abs() < 0.05 && (t.phi_y - want.phi_y).abs() < 0.05, "{t:?} vs {want:?}");
}

#[test]
fn aligning_the_reference_is_the_identity() {
    let reference = shepp_logan(32, 1).unwrap();
    let (aligned, t) = align_to_reference(&reference, &reference).unwrap();
    assert_eq!(t, MotionState::default());
    assert_eq!(aligned, reference);
}

#[test]
fn alignment_is_idempotent() {
    let reference = blob(32);
    let moved = rigid_transform(&reference, &MotionState::new(1.0, -0.5, 0.25)).unwrap();
    let (once, _) = align_to_reference(&moved, &reference).unwrap();
    let (twice, second) = align_to_reference(&once, &reference).unwrap();
    for v in [second.theta, second.phi_x, second.phi_y] {
        assert!(v.abs() <= 0.01 + 1e-12, "{second:?}");
    }
    let a = nrmse(&once, &reference, true).unwrap();
    let b = nrmse(&twice, &reference, true).unwrap();
    assert!(b <= a + 1e-12 && a - b < 1e-3, "{a} then {b}");
}

#[test]
fn transform_and_inverse_compose_to_identity() {
    let img = blob(32);
    let s = MotionState::new(3.0, 1.25, -0.5);
    let back = rigid_transform(&rigid_transform(&img, &s).unwrap(), &inverse_transform(&s)).unwrap();
    let e = nrmse(&back, &img, false).unwrap();
    assert!(e < 1e-2, "{e}");
}

#[test]
fn report_serializes_to_json() {
    let reference = blob(32);
    let rep = evaluate(&reference.scaled(1.1), &reference, true).unwrap();
    let v: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
    assert!((v["nrmse_raw"].as_f64().unwrap() - 0.1).abs() < 1e-9);
    assert!(v["alignment"].is_object());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn nrmse_of_scaled_image(seed in 0u64..1000, alpha in -3.0f64..3.0) {
        let x = common::random_image(8, seed);
        let got = nrmse(&x.scaled(alpha), &x, false).unwrap();
        prop_assert!((got - (alpha - 1.0).abs()).abs() < 1e-12);
    }

    #[test]
    fn magnitude_nrmse_of_nonnegative_scaling(seed in 0u64..1000, alpha in 0.0f64..3.0) {
        let x = common::random_image(8, seed);
        let got = nrmse(&x.scaled(alpha), &x, true).unwrap();
        prop_assert!((got - (alpha - 1.0).abs()).abs() < 1e-12);
    }

    #[test]
    fn magnitude_nrmse_ignores_global_phase(seed in 0u64..1000, phase in 0.0f64..6.28) {
        let x = common::random_image(8, seed);
        let mut y = x.clone();
        y.data_mut().iter_mut().for_each(|v| *v *= Complex64::from_polar(1.0, phase));
        prop_assert!(nrmse(&y, &x, true).unwrap() < 1e-12);
    }

    #[test]
    fn nrmse_is_nonnegative_and_zero_on_self(seed in 0u64..1000) {
        let x = common::random_image(8, seed);
        let y = common::random_image(8, seed + 1);
        prop_assert!(nrmse(&y, &x, true).unwrap() >= 0.0);
        prop_assert_eq!(nrmse(&x, &x, false).unwrap(), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn aligned_nrmse_never_exceeds_raw(seed in 0u64..100) {
        let reference = shepp_logan(32, seed).unwrap();
        let est = common::random_image(32, seed).scaled(0.1);
        let mut noisy = reference.clone();
        noisy.axpy(Complex64::new(1.0, 0.0), &est);
        let rep = evaluate(&noisy, &reference, true).unwrap();
        prop_assert!(rep.nrmse_aligned <= rep.nrmse_raw);
    }
}
