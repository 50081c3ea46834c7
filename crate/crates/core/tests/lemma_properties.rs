use fastrate_core::lemma::{c_const, c_gamma, lemma1_margin, lemma1_sweep, CRule, Region};
use proptest::prelude::*;

proptest! {
    #[test]
    fn c_gamma_increasing(a in 1e-6..0.98f64, d in 1e-4..0.01f64) {
        prop_assert!(c_gamma(a).unwrap() < c_gamma(a + d).unwrap());
    }

    #[test]
    fn c_const_increasing_in_eta(eta in 0.001..0.25f64, d in 1e-3..0.02f64) {
        prop_assert!(c_const(2.0, eta).unwrap() < c_const(2.0, eta + d).unwrap());
    }

    #[test]
    fn margin_nonincreasing_in_c(r0 in -1.0..=1.0f64, r1 in -1.0..=1.0f64, eta in 0.01..1.0f64, c in 0.0..10.0f64, dc in 0.0..5.0f64) {
        let lo = lemma1_margin(r0, r1, eta, c + dc).unwrap();
        let hi = lemma1_margin(r0, r1, eta, c).unwrap();
        prop_assert!(lo <= hi + 1e-15);
    }

    #[test]
    fn margin_symmetric(r0 in -1.0..=1.0f64, r1 in -1.0..=1.0f64, eta in 0.01..1.0f64, c in 0.0..10.0f64) {
        let a = lemma1_margin(r0, r1, eta, c).unwrap();
        let b = lemma1_margin(r1, r0, eta, c).unwrap();
        prop_assert!((a - b).abs() <= 1e-15);
    }

    #[test]
    fn closed_constant_valid_off_grid(r0 in -1.0..=1.0f64, r1 in -1.0..=1.0f64, eta in 0.001..0.25f64) {
        let c = c_const(2.0, eta).unwrap();
        prop_assert!(lemma1_margin(r0, r1, eta, c).unwrap() <= 1.0 + 1e-12);
    }
}

#[test]
fn too_small_constant_fails_the_sweep() {
    let r = lemma1_sweep(0.01, &[0.25], CRule::Fixed(1.0), Region::General).unwrap();
    assert!(!r.passes());
}
