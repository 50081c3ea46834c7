use fastrate_core::esi::{
    convolve_n, esi_chain, esi_exact, esi_high_prob_term, esi_mc, hoeffding_esi_margin, tail_mass,
    unexpected_bernstein_margin, EsiStatus, Fallback, FiniteRealDistribution,
};
use proptest::prelude::*;

fn law() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-2.0..2.0f64, 0.01..1.0f64), 1..6)
}

/// Shifts `g` so that `E[exp(η g)] = 1` exactly.
fn tighten(raw: &[(f64, f64)], eta: f64) -> FiniteRealDistribution {
    let z: f64 = raw.iter().map(|a| a.1).sum();
    let shift = raw.iter().map(|a| a.1 / z * (eta * a.0).exp()).sum::<f64>().ln() / eta;
    FiniteRealDistribution::new(raw.iter().map(|a| (a.0 - shift, a.1 / z)).collect()).unwrap()
}

/// `2(−ln(1−x) − x)/x²`, by series below ½ to avoid cancellation.
fn two_theta(x: f64) -> f64 {
    if x < 0.5 {
        (2..200).map(|k| 2.0 * x.powi(k - 2) / k as f64).sum()
    } else {
        2.0 * (-(1.0 - x).ln() - x) / (x * x)
    }
}

proptest! {
    #[test]
    fn harmonic_chain_of_dependent_pair(
        pts in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64, 0.01..1.0f64), 1..6),
        g1 in 0.05..3.0f64,
        g2 in 0.05..3.0f64,
    ) {
        let tot: f64 = pts.iter().map(|p| p.2).sum();
        let s1 = pts.iter().map(|p| p.2 / tot * (g1 * p.0).exp()).sum::<f64>().ln() / g1;
        let s2 = pts.iter().map(|p| p.2 / tot * (g2 * p.1).exp()).sum::<f64>().ln() / g2;
        let sum = FiniteRealDistribution::new(pts.iter().map(|p| (p.0 - s1 + p.1 - s2, p.2 / tot)).collect()).unwrap();
        let v = esi_chain(&[g1, g2]).unwrap();
        prop_assert!(esi_exact(&sum, v).unwrap().holds);
    }

    #[test]
    fn iid_sum_keeps_rate(raw in law(), eta in 0.05..2.0f64, n in 1usize..=10) {
        let g = tighten(&raw, eta);
        let sum = convolve_n(&g, n, 1_000_000).unwrap();
        let v = esi_exact(&sum, eta).unwrap();
        prop_assert!(v.estimate <= 1.0 + 1e-12, "{}", v.estimate);
    }

    #[test]
    fn quantile_implication(raw in law(), eta in 0.05..3.0f64) {
        let g = tighten(&raw, eta);
        for delta in [0.5, 0.1, 0.01] {
            let t = esi_high_prob_term(eta, delta).unwrap();
            prop_assert!(tail_mass(&g, t) <= delta + 1e-12);
        }
        prop_assert!(g.mean() <= 1e-12);
    }

    #[test]
    fn nonpositive_law_is_monotone_in_eta(raw in prop::collection::vec((-3.0..=0.0f64, 0.01..1.0f64), 1..6), eta in 0.01..5.0f64, frac in 0.0..1.0f64) {
        let z: f64 = raw.iter().map(|a| a.1).sum();
        let g = FiniteRealDistribution::new(raw.iter().map(|a| (a.0, a.1 / z)).collect()).unwrap();
        let lower = (eta * frac).max(1e-6);
        prop_assert!(esi_exact(&g, eta).unwrap().holds);
        prop_assert!(esi_exact(&g, lower).unwrap().holds);
    }

    #[test]
    fn unexpected_bernstein_two_atoms(a in -3.0..1.0f64, b_val in -3.0..1.0f64, q in 0.01..0.99f64, x in 0.01..0.99f64) {
        let u = FiniteRealDistribution::new(vec![(a, q), (b_val, 1.0 - q)]).unwrap();
        let c = two_theta(x);
        let v = unexpected_bernstein_margin(&u, 1.0, x, c).unwrap();
        prop_assert!(v.estimate <= 1.0 + 1e-12);
    }

    #[test]
    fn hoeffding_bernoulli(q in 0.0..=1.0f64, n in 1usize..=8, eta in 0.01..4.0f64) {
        let loss = FiniteRealDistribution::new(vec![(0.0, 1.0 - q), (1.0, q)]).unwrap();
        let v = hoeffding_esi_margin(&loss, eta, n, None, Fallback::Error).unwrap();
        prop_assert!(v.estimate <= 1.0 + 1e-12);
    }
}

fn cosh_oracle(eta: f64) -> f64 {
    (eta.exp() + (-eta).exp()) / 2.0
}

#[test]
fn rademacher_mc_matches_cosh() {
    let v = esi_mc(|r| if rand::Rng::gen_bool(r, 0.5) { 1.0 } else { -1.0 }, -1.0, 1.0, 0.1, 1_000_000, 3).unwrap();
    assert!((v.estimate - cosh_oracle(0.1)).abs() <= v.margin);
    assert_eq!(v.status, EsiStatus::Fails);
    let w = esi_mc(|r| if rand::Rng::gen_bool(r, 0.5) { 1.0 } else { -1.0 }, -1.0, 1.0, 0.1, 1_000_000, 3).unwrap();
    assert_eq!(v, w);
}

#[test]
fn hoeffding_needs_its_remainder() {
    let loss = FiniteRealDistribution::new(vec![(0.0, 0.5), (1.0, 0.5)]).unwrap();
    assert!(hoeffding_esi_margin(&loss, 1.0, 4, None, Fallback::Error).unwrap().holds);
    assert!(!hoeffding_esi_margin(&loss, 1.0, 4, Some(0.0), Fallback::Error).unwrap().holds);
}

#[test]
fn convolution_fallback() {
    let g = FiniteRealDistribution::new((0..50).map(|i| (i as f64 / 49.0 + 1e-3 * (i * i) as f64 / 2401.0, 0.02)).collect()).unwrap();
    assert!(convolve_n(&g, 6, 1_000_000).is_none());
    let loss = g.map(|x| x / g.max()).unwrap();
    assert!(matches!(
        hoeffding_esi_margin(&loss, 1.0, 6, None, Fallback::Error),
        Err(fastrate_core::Error::ResourceLimit(_))
    ));
    let v = hoeffding_esi_margin(&loss, 1.0, 6, None, Fallback::MonteCarlo { trials: 20_000, seed: 1 }).unwrap();
    assert!(v.estimate < 1.0);
}
