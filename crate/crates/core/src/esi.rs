//! Exponential stochastic inequalities `X ⊴_η Y ⇔ E[exp(η(X − Y))] ≤ 1`.
//!
//! Every check is phrased on the law of `g = X − Y`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::validate_masses;
use crate::error::{invalid, resource, Result};
use crate::lemma::c_gamma;
use crate::seed::{derive_seed, rng_for, Rng};

/// Exact verdicts accept estimates up to `1 + EXACT_TOL`.
pub const EXACT_TOL: f64 = 1e-12;
/// Failure probability of the Monte-Carlo confidence interval.
pub const MC_DELTA: f64 = 1e-6;
/// Smallest admissible Monte-Carlo trial count.
pub const MC_MIN_TRIALS: usize = 1000;
/// Upper limit on atoms produced by exact convolution.
pub const MAX_ATOMS: usize = 1_000_000;
const BLOCK: usize = 4096;

/// Finitely supported law on the real line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteRealDistribution {
    atoms: Vec<(f64, f64)>,
}

impl FiniteRealDistribution {
    /// Atoms with equal values are merged; the result is sorted by value.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.iter().any(|a| !a.0.is_finite()) {
            return invalid("distribution values must be finite");
        }
        let mut masses: Vec<f64> = atoms.iter().map(|a| a.1).collect();
        validate_masses(&mut masses, "real distribution")?;
        let atoms = atoms.iter().map(|a| a.0).zip(masses).collect();
        Ok(Self {
            atoms: merge_sorted(atoms, 0.0),
        })
    }

    pub fn point(value: f64) -> Self {
        Self {
            atoms: vec![(value, 1.0)],
        }
    }

    /// Uniform over `values` (repeats add up).
    pub fn uniform(values: &[f64]) -> Result<Self> {
        let w = 1.0 / values.len() as f64;
        Self::new(values.iter().map(|&v| (v, w)).collect())
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|(v, m)| v * m).sum()
    }

    pub fn min(&self) -> f64 {
        self.atoms[0].0
    }

    pub fn max(&self) -> f64 {
        self.atoms[self.atoms.len() - 1].0
    }

    /// Law of `f(g)`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.atoms.iter().map(|&(v, m)| (f(v), m)).collect())
    }

    /// `E[exp(η g)]`.
    pub fn mgf(&self, eta: f64) -> f64 {
        self.atoms.iter().map(|(v, m)| m * (eta * v).exp()).sum()
    }
}

/// Sorts by value and merges atoms closer than `tol`.
fn merge_sorted(mut atoms: Vec<(f64, f64)>, tol: f64) -> Vec<(f64, f64)> {
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    for (v, m) in atoms {
        match out.last_mut() {
            Some(last) if (v - last.0).abs() <= tol => last.1 += m,
            _ => out.push((v, m)),
        }
    }
    out.retain(|a| a.1 > 0.0);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EsiMode {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EsiStatus {
    Holds,
    Fails,
    /// The confidence interval straddles 1.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsiVerdict {
    pub eta: f64,
    pub estimate: f64,
    /// Confidence half-width; 0 in exact mode.
    pub margin: f64,
    pub holds: bool,
    pub samples_used: usize,
    pub mode: EsiMode,
    pub status: EsiStatus,
}

impl EsiVerdict {
    fn exact(eta: f64, estimate: f64, atoms: usize) -> Self {
        let holds = estimate <= 1.0 + EXACT_TOL;
        Self {
            eta,
            estimate,
            margin: 0.0,
            holds,
            samples_used: atoms,
            mode: EsiMode::Exact,
            status: if holds { EsiStatus::Holds } else { EsiStatus::Fails },
        }
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta.is_finite()) {
        return invalid(format!("eta = {eta} must be a positive finite rate"));
    }
    Ok(())
}

/// Exact verdict on `E[exp(η g)] ≤ 1`.
pub fn esi_exact(g: &FiniteRealDistribution, eta: f64) -> Result<EsiVerdict> {
    check_eta(eta)?;
    Ok(EsiVerdict::exact(eta, g.mgf(eta), g.len()))
}

/// Monte-Carlo verdict on `E[exp(η g)] ≤ 1` for a sampler with values in `[lo, hi]`.
///
/// Trials run in fixed blocks, each with its own derived stream, and block sums are
/// reduced in block order, so the result does not depend on the thread count.
pub fn esi_mc<F>(sampler: F, lo: f64, hi: f64, eta: f64, m: usize, seed: u64) -> Result<EsiVerdict>
where
    F: Fn(&mut Rng) -> f64 + Sync,
{
    check_eta(eta)?;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return invalid(format!("declared range [{lo}, {hi}] is not a bounded interval"));
    }
    if m < MC_MIN_TRIALS {
        return invalid(format!("Monte-Carlo needs m >= {MC_MIN_TRIALS}, got {m}"));
    }
    let (e_lo, e_hi) = ((eta * lo).exp(), (eta * hi).exp());
    if !e_hi.is_finite() {
        return invalid("exp(eta * hi) overflows");
    }
    let blocks = m.div_ceil(BLOCK);
    let sums: Vec<Result<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng_for(seed, &[b as u64]);
            let len = BLOCK.min(m - b * BLOCK);
            let mut s = 0.0;
            for _ in 0..len {
                let v = sampler(&mut rng);
                if !(lo..=hi).contains(&v) {
                    return invalid(format!("sample {v} outside declared range [{lo}, {hi}]"));
                }
                s += (eta * v).exp();
            }
            Ok(s)
        })
        .collect();
    let mut total = 0.0;
    for s in sums {
        total += s?;
    }
    let estimate = total / m as f64;
    let margin = (e_hi - e_lo) * ((2.0 / MC_DELTA).ln() / (2.0 * m as f64)).sqrt();
    let status = if estimate + margin <= 1.0 {
        EsiStatus::Holds
    } else if estimate - margin > 1.0 {
        EsiStatus::Fails
    } else {
        EsiStatus::Inconclusive
    };
    Ok(EsiVerdict {
        eta,
        estimate,
        margin,
        holds: status == EsiStatus::Holds,
        samples_used: m,
        mode: EsiMode::MonteCarlo,
        status,
    })
}

/// Deviation `ln(1/δ)/η` allowed with probability `1 − δ`.
pub fn esi_high_prob_term(eta: f64, delta: f64) -> Result<f64> {
    check_eta(eta)?;
    if !(delta > 0.0 && delta < 1.0) {
        return invalid(format!("delta = {delta} must lie in (0, 1)"));
    }
    Ok((1.0 / delta).ln() / eta)
}

/// Rate `(Σ 1/γᵢ)⁻¹` of a chain of ESIs.
pub fn esi_chain(gammas: &[f64]) -> Result<f64> {
    if gammas.is_empty() {
        return invalid("esi_chain needs at least one rate");
    }
    for &g in gammas {
        check_eta(g)?;
    }
    Ok(1.0 / gammas.iter().map(|g| 1.0 / g).sum::<f64>())
}

/// `P(g > t)`.
pub fn tail_mass(g: &FiniteRealDistribution, t: f64) -> f64 {
    g.atoms().iter().filter(|a| a.0 > t).map(|a| a.1).sum()
}

/// Law of the sum of `n` iid copies, or `None` once an intermediate law exceeds `cap` atoms.
pub fn convolve_n(g: &FiniteRealDistribution, n: usize, cap: usize) -> Option<FiniteRealDistribution> {
    assert!(n >= 1, "convolve_n needs n >= 1");
    let mut acc = g.atoms.clone();
    for _ in 1..n {
        if acc.len().saturating_mul(g.len()) > cap.saturating_mul(4) {
            return None;
        }
        let mut next = Vec::with_capacity(acc.len() * g.len());
        for &(a, ma) in &acc {
            for &(b, mb) in &g.atoms {
                next.push((a + b, ma * mb));
            }
        }
        // sums reached along different orders differ only by rounding
        acc = merge_sorted(next, 1e-12);
        if acc.len() > cap {
            return None;
        }
    }
    Some(FiniteRealDistribution { atoms: acc })
}

/// Exact check of `E[U] − U ⊴_η ½ η c U²` for `U ≤ b`.
pub fn unexpected_bernstein_margin(u: &FiniteRealDistribution, b: f64, eta: f64, c_eta: f64) -> Result<EsiVerdict> {
    check_eta(eta)?;
    if !(b > 0.0) {
        return invalid("upper bound b must be positive");
    }
    if u.max() > b {
        return invalid(format!("U takes value {} above b = {b}", u.max()));
    }
    if eta * b >= 1.0 {
        return invalid(format!("eta = {eta} must be below 1/b = {}", 1.0 / b));
    }
    let threshold = c_gamma(eta * b)?;
    if c_eta < threshold * (1.0 - 1e-12) {
        return invalid(format!("c_eta = {c_eta} is below the admissible minimum {threshold}"));
    }
    let mean = u.mean();
    let g = u.map(|x| mean - x - 0.5 * eta * c_eta * x * x)?;
    esi_exact(&g, eta)
}

/// What to do when exact convolution would exceed [`MAX_ATOMS`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fallback {
    Error,
    MonteCarlo { trials: usize, seed: u64 },
}

/// Check of `L(f*; D) − L(f*; Z₀) ⊴_η remainder` for a loss law on `[0, 1]` and sample size `n`.
///
/// `remainder = None` uses the Hoeffding value `2η/n`.
pub fn hoeffding_esi_margin(
    loss: &FiniteRealDistribution,
    eta: f64,
    n: usize,
    remainder: Option<f64>,
    fallback: Fallback,
) -> Result<EsiVerdict> {
    check_eta(eta)?;
    if n == 0 {
        return invalid("sample size n must be >= 1");
    }
    if loss.min() < 0.0 || loss.max() > 1.0 {
        return invalid("loss values must lie in [0, 1]");
    }
    let rem = remainder.unwrap_or(2.0 * eta / n as f64);
    let mu = loss.mean();
    let nf = n as f64;
    if let Some(sum) = convolve_n(loss, n, MAX_ATOMS) {
        let g = sum.map(|s| mu - s / nf - rem)?;
        return esi_exact(&g, eta);
    }
    match fallback {
        Fallback::Error => resource(format!(
            "exact {n}-fold convolution exceeds {MAX_ATOMS} atoms"
        )),
        Fallback::MonteCarlo { trials, seed } => {
            let values: Vec<f64> = loss.atoms().iter().map(|a| a.0).collect();
            let masses: Vec<f64> = loss.atoms().iter().map(|a| a.1).collect();
            let index = rand::distributions::WeightedIndex::new(&masses)
                .map_err(|e| crate::error::Error::InvalidInput(e.to_string()))?;
            let sampler = |rng: &mut Rng| {
                use rand::distributions::Distribution;
                let s: f64 = (0..n).map(|_| values[index.sample(rng)]).sum();
                (mu - s / nf - rem).clamp(mu - 1.0 - rem, mu - rem)
            };
            esi_mc(sampler, mu - 1.0 - rem, mu - rem, eta, trials, derive_seed(seed, &[n as u64]))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn rademacher() -> FiniteRealDistribution {
        FiniteRealDistribution::uniform(&[-1.0, 1.0]).unwrap()
    }

    #[test]
    fn exact_examples() {
        let v = esi_exact(&FiniteRealDistribution::point(0.0), 3.0).unwrap();
        assert_eq!(v.estimate, 1.0);
        assert!(v.holds && v.margin == 0.0);
        let v = esi_exact(&FiniteRealDistribution::point(-1.0), 1.0).unwrap();
        assert!((v.estimate - (-1.0f64).exp()).abs() < 1e-15 && v.holds);
        let v = esi_exact(&rademacher(), 0.5).unwrap();
        assert!((v.estimate - 0.5f64.cosh()).abs() < 1e-15 && !v.holds);
        assert!(esi_exact(&rademacher(), 0.0).is_err());
    }

    #[test]
    fn mc_examples() {
        let v = esi_mc(|_| 0.0, 0.0, 0.0, 1.0, 1000, 1).unwrap();
        // a degenerate range leaves no slack: exactly at the boundary
        assert_eq!(v.status, EsiStatus::Holds);
        let v = esi_mc(|_| 0.0, -1.0, 1.0, 1.0, 1000, 1).unwrap();
        assert_eq!(v.status, EsiStatus::Inconclusive);
        assert!(!v.holds);
        let v = esi_mc(|_| -2.0, -2.0, -2.0, 1.0, 10_000, 1).unwrap();
        assert!((v.estimate - (-2.0f64).exp()).abs() < 1e-12 && v.holds);
        assert!(esi_mc(|_| 0.0, 0.0, f64::INFINITY, 1.0, 1000, 1).is_err());
        assert!(esi_mc(|_| 0.0, 0.0, 1.0, 1.0, 999, 1).is_err());
        assert!(esi_mc(|_| 2.0, 0.0, 1.0, 1.0, 1000, 1).is_err());
    }

    #[test]
    fn mc_rademacher_detects_failure() {
        let s = |rng: &mut Rng| if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let v = esi_mc(s, -1.0, 1.0, 0.1, 1_000_000, 7).unwrap();
        assert!((v.estimate - 0.1f64.cosh()).abs() < 1e-3);
        assert!(!v.holds);
        assert_eq!(v, esi_mc(s, -1.0, 1.0, 0.1, 1_000_000, 7).unwrap());
    }

    #[test]
    fn high_prob_and_chain() {
        assert!((esi_high_prob_term(1.0, (-1.0f64).exp()).unwrap() - 1.0).abs() < 1e-15);
        assert!((esi_high_prob_term(2.0, (-4.0f64).exp()).unwrap() - 2.0).abs() < 1e-15);
        assert!((esi_high_prob_term(0.5, 0.05).unwrap() - 20f64.ln() / 0.5).abs() < 1e-12);
        assert!(esi_high_prob_term(1.0, 1.0).is_err());
        assert!((esi_chain(&[0.3, 0.3]).unwrap() - 0.15).abs() < 1e-15);
        assert!((esi_chain(&[1.0, 2.0, 3.0]).unwrap() - 6.0 / 11.0).abs() < 1e-15);
        assert_eq!(esi_chain(&[0.7]).unwrap(), 0.7);
        assert!(esi_chain(&[]).is_err());
    }

    #[test]
    fn unexpected_bernstein_examples() {
        let c = c_gamma(0.25).unwrap();
        let v = unexpected_bernstein_margin(&FiniteRealDistribution::point(0.0), 1.0, 0.25, c).unwrap();
        assert_eq!(v.estimate, 1.0);
        let u = FiniteRealDistribution::uniform(&[0.0, 1.0]).unwrap();
        let v = unexpected_bernstein_margin(&u, 1.0, 0.25, c).unwrap();
        let oracle = 0.5 * (0.25f64 * 0.5).exp() + 0.5 * (0.25 * (0.5 - 1.0 - 0.125 * c)).exp();
        assert!((v.estimate - oracle).abs() < 1e-15 && v.holds);
        assert!(unexpected_bernstein_margin(&u, 1.0, 0.25, 0.9 * c).is_err());
        assert!(unexpected_bernstein_margin(&u, 1.0, 1.0, 10.0).is_err());
    }

    #[test]
    fn hoeffding_examples() {
        let v = hoeffding_esi_margin(&FiniteRealDistribution::point(0.3), 0.5, 3, None, Fallback::Error).unwrap();
        assert!((v.estimate - (-2.0 * 0.25f64 / 3.0).exp()).abs() < 1e-15 && v.holds);
        let bern = FiniteRealDistribution::uniform(&[0.0, 1.0]).unwrap();
        let oracle = |rem: f64| {
            (0..=4)
                .map(|k| {
                    let binom = [1.0, 4.0, 6.0, 4.0, 1.0][k] / 16.0;
                    binom * (0.5 - k as f64 / 4.0 - rem).exp()
                })
                .sum::<f64>()
        };
        let v = hoeffding_esi_margin(&bern, 1.0, 4, None, Fallback::Error).unwrap();
        assert!((v.estimate - oracle(0.5)).abs() < 1e-14 && v.holds);
        let v = hoeffding_esi_margin(&bern, 1.0, 4, Some(0.0), Fallback::Error).unwrap();
        assert!((v.estimate - 0.125f64.cosh().powi(4)).abs() < 1e-14 && !v.holds);
    }

    #[test]
    fn hoeffding_falls_back_or_errors() {
        let vals: Vec<f64> = (0..101).map(|i| (i as f64 / 100.0).sqrt()).collect();
        let g = FiniteRealDistribution::uniform(&vals).unwrap();
        assert!(matches!(
            hoeffding_esi_margin(&g, 1.0, 40, None, Fallback::Error),
            Err(crate::Error::ResourceLimit(_))
        ));
        let v = hoeffding_esi_margin(&g, 1.0, 40, None, Fallback::MonteCarlo { trials: 20_000, seed: 3 }).unwrap();
        assert_eq!(v.mode, EsiMode::MonteCarlo);
        assert!(v.estimate < 1.0);
    }

    #[test]
    fn convolution_of_bernoulli_is_binomial() {
        let bern = FiniteRealDistribution::uniform(&[0.0, 1.0]).unwrap();
        let s = convolve_n(&bern, 6, MAX_ATOMS).unwrap();
        assert_eq!(s.len(), 7);
        assert!((s.atoms()[3].1 - 20.0 / 64.0).abs() < 1e-15);
        assert!((tail_mass(&s, 4.5) - 7.0 / 64.0).abs() < 1e-15);
    }
}
