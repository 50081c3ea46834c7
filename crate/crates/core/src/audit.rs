//! Brute-force check of the main ESI on a small discrete problem.
//!
//! Every training sample `Z₀ ∈ atomsⁿ` is enumerated, and for each one the expected
//! ghost KL against the enumeration prior is computed exactly. The check is
//! `E_{Z₀}[exp(η (gap − RHS(η)))] ≤ 1`.

use std::collections::HashMap;

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bernstein::best_B;
use crate::bounds::{eta_cap, main_bound, BoundConstants, BoundInputs};
use crate::data::{Sample, Supersample};
use crate::error::{invalid, resource, Result};
use crate::learners::DeterministicAlgorithm;
use crate::priors::enumerate_outputs;
use crate::problem::LearningProblem;

/// Largest `|atoms|ⁿ` enumerated.
pub const AUDIT_CAP: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub n: usize,
    pub beta: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub eta: f64,
    /// `E_{Z₀}[exp(η (gap − RHS))]`.
    pub expectation: f64,
    pub holds: bool,
    /// Largest `gap − RHS` over training samples.
    pub worst_slack: f64,
    pub mean_expected_kl: f64,
}

/// Sorted multiset of unordered atom pairs; identifies `⟨z₀, z₁⟩` for order-invariant learners.
type PairKey = Vec<(u8, u8)>;

fn pair_key(z0: &[u8], z1: &[u8]) -> PairKey {
    let mut k: PairKey = z0.iter().zip(z1).map(|(&a, &b)| (a.min(b), a.max(b))).collect();
    k.sort_unstable();
    k
}

fn digits(mut idx: u64, base: u64, n: usize) -> Vec<u8> {
    (0..n)
        .map(|_| {
            let d = (idx % base) as u8;
            idx /= base;
            d
        })
        .collect()
}

/// Audits the main theorem for an order-invariant deterministic learner with the
/// enumeration prior, at each rate in `etas` (default: the largest admissible rate).
///
/// `β` is certified with [`best_B`]; an uncertifiable `β` is an error.
pub fn audit_main_theorem<A: DeterministicAlgorithm>(
    problem: &LearningProblem,
    alg: &A,
    n: usize,
    beta: f64,
    etas: Option<&[f64]>,
) -> Result<Vec<AuditReport>> {
    if n == 0 {
        return invalid("n must be >= 1");
    }
    let d = problem.distribution();
    let a = d.len() as u64;
    if a > u8::MAX as u64 {
        return invalid("audit supports at most 255 atoms");
    }
    let Some(total) = a.checked_pow(n as u32).filter(|&t| t <= AUDIT_CAP) else {
        return resource(format!("{a}^{n} training samples exceed the audit cap {AUDIT_CAP}"));
    };
    let cert = best_B(problem, beta)?;
    if !cert.is_valid() {
        return invalid(format!("beta = {beta} cannot be certified (hypothesis {:?})", cert.violated_by));
    }
    let consts = BoundConstants::new(cert.b)?;
    let default_eta = [eta_cap(n as u64, consts.eta_max)];
    let etas = etas.unwrap_or(&default_eta);

    // ln |H(⟨z̃⟩)| for every multiset of n unordered atom pairs
    let pair_types: Vec<(u8, u8)> = (0..a as u8).combinations_with_replacement(2).map(|v| (v[0], v[1])).collect();
    let keys: Vec<PairKey> = pair_types.iter().copied().combinations_with_replacement(n).collect();
    let atoms = d.atoms();
    let log_h: HashMap<PairKey, f64> = keys
        .into_par_iter()
        .map(|key| {
            let rows = key.iter().map(|&(i, j)| [atoms[i as usize], atoms[j as usize]]).collect();
            let ss = Supersample::new(rows)?;
            let h = enumerate_outputs(alg, &ss)?;
            Ok((key, (h.len() as f64).ln()))
        })
        .collect::<Result<_>>()?;

    let masses = d.masses();
    // per training sample: (mass, gap, excess, expected KL)
    let per_z0: Vec<(f64, f64, f64, f64)> = (0..total)
        .into_par_iter()
        .map(|i| {
            let z0 = digits(i, a, n);
            let mass: f64 = z0.iter().map(|&j| masses[j as usize]).product();
            let sample = Sample::new(z0.iter().map(|&j| atoms[j as usize]).collect())?;
            let f = alg.hypothesis(&sample);
            let emp = problem.hypothesis_empirical_loss(f, &sample);
            let gap = problem.hypothesis_population_loss(f) - emp;
            let excess = problem.empirical_excess(f, &sample);
            let mut ekl = 0.0;
            for g in 0..total {
                let z1 = digits(g, a, n);
                let m1: f64 = z1.iter().map(|&j| masses[j as usize]).product();
                ekl += m1 * log_h[&pair_key(&z0, &z1)];
            }
            Ok((mass, gap, excess, ekl))
        })
        .collect::<Result<_>>()?;

    let mean_kl = per_z0.iter().map(|t| t.0 * t.3).sum();
    etas.iter()
        .map(|&eta| {
            let mut expectation = 0.0;
            let mut worst = f64::NEG_INFINITY;
            for &(mass, gap, excess, ekl) in &per_z0 {
                let rhs = main_bound(&BoundInputs {
                    n: n as u64,
                    beta,
                    b: cert.b,
                    kl_bar: ekl,
                    emp_excess: excess,
                    eta: Some(eta),
                    delta: None,
                })?
                .total;
                worst = worst.max(gap - rhs);
                expectation += mass * (eta * (gap - rhs)).exp();
            }
            Ok(AuditReport {
                n,
                beta,
                b: cert.b,
                eta,
                expectation,
                holds: expectation <= 1.0 + 1e-9,
                worst_slack: worst,
                mean_expected_kl: mean_kl,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::ThresholdErm;

    #[test]
    fn small_audit_holds() {
        let p = LearningProblem::uniform_thresholds(0, 1, 1, 0.2).unwrap();
        let erm = ThresholdErm::for_class(p.class()).unwrap();
        for beta in [0.0, 1.0] {
            let r = audit_main_theorem(&p, &erm, 3, beta, None).unwrap();
            assert!(r[0].holds, "{r:?}");
            assert!(r[0].mean_expected_kl <= 6f64.ln());
        }
    }

    #[test]
    fn audit_cap() {
        let p = LearningProblem::uniform_thresholds(0, 7, 3, 0.2).unwrap();
        let erm = ThresholdErm::for_class(p.class()).unwrap();
        assert!(matches!(
            audit_main_theorem(&p, &erm, 6, 1.0, None),
            Err(crate::Error::ResourceLimit(_))
        ));
    }
}
