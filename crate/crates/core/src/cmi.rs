//! Disintegrated and conditional mutual information of an algorithm.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Selector, Supersample};
use crate::distribution::{draw_supersample, DiscreteDistribution};
use crate::error::{invalid, resource, Result};
use crate::learners::Algorithm;
use crate::priors::{kl, mean_and_se, selection_average, GHOST_CAP, SELECTOR_CAP};
use crate::seed::derive_seed;

/// `I^{z̃}(A|z̃_S; S) = E_S[KL(A|z̃_S ‖ E_{S′}[A|z̃_{S′}])]`, by enumerating all selectors.
pub fn disintegrated_mi<A: Algorithm + ?Sized>(alg: &A, ss: &Supersample) -> Result<f64> {
    let n = ss.n();
    if n > SELECTOR_CAP {
        return resource(format!("2^{n} selectors exceed the cap 2^{SELECTOR_CAP}"));
    }
    let mean = selection_average(alg, ss)?;
    let w = 1.0 / (1u64 << n) as f64;
    let mut total = 0.0;
    for i in 0..1u64 << n {
        let p = alg.posterior(&ss.selected(&Selector::from_index(i, n))?);
        // the mixture dominates every component, so this is always finite
        total += w * kl(&p, &mean).nats();
    }
    Ok(total.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmiMode {
    Exact,
    MonteCarlo { budget: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmiEstimate {
    pub value: f64,
    pub exact: bool,
    pub std_error: f64,
    pub supersamples_used: u64,
}

/// `CMI(A; D) = E_{Z̃ ∼ D^{n×2}}[I^{Z̃}]`.
pub fn cmi<A: Algorithm + ?Sized>(alg: &A, d: &DiscreteDistribution, n: usize, mode: CmiMode) -> Result<CmiEstimate> {
    if n == 0 {
        return invalid("sample size n must be >= 1");
    }
    match mode {
        CmiMode::Exact => {
            let a = d.len() as u64;
            let Some(total) = a.checked_pow(2 * n as u32).filter(|&t| t <= GHOST_CAP) else {
                return resource(format!("{a}^{} supersamples exceed the cap {GHOST_CAP}", 2 * n));
            };
            let terms: Vec<f64> = (0..total)
                .into_par_iter()
                .map(|i| {
                    let (ss, mass) = supersample_from_index(d, n, i);
                    disintegrated_mi(alg, &ss).map(|v| mass * v)
                })
                .collect::<Result<_>>()?;
            Ok(CmiEstimate {
                value: terms.iter().sum(),
                exact: true,
                std_error: 0.0,
                supersamples_used: total,
            })
        }
        CmiMode::MonteCarlo { budget, seed } => {
            if budget < 2 {
                return invalid("Monte-Carlo CMI needs a budget of at least 2 supersamples");
            }
            let vals: Vec<f64> = (0..budget as u64)
                .into_par_iter()
                .map(|b| {
                    let ss = draw_supersample(d, n, derive_seed(seed, &[b]))?;
                    disintegrated_mi(alg, &ss)
                })
                .collect::<Result<_>>()?;
            let (value, std_error) = mean_and_se(&vals);
            Ok(CmiEstimate {
                value,
                exact: false,
                std_error,
                supersamples_used: budget as u64,
            })
        }
    }
}

/// Supersample number `idx` in mixed radix over the atoms, with its probability.
pub fn supersample_from_index(d: &DiscreteDistribution, n: usize, mut idx: u64) -> (Supersample, f64) {
    let a = d.len() as u64;
    let mut mass = 1.0;
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let (i, j) = ((idx % a) as usize, ((idx / a) % a) as usize);
        idx /= a * a;
        mass *= d.masses()[i] * d.masses()[j];
        rows.push([d.atoms()[i], d.atoms()[j]]);
    }
    (Supersample::new(rows).expect("n >= 1"), mass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Example, Sample};
    use crate::learners::{FnAlgorithm, ThresholdErm};
    use crate::problem::LearningProblem;

    #[test]
    fn constant_algorithm_has_zero_cmi() {
        let p = LearningProblem::uniform_thresholds(1, 3, 2, 0.1).unwrap();
        let alg = FnAlgorithm(|_: &Sample| 1);
        let exact = cmi(&alg, p.distribution(), 2, CmiMode::Exact).unwrap();
        assert_eq!(exact.value, 0.0);
        let mc = cmi(&alg, p.distribution(), 3, CmiMode::MonteCarlo { budget: 50, seed: 1 }).unwrap();
        assert_eq!(mc.value, 0.0);
    }

    #[test]
    fn one_row_distinguishing_algorithm() {
        let alg = FnAlgorithm(|z: &Sample| z[0].x as usize);
        let ss = Supersample::new(vec![[Example::new(1, 0.0), Example::new(2, 0.0)]]).unwrap();
        assert!((disintegrated_mi(&alg, &ss).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn threshold_cmi_below_ln_2n() {
        let p = LearningProblem::uniform_thresholds(1, 4, 2, 0.2).unwrap();
        let erm = ThresholdErm::for_class(p.class()).unwrap();
        let est = cmi(&erm, p.distribution(), 2, CmiMode::Exact).unwrap();
        assert!(est.value > 0.0 && est.value <= 4f64.ln());
        assert_eq!(est.supersamples_used, 8u64.pow(4));
    }
}
