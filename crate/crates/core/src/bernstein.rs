//! Bernstein-condition moments, certificates and the linearized inequality.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::problem::LearningProblem;

/// First moments below this are treated as exactly 0.
const ZERO: f64 = 1e-12;

/// `(E[ℓ(f) − ℓ(f*)], E[(ℓ(f) − ℓ(f*))²])` under the data distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcessMoments {
    pub first: f64,
    pub second: f64,
}

pub fn excess_moments(problem: &LearningProblem, f: usize) -> ExcessMoments {
    let star = problem.optimal();
    let (mut first, mut second) = (0.0, 0.0);
    for (a, m) in problem.distribution().masses().iter().enumerate() {
        let d = problem.atom_loss(f, a) - problem.atom_loss(star, a);
        first += m * d;
        second += m * d * d;
    }
    ExcessMoments { first, second }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernsteinCertificate {
    pub beta: f64,
    #[serde(rename = "B")]
    pub b: f64,
    /// Hypothesis attaining the largest ratio, if any ratio exceeded 1.
    pub witnessed_by: Option<usize>,
    /// A hypothesis with zero first moment but positive second moment (fatal for `β > 0`).
    pub violated_by: Option<usize>,
}

impl BernsteinCertificate {
    pub fn is_valid(&self) -> bool {
        self.violated_by.is_none()
    }
}

/// Smallest `B ≥ 1` with `second(f) ≤ B · first(f)^β` for every `f`.
#[allow(non_snake_case)]
pub fn best_B(problem: &LearningProblem, beta: f64) -> Result<BernsteinCertificate> {
    if !(0.0..=1.0).contains(&beta) {
        return invalid(format!("beta = {beta} must lie in [0, 1]"));
    }
    let mut cert = BernsteinCertificate {
        beta,
        b: 1.0,
        witnessed_by: None,
        violated_by: None,
    };
    for f in 0..problem.class().len() {
        let m = excess_moments(problem, f);
        let scale = if m.first > ZERO {
            m.first.powf(beta)
        } else if beta == 0.0 {
            1.0
        } else {
            if m.second > ZERO && cert.violated_by.is_none() {
                cert.violated_by = Some(f);
            }
            continue;
        };
        let ratio = m.second / scale;
        if ratio > cert.b {
            cert.b = ratio;
            cert.witnessed_by = Some(f);
        }
    }
    Ok(cert)
}

/// `min(½, β)·first + (1−β)(2Bcη)^{1/(1−β)} − cη·second` for hypothesis `f`.
#[allow(non_snake_case)]
pub fn linearized_margin(problem: &LearningProblem, f: usize, c: f64, eta: f64, beta: f64, B: f64) -> Result<f64> {
    if !(c > 0.0 && eta > 0.0) {
        return invalid("c and eta must be positive");
    }
    if !(0.0..=1.0).contains(&beta) || !(B >= 1.0) {
        return invalid("need beta in [0, 1] and B >= 1");
    }
    if eta >= 1.0 / (2.0 * B * c) {
        return invalid(format!("eta = {eta} must be below 1/(2Bc) = {}", 1.0 / (2.0 * B * c)));
    }
    let m = excess_moments(problem, f);
    let tail = if beta < 1.0 {
        (1.0 - beta) * (2.0 * B * c * eta).powf(1.0 / (1.0 - beta))
    } else {
        0.0
    };
    Ok(beta.min(0.5) * m.first + tail - c * eta * m.second)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lemma::c_const;

    fn noise(p: f64) -> LearningProblem {
        LearningProblem::uniform_thresholds(1, 10, 5, p).unwrap()
    }

    #[test]
    fn moments_of_f7() {
        let p = noise(0.1);
        let m = excess_moments(&p, 7);
        assert!((m.first - 0.16).abs() < 1e-12 && (m.second - 0.2).abs() < 1e-12);
        assert_eq!(excess_moments(&p, 5), ExcessMoments { first: 0.0, second: 0.0 });
    }

    #[test]
    fn best_b_values() {
        let cert = best_B(&noise(0.1), 1.0).unwrap();
        assert!((cert.b - 1.25).abs() < 1e-12 && cert.is_valid());
        let cert = best_B(&noise(0.1), 0.0).unwrap();
        assert!(cert.b <= 4.0);
        assert!(best_B(&noise(0.1), 1.5).is_err());
    }

    #[test]
    fn zero_first_positive_second_is_reported() {
        use crate::data::Example;
        use crate::distribution::DiscreteDistribution;
        use crate::hypothesis::{HypothesisClass, Rule};
        use crate::problem::Loss;
        // two constant predictors with equal risk but disjoint errors
        let d = DiscreteDistribution::new(vec![(Example::new(0, 0.0), 0.5), (Example::new(1, 1.0), 0.5)]).unwrap();
        let class = HypothesisClass::new(vec![Rule::Constant(0.0), Rule::Constant(1.0)]).unwrap();
        let p = LearningProblem::new(d, Loss::ZeroOne, class).unwrap();
        let cert = best_B(&p, 0.5).unwrap();
        assert_eq!(cert.violated_by, Some(1));
        assert!(best_B(&p, 0.0).unwrap().is_valid());
    }

    #[test]
    fn linearized_examples() {
        let p = noise(0.1);
        let c = c_const(2.0, 0.25).unwrap();
        let eta_max = 0.25f64.min(1.0 / (2.0 * 1.25 * c));
        assert!(linearized_margin(&p, 7, c, 0.9 * eta_max, 1.0, 1.25).unwrap() >= 0.0);
        assert!(linearized_margin(&p, 5, c, 0.9 * eta_max, 1.0, 1.25).unwrap() >= 0.0);
        let b0 = best_B(&p, 0.0).unwrap().b;
        for f in 0..p.class().len() {
            assert!(linearized_margin(&p, f, c, 0.1, 0.0, b0).unwrap() >= -1e-12);
        }
        assert!(linearized_margin(&p, 7, c, 1.0, 1.0, 1.25).is_err());
    }
}
