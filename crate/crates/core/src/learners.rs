//! Learning algorithms: threshold ERM, order-consistent ERM and the Gibbs posterior.

use rand::distributions::{Distribution, WeightedIndex};

use crate::data::{Example, Sample};
use crate::distribution::Posterior;
use crate::error::{invalid, Result};
use crate::hypothesis::HypothesisClass;
use crate::problem::LearningProblem;
use crate::seed::rng_for;

/// A possibly randomized map from samples to distributions over hypothesis ids.
pub trait Algorithm: Sync {
    fn posterior(&self, z: &Sample) -> Posterior;

    /// One draw from the output distribution.
    fn draw(&self, z: &Sample, seed: u64) -> usize {
        let p = self.posterior(z);
        let w: Vec<f64> = p.support().iter().map(|e| e.1).collect();
        let idx = WeightedIndex::new(&w).expect("posterior weights are valid");
        p.support()[idx.sample(&mut rng_for(seed, &[]))].0
    }
}

/// An algorithm whose output is a single hypothesis.
pub trait DeterministicAlgorithm: Sync {
    fn hypothesis(&self, z: &Sample) -> usize;
}

impl<T: DeterministicAlgorithm + ?Sized> DeterministicAlgorithm for &T {
    fn hypothesis(&self, z: &Sample) -> usize {
        (**self).hypothesis(z)
    }
}

impl<T: DeterministicAlgorithm> Algorithm for T {
    fn posterior(&self, z: &Sample) -> Posterior {
        Posterior::point(self.hypothesis(z))
    }
}

/// Smallest empirically optimal threshold over `[0, x_max] ∪ {∞}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThresholdErm {
    pub x_max: i64,
}

impl ThresholdErm {
    pub fn new(x_max: i64) -> Result<Self> {
        if x_max < 0 {
            return invalid("x_max must be >= 0");
        }
        Ok(Self { x_max })
    }

    pub fn for_class(class: &HypothesisClass) -> Result<Self> {
        match class.threshold_max() {
            Some(x_max) => Self::new(x_max),
            None => invalid("threshold ERM needs a threshold class"),
        }
    }

    pub fn infinity_id(&self) -> usize {
        (self.x_max + 1) as usize
    }
}

impl DeterministicAlgorithm for ThresholdErm {
    fn hypothesis(&self, z: &Sample) -> usize {
        let mut pts: Vec<(i64, bool)> = z.iter().map(|e| (e.x, e.y == 1.0)).collect();
        pts.sort_unstable();
        // ones_below[k] = positives among the first k sorted points
        let mut ones_below = Vec::with_capacity(pts.len() + 1);
        ones_below.push(0usize);
        for &(_, y) in &pts {
            ones_below.push(ones_below.last().unwrap() + usize::from(y));
        }
        let total_ones = ones_below[pts.len()];
        let errors = |t: i64| {
            let k = pts.partition_point(|p| p.0 < t);
            let zeros_above = (pts.len() - k) - (total_ones - ones_below[k]);
            ones_below[k] + zeros_above
        };
        let mut candidates: Vec<i64> = std::iter::once(0)
            .chain(pts.iter().map(|p| p.0 + 1).filter(|&t| t >= 1 && t <= self.x_max))
            .collect();
        candidates.dedup();
        let mut best = (total_ones, self.infinity_id());
        for &t in candidates.iter().rev() {
            // reverse scan with `<=` keeps the smallest minimizing threshold
            let e = errors(t);
            if e <= best.0 {
                best = (e, t as usize);
            }
        }
        best.1
    }
}

/// Order-least 0/1-loss minimizer over an arbitrary finite class.
#[derive(Debug, Clone)]
pub struct OrderedErm {
    pub class: HypothesisClass,
}

impl OrderedErm {
    pub fn new(class: HypothesisClass) -> Self {
        Self { class }
    }
}

fn zero_one_errors(class: &HypothesisClass, id: usize, z: &[Example]) -> usize {
    let h = class.get(id);
    z.iter().filter(|e| h.predict(e.x) != e.y).count()
}

impl DeterministicAlgorithm for OrderedErm {
    fn hypothesis(&self, z: &Sample) -> usize {
        let mut best = (usize::MAX, 0);
        for h in self.class.iter() {
            let e = zero_one_errors(&self.class, h.id, z);
            if e < best.0 {
                best = (e, h.id);
            }
        }
        best.1
    }
}

/// Wraps a closure as a deterministic algorithm.
pub struct FnAlgorithm<F>(pub F);

impl<F: Fn(&Sample) -> usize + Sync> DeterministicAlgorithm for FnAlgorithm<F> {
    fn hypothesis(&self, z: &Sample) -> usize {
        (self.0)(z)
    }
}

/// Whether `A|(x_ext, f(x_ext)) = f` for `f = A|z`.
pub fn check_global_consistency<A: DeterministicAlgorithm + ?Sized>(
    alg: &A,
    class: &HypothesisClass,
    z: &Sample,
    x_ext: &[i64],
) -> Result<bool> {
    if let Some(e) = z.iter().find(|e| !x_ext.contains(&e.x)) {
        return invalid(format!("x_ext is missing feature {} of the sample", e.x));
    }
    let f = alg.hypothesis(z);
    let h = class.get(f);
    let relabelled = Sample::new(x_ext.iter().map(|&x| Example::new(x, h.predict(x))).collect())?;
    Ok(alg.hypothesis(&relabelled) == f)
}

/// `Q(f) ∝ W(f) exp(−η̂ n R(f; z))`, computed in the log domain.
pub fn gibbs_posterior(prior: &Posterior, z: &Sample, eta_hat: f64, problem: &LearningProblem) -> Result<Posterior> {
    if !(eta_hat > 0.0 && eta_hat.is_finite()) {
        return invalid(format!("eta_hat = {eta_hat} must be positive and finite"));
    }
    problem.check_sample(z)?;
    let n = z.len() as f64;
    let logs: Vec<(usize, f64)> = prior
        .support()
        .iter()
        .map(|&(h, w)| (h, w.ln() - eta_hat * n * problem.empirical_excess(h, z)))
        .collect();
    let top = logs.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<(usize, f64)> = logs.iter().map(|&(h, l)| (h, (l - top).exp())).collect();
    let total: f64 = raw.iter().map(|e| e.1).sum();
    Posterior::new(raw.into_iter().map(|(h, w)| (h, w / total)).collect())
}

/// The Gibbs algorithm for a fixed prior and rate.
pub struct Gibbs<'a> {
    pub prior: Posterior,
    pub eta_hat: f64,
    pub problem: &'a LearningProblem,
}

impl Algorithm for Gibbs<'_> {
    fn posterior(&self, z: &Sample) -> Posterior {
        gibbs_posterior(&self.prior, z, self.eta_hat, self.problem).expect("Gibbs inputs validated")
    }
}
