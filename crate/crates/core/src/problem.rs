//! Learning problems `(D, ℓ, F)` and the exact risk functionals on them.

use serde::{Deserialize, Serialize};

use crate::data::{Example, Sample};
use crate::distribution::{DiscreteDistribution, Posterior};
use crate::error::{invalid, Result};
use crate::hypothesis::{Cut, HypothesisClass, Rule};

/// Bounded loss `ℓ(f; z) ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Loss {
    ZeroOne,
    /// Explicit table: `values[h][j]` is the loss of hypothesis `h` on `examples[j]`.
    Table {
        examples: Vec<Example>,
        values: Vec<Vec<f64>>,
    },
}

impl Loss {
    fn table_index(examples: &[Example], z: &Example) -> Option<usize> {
        examples.iter().position(|e| e.same(z))
    }
}

/// A learning problem with exact expectations.
#[derive(Debug, Clone)]
pub struct LearningProblem {
    distribution: DiscreteDistribution,
    loss: Loss,
    class: HypothesisClass,
    /// `atom_loss[h][a] = ℓ(h; atom a)`.
    atom_loss: Vec<Vec<f64>>,
    population: Vec<f64>,
    optimal: usize,
}

impl LearningProblem {
    pub fn new(distribution: DiscreteDistribution, loss: Loss, class: HypothesisClass) -> Result<Self> {
        if let Loss::Table { examples, values } = &loss {
            if values.len() != class.len() || values.iter().any(|r| r.len() != examples.len()) {
                return invalid("loss table shape does not match class × examples");
            }
            if values.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
                return invalid("loss table values must lie in [0, 1]");
            }
            if let Some(a) = distribution
                .atoms()
                .iter()
                .find(|a| Loss::table_index(examples, a).is_none())
            {
                return invalid(format!("atom {a:?} is missing from the loss table"));
            }
        }
        if loss == Loss::ZeroOne {
            if let Some(a) = distribution.atoms().iter().find(|a| a.y != 0.0 && a.y != 1.0) {
                return invalid(format!("0/1 loss needs binary labels, found {a:?}"));
            }
        }
        let mut problem = Self {
            distribution,
            loss,
            class,
            atom_loss: Vec::new(),
            population: Vec::new(),
            optimal: 0,
        };
        problem.atom_loss = problem
            .class
            .iter()
            .map(|h| {
                problem
                    .distribution
                    .atoms()
                    .iter()
                    .map(|a| problem.loss(h.id, a))
                    .collect()
            })
            .collect();
        let masses = problem.distribution.masses();
        problem.population = problem
            .atom_loss
            .iter()
            .map(|row| row.iter().zip(masses).map(|(l, m)| l * m).sum())
            .collect();
        let best = problem.population.iter().cloned().fold(f64::INFINITY, f64::min);
        // order-least minimizer; 1e-12 absorbs summation-order noise between identical rows
        problem.optimal = problem
            .population
            .iter()
            .position(|&l| l <= best + 1e-12)
            .expect("class is non-empty");
        Ok(problem)
    }

    /// Threshold class on `[0, x_max]` with `D_X` given by `(x, mass)` and labels
    /// `f_{t*}(x)` flipped with probability `noise_p`.
    pub fn label_noise_thresholds(
        marginal: &[(i64, f64)],
        t_star: i64,
        noise_p: f64,
    ) -> Result<Self> {
        let x_max = marginal.iter().map(|m| m.0).max().unwrap_or(0);
        if marginal.iter().any(|m| m.0 < 0) {
            return invalid("threshold features must be >= 0");
        }
        let class = HypothesisClass::thresholds(x_max)?;
        let target = Rule::Threshold(Cut::At(t_star));
        Self::label_noise(marginal, &target, noise_p, class)
    }

    /// `D_X` uniform on `lo..=hi`.
    pub fn uniform_thresholds(lo: i64, hi: i64, t_star: i64, noise_p: f64) -> Result<Self> {
        if hi < lo {
            return invalid("empty feature range");
        }
        let m = 1.0 / (hi - lo + 1) as f64;
        let marginal: Vec<(i64, f64)> = (lo..=hi).map(|x| (x, m)).collect();
        Self::label_noise_thresholds(&marginal, t_star, noise_p)
    }

    pub fn label_noise(
        marginal: &[(i64, f64)],
        target: &Rule,
        noise_p: f64,
        class: HypothesisClass,
    ) -> Result<Self> {
        if !(0.0..0.5).contains(&noise_p) {
            return invalid(format!("label noise p = {noise_p} must lie in [0, 1/2)"));
        }
        let mut atoms = Vec::with_capacity(2 * marginal.len());
        for &(x, m) in marginal {
            let c = target.predict(x);
            atoms.push((Example::new(x, c), m * (1.0 - noise_p)));
            atoms.push((Example::new(x, 1.0 - c), m * noise_p));
        }
        Self::new(DiscreteDistribution::new(atoms)?, Loss::ZeroOne, class)
    }

    pub fn distribution(&self) -> &DiscreteDistribution {
        &self.distribution
    }

    pub fn class(&self) -> &HypothesisClass {
        &self.class
    }

    pub fn loss_kind(&self) -> &Loss {
        &self.loss
    }

    /// The order-least population-loss minimizer `f*`.
    pub fn optimal(&self) -> usize {
        self.optimal
    }

    /// `ℓ(h; z)`.
    ///
    /// Panics for examples outside a loss table; [`Self::check_sample`] rules that out.
    pub fn loss(&self, h: usize, z: &Example) -> f64 {
        match &self.loss {
            Loss::ZeroOne => {
                if self.class.get(h).predict(z.x) == z.y {
                    0.0
                } else {
                    1.0
                }
            }
            Loss::Table { examples, values } => {
                let j = Loss::table_index(examples, z)
                    .unwrap_or_else(|| panic!("example {z:?} outside the loss table"));
                values[h][j]
            }
        }
    }

    pub fn atom_loss(&self, h: usize, atom: usize) -> f64 {
        self.atom_loss[h][atom]
    }

    pub fn check_sample(&self, z: &Sample) -> Result<()> {
        match &self.loss {
            Loss::ZeroOne => {
                if let Some(e) = z.iter().find(|e| e.y != 0.0 && e.y != 1.0) {
                    return invalid(format!("0/1 loss needs binary labels, found {e:?}"));
                }
            }
            Loss::Table { examples, .. } => {
                if let Some(e) = z.iter().find(|e| Loss::table_index(examples, e).is_none()) {
                    return invalid(format!("example {e:?} outside the loss table"));
                }
            }
        }
        Ok(())
    }

    /// `ℓ(h; z) = (1/n) Σ ℓ(h; z_i)`.
    pub fn hypothesis_empirical_loss(&self, h: usize, z: &[Example]) -> f64 {
        z.iter().map(|e| self.loss(h, e)).sum::<f64>() / z.len() as f64
    }

    /// `ℓ(h; D)`.
    pub fn hypothesis_population_loss(&self, h: usize) -> f64 {
        self.population[h]
    }

    /// Empirical excess risk `R(h; z) = ℓ(h; z) − ℓ(f*; z)`.
    pub fn empirical_excess(&self, h: usize, z: &[Example]) -> f64 {
        z.iter()
            .map(|e| self.loss(h, e) - self.loss(self.optimal, e))
            .sum::<f64>()
            / z.len() as f64
    }
}

/// `L(F; z) = E_{f∼F}[ℓ(f; z)]`.
pub fn empirical_loss(posterior: &Posterior, z: &Sample, problem: &LearningProblem) -> Result<f64> {
    problem.check_sample(z)?;
    Ok(posterior
        .support()
        .iter()
        .map(|(h, w)| w * problem.hypothesis_empirical_loss(*h, z))
        .sum())
}

/// `L(F; D)`, exact.
pub fn population_loss(posterior: &Posterior, problem: &LearningProblem) -> f64 {
    posterior
        .support()
        .iter()
        .map(|(h, w)| w * problem.hypothesis_population_loss(*h))
        .sum()
}

/// `(R(F; D), R(F; z))`.
pub fn excess_risks(posterior: &Posterior, problem: &LearningProblem, z: &Sample) -> Result<(f64, f64)> {
    let star = Posterior::point(problem.optimal());
    let pop = population_loss(posterior, problem) - population_loss(&star, problem);
    let emp = empirical_loss(posterior, z, problem)? - empirical_loss(&star, z, problem)?;
    Ok((pop, emp))
}

/// Hypothesis-class part of a [`ProblemSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClassSpec {
    /// The string `"thresholds"`.
    Named(String),
    /// One 0/1 label per domain point, per hypothesis.
    Tables(Vec<Vec<u8>>),
}

/// JSON problem document:
/// `{"domain": [..], "dist": [..], "noise_p": p, "class": "thresholds" | [[..], ..], "loss": "zero-one"}`.
///
/// The noise-free target is `t_star` for thresholds and the table index `target` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub domain: Vec<i64>,
    pub dist: Vec<f64>,
    pub noise_p: f64,
    pub class: ClassSpec,
    #[serde(default = "default_loss")]
    pub loss: String,
    #[serde(default)]
    pub t_star: Option<i64>,
    #[serde(default)]
    pub target: Option<usize>,
}

fn default_loss() -> String {
    "zero-one".to_string()
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build(&self) -> Result<LearningProblem> {
        if self.loss != "zero-one" {
            return invalid(format!("unsupported loss {:?}; only \"zero-one\"", self.loss));
        }
        if self.domain.len() != self.dist.len() {
            return invalid("domain and dist have different lengths");
        }
        let marginal: Vec<(i64, f64)> = self.domain.iter().copied().zip(self.dist.iter().copied()).collect();
        match &self.class {
            ClassSpec::Named(name) if name == "thresholds" => {
                let Some(t_star) = self.t_star else {
                    return invalid("threshold problems need \"t_star\"");
                };
                LearningProblem::label_noise_thresholds(&marginal, t_star, self.noise_p)
            }
            ClassSpec::Named(other) => invalid(format!("unknown class {other:?}")),
            ClassSpec::Tables(tables) => {
                let tables: Vec<Vec<f64>> = tables
                    .iter()
                    .map(|t| t.iter().map(|&b| f64::from(b)).collect())
                    .collect();
                if tables.iter().flatten().any(|&b| b != 0.0 && b != 1.0) {
                    return invalid("truth tables must contain 0/1 labels");
                }
                let class = HypothesisClass::from_tables(&self.domain, &tables)?;
                let target = self.target.unwrap_or(0);
                if target >= class.len() {
                    return invalid("target index outside the class");
                }
                let rule = class.get(target).rule.clone();
                LearningProblem::label_noise(&marginal, &rule, self.noise_p, class)
            }
        }
    }
}
