//! Numerical toolkit for fast-rate generalization bounds of randomized and
//! deterministic learners on finite problems.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0)` also rejects NaN

pub mod audit;
pub mod bernstein;
pub mod bounds;
pub mod cmi;
pub mod data;
pub mod distribution;
pub mod error;
pub mod esi;
pub mod experiment;
pub mod hypothesis;
pub mod learners;
pub mod lemma;
pub mod plot;
pub mod priors;
pub mod problem;
pub mod seed;

pub use data::{recombine, select, Example, Sample, Selector, Supersample};
pub use distribution::{draw_supersample, DiscreteDistribution, Posterior};
pub use error::{Error, Result};
pub use hypothesis::{Cut, Hypothesis, HypothesisClass, Rule};
pub use learners::{Algorithm, DeterministicAlgorithm};
pub use problem::{empirical_loss, excess_risks, population_loss, LearningProblem, Loss};
