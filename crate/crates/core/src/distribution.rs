//! Finitely supported distributions over examples and over hypotheses.

use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::data::{Example, Sample, Supersample};
use crate::error::{invalid, Result};
use crate::seed::{rng_for, Rng};

/// Mass sums within this distance of 1 are accepted as-is.
pub const MASS_TOL: f64 = 1e-12;
/// Sums within this distance of 1 are renormalized; anything further is rejected.
pub const RENORM_TOL: f64 = 1e-9;

pub(crate) fn validate_masses(masses: &mut [f64], what: &str) -> Result<()> {
    if masses.is_empty() {
        return invalid(format!("{what}: no atoms"));
    }
    if let Some(m) = masses.iter().find(|m| !m.is_finite() || **m < 0.0) {
        return invalid(format!("{what}: mass {m} is not a non-negative real"));
    }
    let total: f64 = masses.iter().sum();
    let drift = (total - 1.0).abs();
    if drift > RENORM_TOL {
        return invalid(format!("{what}: masses sum to {total}, not 1"));
    }
    if drift > MASS_TOL {
        masses.iter_mut().for_each(|m| *m /= total);
    }
    Ok(())
}

/// Data distribution with finitely many distinct atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    atoms: Vec<Example>,
    masses: Vec<f64>,
}

impl DiscreteDistribution {
    /// Zero-mass atoms are dropped.
    pub fn new(atoms: Vec<(Example, f64)>) -> Result<Self> {
        let (atoms, mut masses): (Vec<_>, Vec<_>) =
            atoms.into_iter().filter(|(_, m)| *m != 0.0).unzip();
        validate_masses(&mut masses, "data distribution")?;
        for (i, a) in atoms.iter().enumerate() {
            if atoms[..i].iter().any(|b| b.same(a)) {
                return invalid(format!("data distribution: atom {a:?} repeated"));
            }
        }
        Ok(Self { atoms, masses })
    }

    pub fn atoms(&self) -> &[Example] {
        &self.atoms
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn index_of(&self, z: &Example) -> Option<usize> {
        self.atoms.iter().position(|a| a.same(z))
    }

    pub fn sampler(&self) -> AtomSampler {
        AtomSampler {
            index: WeightedIndex::new(&self.masses).expect("validated masses"),
        }
    }

    pub fn draw_sample(&self, n: usize, rng: &mut Rng) -> Result<Sample> {
        let s = self.sampler();
        Sample::new((0..n).map(|_| self.atoms[s.draw(rng)]).collect())
    }
}

/// Draws atom indices of a [`DiscreteDistribution`].
#[derive(Debug, Clone)]
pub struct AtomSampler {
    index: WeightedIndex<f64>,
}

impl AtomSampler {
    pub fn draw(&self, rng: &mut Rng) -> usize {
        self.index.sample(rng)
    }
}

/// `Z̃ ∼ D^{n×2}`, deterministic given `seed`.
pub fn draw_supersample(d: &DiscreteDistribution, n: usize, seed: u64) -> Result<Supersample> {
    if n == 0 {
        return invalid("supersample size n must be >= 1");
    }
    let mut rng = rng_for(seed, &[n as u64]);
    let s = d.sampler();
    let rows = (0..n)
        .map(|_| {
            let a = d.atoms[s.draw(&mut rng)];
            let b = d.atoms[s.draw(&mut rng)];
            [a, b]
        })
        .collect();
    Supersample::new(rows)
}

/// Finitely supported distribution over hypothesis ids, sorted by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    support: Vec<(usize, f64)>,
}

impl Posterior {
    /// Repeated ids are merged and zero weights dropped.
    pub fn new(mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (id, w) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == id => last.1 += w,
                _ => merged.push((id, w)),
            }
        }
        let mut weights: Vec<f64> = merged.iter().map(|e| e.1).collect();
        validate_masses(&mut weights, "posterior")?;
        let support = merged
            .into_iter()
            .zip(weights)
            .filter(|(_, w)| *w > 0.0)
            .map(|((id, _), w)| (id, w))
            .collect();
        Ok(Self { support })
    }

    pub fn point(id: usize) -> Self {
        Self {
            support: vec![(id, 1.0)],
        }
    }

    pub fn uniform(ids: &[usize]) -> Result<Self> {
        if ids.is_empty() {
            return invalid("uniform posterior over an empty set");
        }
        let w = 1.0 / ids.len() as f64;
        Self::new(ids.iter().map(|&id| (id, w)).collect())
    }

    /// `Σ_j ρ_j · P_j`.
    pub fn mixture(components: &[(f64, &Posterior)]) -> Result<Self> {
        let entries = components
            .iter()
            .flat_map(|(rho, p)| p.support.iter().map(move |(id, w)| (*id, rho * w)))
            .collect();
        Self::new(entries)
    }

    pub fn support(&self) -> &[(usize, f64)] {
        &self.support
    }

    pub fn weight(&self, id: usize) -> f64 {
        self.support
            .binary_search_by_key(&id, |e| e.0)
            .map(|i| self.support[i].1)
            .unwrap_or(0.0)
    }

    pub fn is_point_mass(&self) -> Option<usize> {
        match self.support.as_slice() {
            [(id, _)] => Some(*id),
            _ => None,
        }
    }

    /// Largest absolute weight difference over the union of supports.
    pub fn max_abs_diff(&self, other: &Posterior) -> f64 {
        self.support
            .iter()
            .map(|(id, w)| (w - other.weight(*id)).abs())
            .chain(
                other
                    .support
                    .iter()
                    .map(|(id, w)| (w - self.weight(*id)).abs()),
            )
            .fold(0.0, f64::max)
    }
}
