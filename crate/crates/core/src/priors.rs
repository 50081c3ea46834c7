//! Priors conditioned on a supersample, KL divergences and the ghost-sample KL functional.

use std::collections::{BTreeMap, HashSet};

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Example, Sample, Selector, Supersample};
use crate::distribution::{DiscreteDistribution, Posterior};
use crate::error::{invalid, resource, Result};
use crate::hypothesis::HypothesisClass;
use crate::learners::{Algorithm, DeterministicAlgorithm};
use crate::seed::rng_for;

/// Largest `n` for which the `2ⁿ` selectors are enumerated.
pub const SELECTOR_CAP: usize = 16;
/// Largest number of `k`-subsets enumerated by [`CompressionPrior`].
pub const SUBSET_CAP: u64 = 10_000_000;
/// Largest number of ghost samples enumerated exactly.
pub const GHOST_CAP: u64 = 1_000_000;

/// KL divergence in nats, possibly infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KlValue {
    Finite(f64),
    Infinite,
}

impl KlValue {
    pub fn nats(self) -> f64 {
        match self {
            KlValue::Finite(v) => v,
            KlValue::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, KlValue::Finite(_))
    }
}

/// `KL(P ‖ Q) = Σ P(f) ln(P(f)/Q(f))`.
pub fn kl(p: &Posterior, q: &Posterior) -> KlValue {
    let mut total = 0.0;
    for &(id, w) in p.support() {
        let qw = q.weight(id);
        if qw == 0.0 {
            return KlValue::Infinite;
        }
        total += w * (w / qw).ln();
    }
    KlValue::Finite(total.max(0.0))
}

/// A map from supersamples to priors.
pub trait ConditionalPrior: Sync {
    fn prior(&self, ss: &Supersample) -> Result<Posterior>;
}

impl<P: ConditionalPrior + ?Sized> ConditionalPrior for &P {
    fn prior(&self, ss: &Supersample) -> Result<Posterior> {
        (**self).prior(ss)
    }
}

impl<P: ConditionalPrior + ?Sized> ConditionalPrior for Box<P> {
    fn prior(&self, ss: &Supersample) -> Result<Posterior> {
        (**self).prior(ss)
    }
}

/// Ignores the supersample.
#[derive(Debug, Clone)]
pub struct FixedPrior(pub Posterior);

impl ConditionalPrior for FixedPrior {
    fn prior(&self, _: &Supersample) -> Result<Posterior> {
        Ok(self.0.clone())
    }
}

fn all_selectors(n: usize) -> Result<impl Iterator<Item = Selector>> {
    if n > SELECTOR_CAP {
        return resource(format!(
            "2^{n} selectors exceed the enumeration cap 2^{SELECTOR_CAP}; use the Sauer bound d·ln(2n) instead"
        ));
    }
    Ok((0..1u64 << n).map(move |i| Selector::from_index(i, n)))
}

/// Distinct outputs `H(z̃) = {A|z̃_s : s ∈ {0,1}ⁿ}` in id order.
pub fn enumerate_outputs<A: DeterministicAlgorithm + ?Sized>(alg: &A, ss: &Supersample) -> Result<Vec<usize>> {
    let mut ids: Vec<usize> = all_selectors(ss.n())?
        .map(|s| ss.selected(&s).map(|z| alg.hypothesis(&z)))
        .collect::<Result<HashSet<_>>>()?
        .into_iter()
        .collect();
    ids.sort_unstable();
    Ok(ids)
}

/// Number of distinct labellings of the supersample's `2n` features among `ids`.
pub fn distinct_labellings(class: &HypothesisClass, ss: &Supersample, ids: &[usize]) -> usize {
    let xs: Vec<i64> = ss.entries().map(|e| e.x).collect();
    ids.iter()
        .map(|&id| class.labelling(id, &xs).iter().map(|v| v.to_bits()).collect::<Vec<_>>())
        .collect::<HashSet<_>>()
        .len()
}

/// Uniform prior over the outputs of a deterministic algorithm on all selections.
pub struct EnumerationPrior<A> {
    pub alg: A,
}

impl<A: DeterministicAlgorithm> ConditionalPrior for EnumerationPrior<A> {
    fn prior(&self, ss: &Supersample) -> Result<Posterior> {
        Posterior::uniform(&enumerate_outputs(&self.alg, ss)?)
    }
}

/// Compressor picking `k` distinct positions of the training sample.
pub trait Compressor: Sync {
    fn compress(&self, z: &Sample) -> Vec<usize>;
}

impl<F: Fn(&Sample) -> Vec<usize> + Sync> Compressor for F {
    fn compress(&self, z: &Sample) -> Vec<usize> {
        self(z)
    }
}

/// Map from `k` examples (in canonical order) to a distribution over hypotheses.
pub trait Reconstructor: Sync {
    fn reconstruct(&self, kept: &[Example]) -> Result<Posterior>;
}

impl<F: Fn(&[Example]) -> Result<Posterior> + Sync> Reconstructor for F {
    fn reconstruct(&self, kept: &[Example]) -> Result<Posterior> {
        self(kept)
    }
}

fn canonical(mut kept: Vec<Example>) -> Vec<Example> {
    kept.sort_by(|a, b| a.canonical_cmp(b));
    kept
}

/// `W|z = W₂(κ(z))` for a size-`k` compression scheme `(κ, W₂)`.
pub struct CompressionScheme<C, R> {
    pub k: usize,
    pub compressor: C,
    pub reconstructor: R,
}

impl<C: Compressor, R: Reconstructor> CompressionScheme<C, R> {
    /// The examples kept from `z`, in canonical order.
    pub fn kept(&self, z: &Sample) -> Result<Vec<Example>> {
        let mut idx = self.compressor.compress(z);
        if idx.len() != self.k {
            return invalid(format!("compressor returned {} indices, expected {}", idx.len(), self.k));
        }
        idx.sort_unstable();
        if idx.windows(2).any(|w| w[0] == w[1]) || idx.last().is_some_and(|&i| i >= z.len()) {
            return invalid("compressor indices must be distinct positions of the sample");
        }
        Ok(canonical(idx.iter().map(|&i| z[i]).collect()))
    }

    pub fn output(&self, z: &Sample) -> Result<Posterior> {
        self.reconstructor.reconstruct(&self.kept(z)?)
    }
}

/// `π(f | z̃) = Σ_{k-subsets K of the 2n entries} W₂(K)(f) / C(2n, k)`.
pub struct CompressionPrior<R> {
    pub k: usize,
    pub reconstructor: R,
}

pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl<R: Reconstructor> ConditionalPrior for CompressionPrior<R> {
    fn prior(&self, ss: &Supersample) -> Result<Posterior> {
        let entries: Vec<Example> = ss.entries().copied().collect();
        let m = entries.len();
        if self.k > m {
            return invalid(format!("k = {} exceeds the 2n = {m} supersample entries", self.k));
        }
        let count = binomial(m as u64, self.k as u64);
        if count > SUBSET_CAP as f64 {
            return resource(format!("{count} subsets exceed the cap {SUBSET_CAP}; use k·ln(2n) instead"));
        }
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for subset in (0..m).combinations(self.k) {
            let kept = canonical(subset.iter().map(|&i| entries[i]).collect());
            for &(id, w) in self.reconstructor.reconstruct(&kept)?.support() {
                *acc.entry(id).or_insert(0.0) += w / count;
            }
        }
        Posterior::new(acc.into_iter().collect())
    }
}

/// `Σⱼ ρⱼ πⱼ`.
pub struct MixturePrior<'a> {
    components: Vec<(f64, &'a dyn ConditionalPrior)>,
}

impl<'a> MixturePrior<'a> {
    pub fn new(components: Vec<(f64, &'a dyn ConditionalPrior)>) -> Result<Self> {
        if components.is_empty() {
            return invalid("mixture needs at least one component");
        }
        let mut weights: Vec<f64> = components.iter().map(|c| c.0).collect();
        crate::distribution::validate_masses(&mut weights, "mixture weights")?;
        let components = components.into_iter().zip(weights).map(|((_, p), w)| (w, p)).collect();
        Ok(Self { components })
    }
}

impl ConditionalPrior for MixturePrior<'_> {
    fn prior(&self, ss: &Supersample) -> Result<Posterior> {
        let parts: Vec<(f64, Posterior)> = self
            .components
            .iter()
            .map(|(w, p)| p.prior(ss).map(|q| (*w, q)))
            .collect::<Result<_>>()?;
        let refs: Vec<(f64, &Posterior)> = parts.iter().map(|(w, q)| (*w, q)).collect();
        Posterior::mixture(&refs)
    }
}

/// `E_{S′}[A|z̃_{S′}]`, the prior attaining the conditional mutual information.
pub struct SelectionAverage<A> {
    pub alg: A,
}

impl<A: Algorithm> ConditionalPrior for SelectionAverage<A> {
    fn prior(&self, ss: &Supersample) -> Result<Posterior> {
        selection_average(&self.alg, ss)
    }
}

pub fn selection_average<A: Algorithm + ?Sized>(alg: &A, ss: &Supersample) -> Result<Posterior> {
    let n = ss.n();
    let w = 1.0 / (1u64 << n.min(SELECTOR_CAP)) as f64;
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    for s in all_selectors(n)? {
        for &(id, p) in alg.posterior(&ss.selected(&s)?).support() {
            *acc.entry(id).or_insert(0.0) += w * p;
        }
    }
    Posterior::new(acc.into_iter().collect())
}

/// Largest difference between `prior(z̃)` and `prior(swap(z̃, s))` over the given selectors.
pub fn exchangeability_gap<P: ConditionalPrior + ?Sized>(prior: &P, ss: &Supersample, selectors: &[Selector]) -> Result<f64> {
    let base = prior.prior(ss)?;
    let mut gap: f64 = 0.0;
    for s in selectors {
        gap = gap.max(base.max_abs_diff(&prior.prior(&ss.swap(s)?)?));
    }
    Ok(gap)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GhostMode {
    Exact,
    MonteCarlo { ghosts: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GhostKl {
    /// `E_{Z₁}[KL(A|z₀ ‖ π|⟨z₀, Z₁⟩)]` in nats; infinite if any ghost gives an infinite KL.
    pub value: f64,
    pub std_error: f64,
    pub ghosts_used: u64,
    pub exact: bool,
    /// A ghost sample with infinite KL, if one was met.
    pub infinite_at: Option<Sample>,
}

fn ghost_from_index(d: &DiscreteDistribution, n: usize, mut idx: u64) -> (Sample, f64) {
    let a = d.len() as u64;
    let mut pts = Vec::with_capacity(n);
    let mut mass = 1.0;
    for _ in 0..n {
        let j = (idx % a) as usize;
        idx /= a;
        pts.push(d.atoms()[j]);
        mass *= d.masses()[j];
    }
    (Sample::new(pts).expect("n >= 1"), mass)
}

/// Expected KL over ghost samples `Z₁ ∼ Dⁿ` between `A|z₀` and `π|⟨z₀, Z₁⟩`.
pub fn expected_kl_ghost<A, P>(alg: &A, prior: &P, z0: &Sample, d: &DiscreteDistribution, mode: GhostMode) -> Result<GhostKl>
where
    A: Algorithm + ?Sized,
    P: ConditionalPrior + ?Sized,
{
    let n = z0.len();
    let post = alg.posterior(z0);
    let eval = |z1: &Sample| -> Result<KlValue> {
        let ss = Supersample::from_columns(z0, z1)?;
        Ok(kl(&post, &prior.prior(&ss)?))
    };
    match mode {
        GhostMode::Exact => {
            let total = (d.len() as u64).checked_pow(n as u32).filter(|&t| t <= GHOST_CAP);
            let Some(total) = total else {
                return resource(format!("{}^{n} ghost samples exceed the cap {GHOST_CAP}", d.len()));
            };
            let terms: Vec<(f64, KlValue, u64)> = (0..total)
                .into_par_iter()
                .map(|i| {
                    let (z1, mass) = ghost_from_index(d, n, i);
                    eval(&z1).map(|k| (mass, k, i))
                })
                .collect::<Result<_>>()?;
            let mut value = 0.0;
            for (mass, k, i) in terms {
                match k {
                    KlValue::Finite(v) => value += mass * v,
                    KlValue::Infinite => {
                        return Ok(GhostKl {
                            value: f64::INFINITY,
                            std_error: 0.0,
                            ghosts_used: total,
                            exact: true,
                            infinite_at: Some(ghost_from_index(d, n, i).0),
                        })
                    }
                }
            }
            Ok(GhostKl {
                value,
                std_error: 0.0,
                ghosts_used: total,
                exact: true,
                infinite_at: None,
            })
        }
        GhostMode::MonteCarlo { ghosts, seed } => {
            if ghosts < 2 {
                return invalid("Monte-Carlo ghost estimation needs at least 2 ghosts");
            }
            let terms: Vec<(KlValue, Sample)> = (0..ghosts as u64)
                .into_par_iter()
                .map(|g| {
                    let z1 = d.draw_sample(n, &mut rng_for(seed, &[g]))?;
                    eval(&z1).map(|k| (k, z1))
                })
                .collect::<Result<_>>()?;
            if let Some((_, z1)) = terms.iter().find(|t| !t.0.is_finite()) {
                return Ok(GhostKl {
                    value: f64::INFINITY,
                    std_error: 0.0,
                    ghosts_used: ghosts as u64,
                    exact: false,
                    infinite_at: Some(z1.clone()),
                });
            }
            let vals: Vec<f64> = terms.iter().map(|t| t.0.nats()).collect();
            let (mean, se) = mean_and_se(&vals);
            Ok(GhostKl {
                value: mean,
                std_error: se,
                ghosts_used: ghosts as u64,
                exact: false,
                infinite_at: None,
            })
        }
    }
}

pub(crate) fn mean_and_se(vals: &[f64]) -> (f64, f64) {
    let m = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / m;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    (mean, (var / m).sqrt())
}

/// Bounds on the number of labellings of `m` points by a class of VC dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SauerBound {
    /// `Σ_{k=0}^{d} C(m, k)`.
    pub sum: f64,
    /// `e · m^d`.
    pub cap: f64,
}

pub fn sauer_bound(d: u64, m: u64) -> Result<SauerBound> {
    if m == 0 {
        return invalid("sauer_bound needs m >= 1");
    }
    let sum = (0..=d.min(m)).map(|k| binomial(m, k)).sum();
    Ok(SauerBound {
        sum,
        cap: std::f64::consts::E * (m as f64).powf(d as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{FnAlgorithm, ThresholdErm};

    type Row = ((i64, f64), (i64, f64));

    fn ss(rows: &[Row]) -> Supersample {
        Supersample::new(
            rows.iter()
                .map(|&(a, b)| [Example::new(a.0, a.1), Example::new(b.0, b.1)])
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn kl_examples() {
        let q = Posterior::uniform(&[0, 1, 2, 3, 4]).unwrap();
        assert_eq!(kl(&q, &q), KlValue::Finite(0.0));
        assert!((kl(&Posterior::point(2), &q).nats() - 5f64.ln()).abs() < 1e-15);
        assert_eq!(kl(&Posterior::point(9), &q), KlValue::Infinite);
    }

    #[test]
    fn enumeration_prior_examples() {
        let constant = EnumerationPrior { alg: FnAlgorithm(|_: &Sample| 3) };
        let z = ss(&[((1, 0.0), (2, 1.0)), ((3, 1.0), (4, 0.0))]);
        assert_eq!(constant.prior(&z).unwrap(), Posterior::point(3));
        let row = EnumerationPrior { alg: FnAlgorithm(|z: &Sample| z[0].x as usize) };
        let one = ss(&[((1, 0.0), (2, 1.0))]);
        let p = row.prior(&one).unwrap();
        assert!((kl(&Posterior::point(1), &p).nats() - 2f64.ln()).abs() < 1e-15);
        let erm = EnumerationPrior { alg: ThresholdErm::new(8).unwrap() };
        let h = enumerate_outputs(&erm.alg, &z).unwrap();
        assert!(h.len() <= 4);
    }

    #[test]
    fn enumeration_cap() {
        let rows = vec![[Example::new(0, 0.0), Example::new(1, 1.0)]; 17];
        let big = Supersample::new(rows).unwrap();
        let erm = EnumerationPrior { alg: ThresholdErm::new(2).unwrap() };
        assert!(matches!(erm.prior(&big), Err(crate::Error::ResourceLimit(_))));
    }

    #[test]
    fn compression_size_zero_is_fixed() {
        let w = Posterior::uniform(&[0, 1]).unwrap();
        let fixed = w.clone();
        let prior = CompressionPrior {
            k: 0,
            reconstructor: move |_: &[Example]| -> Result<Posterior> { Ok(fixed.clone()) },
        };
        let z = ss(&[((1, 0.0), (2, 1.0)), ((3, 1.0), (4, 0.0))]);
        assert_eq!(prior.prior(&z).unwrap(), w);
    }

    #[test]
    fn compression_bound_k1() {
        // W₂ maps the kept point x to the threshold x + 1
        let recon = |kept: &[Example]| -> Result<Posterior> { Ok(Posterior::point(kept[0].x as usize + 1)) };
        let scheme = CompressionScheme {
            k: 1,
            compressor: |_: &Sample| vec![0],
            reconstructor: recon,
        };
        let prior = CompressionPrior { k: 1, reconstructor: recon };
        let z = ss(&[((1, 0.0), (2, 1.0)), ((3, 1.0), (4, 0.0))]);
        let z0 = z.column(0);
        let out = scheme.output(&z0).unwrap();
        let bound = kl(&out, &out).nats() + 4f64.ln();
        assert!(kl(&out, &prior.prior(&z).unwrap()).nats() <= bound + 1e-12);
        let escaped = Posterior::point(50);
        assert_eq!(kl(&escaped, &prior.prior(&z).unwrap()), KlValue::Infinite);
    }

    #[test]
    fn sauer_examples() {
        assert_eq!(sauer_bound(5, 3).unwrap().sum, 8.0);
        let s = sauer_bound(1, 10).unwrap();
        assert_eq!(s.sum, 11.0);
        assert!(s.sum <= s.cap);
        assert_eq!(sauer_bound(0, 7).unwrap().sum, 1.0);
        assert!(sauer_bound(1, 0).is_err());
    }

    #[test]
    fn mixture_weights_validated() {
        let a = FixedPrior(Posterior::point(0));
        assert!(MixturePrior::new(vec![(0.5, &a as &dyn ConditionalPrior)]).is_err());
        let m = MixturePrior::new(vec![(1.0, &a as &dyn ConditionalPrior)]).unwrap();
        let z = ss(&[((1, 0.0), (2, 1.0))]);
        assert_eq!(m.prior(&z).unwrap(), Posterior::point(0));
    }
}
