//! Label-noise threshold experiments: bound rates for ERM and the Gibbs pipeline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bernstein::best_B;
use crate::bounds::{baseline_mi, baseline_pb, eta_cap, inprob_bound, llog, main_bound, starstar, BoundConstants, BoundInputs};
use crate::data::{Example, Sample, Supersample};
use crate::distribution::Posterior;
use crate::error::{invalid, Result};
use crate::learners::{gibbs_posterior, DeterministicAlgorithm, ThresholdErm};
use crate::priors::{enumerate_outputs, kl};
use crate::problem::{population_loss, LearningProblem};
use crate::seed::derive_seed;
use crate::seed::rng_for;

/// How the Bernstein pair `(β, B)` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BernsteinSource {
    /// `β = 1` with `B` from [`best_B`].
    Certified,
    User { beta: f64, b: f64 },
}

/// How the expected-KL input of the bound is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KlSource {
    /// `ln(2n)`, the VC-dimension-one cap.
    SauerCap,
    /// `ln |H(⟨Z₀, Z₁⟩)|` for one ghost sample per trial, enumerated exactly (`n ≤ 16`).
    Enumeration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Feature range `lo..=hi`, uniform.
    pub x_lo: i64,
    pub x_hi: i64,
    pub t_star: i64,
    pub noise_p: f64,
    pub ns: Vec<u64>,
    pub trials: usize,
    pub delta: f64,
    pub bernstein: BernsteinSource,
    pub kl: KlSource,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            x_lo: 1,
            x_hi: 10,
            t_star: 5,
            noise_p: 0.1,
            ns: (4..=14).map(|k| 1u64 << k).collect(),
            trials: 200,
            delta: 0.05,
            bernstein: BernsteinSource::Certified,
            kl: KlSource::SauerCap,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_p > 0.0 && self.noise_p < 0.5) {
            return invalid(format!("noise p = {} must lie in (0, 1/2)", self.noise_p));
        }
        if self.trials == 0 || self.ns.is_empty() || self.ns.contains(&0) {
            return invalid("need trials >= 1 and a non-empty schedule of n >= 1");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return invalid("delta must lie in (0, 1)");
        }
        if self.x_lo < 0 || self.x_hi < self.x_lo {
            return invalid("feature range must satisfy 0 <= lo <= hi");
        }
        if self.kl == KlSource::Enumeration && self.ns.iter().any(|&n| n > 16) {
            return invalid("exact enumeration of the KL needs n <= 16; use the Sauer cap");
        }
        if let BernsteinSource::User { beta, b } = self.bernstein {
            if !(0.0..=1.0).contains(&beta) || !(b >= 1.0) {
                return invalid("user Bernstein pair needs beta in [0, 1], B >= 1");
            }
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<LearningProblem> {
        LearningProblem::uniform_thresholds(self.x_lo, self.x_hi, self.t_star, self.noise_p)
    }

    fn bernstein_pair(&self, problem: &LearningProblem) -> Result<(f64, f64)> {
        match self.bernstein {
            BernsteinSource::Certified => Ok((1.0, best_B(problem, 1.0)?.b)),
            BernsteinSource::User { beta, b } => Ok((beta, b)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: u64,
    pub trial: usize,
    pub gap: f64,
    pub emp_excess: f64,
    pub fast_complexity: f64,
    pub main_bound_total: f64,
    pub inprob_total: f64,
    pub baseline_pb: f64,
    pub baseline_mi_proxy: f64,
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSummaryRow {
    pub n: u64,
    pub coverage: f64,
    pub mean_gap: f64,
    pub mean_abs_gap: f64,
    pub fast_complexity: f64,
    pub mean_inprob_total: f64,
    pub mean_baseline_pb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub beta: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub eta_max: f64,
    pub per_n: Vec<RateSummaryRow>,
    pub slope_fast_complexity: f64,
    pub slope_baseline_pb: f64,
    pub slope_abs_gap: f64,
    /// Smallest power of two at which the fast complexity term drops below the
    /// baseline, extrapolated with the empirical loss fixed at `p`.
    pub crossover_n: Option<u64>,
}

/// Least-squares slope of `ln y` against `ln x` over the upper half of the points.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let top: Vec<(f64, f64)> = points[points.len() / 2..]
        .iter()
        .filter(|p| p.0 > 0.0 && p.1 > 0.0)
        .map(|p| (p.0.ln(), p.1.ln()))
        .collect();
    if top.len() < 2 {
        return None;
    }
    let m = top.len() as f64;
    let mx = top.iter().map(|p| p.0).sum::<f64>() / m;
    let my = top.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = top.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = top.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

fn kl_bar(cfg: &ExperimentConfig, erm: &ThresholdErm, problem: &LearningProblem, z0: &Sample, n: u64, trial: usize) -> Result<f64> {
    match cfg.kl {
        KlSource::SauerCap => Ok((2.0 * n as f64).ln()),
        KlSource::Enumeration => {
            let mut rng = rng_for(cfg.seed, &[n, trial as u64, 1]);
            let z1 = problem.distribution().draw_sample(n as usize, &mut rng)?;
            let ss = Supersample::from_columns(z0, &z1)?;
            Ok((enumerate_outputs(erm, &ss)?.len() as f64).ln())
        }
    }
}

/// ERM on label-noise thresholds across the `n` schedule.
pub fn run_rate_experiment(cfg: &ExperimentConfig) -> Result<(Vec<RateRow>, RateSummary)> {
    cfg.validate()?;
    let problem = cfg.problem()?;
    let erm = ThresholdErm::for_class(problem.class())?;
    let (beta, b) = cfg.bernstein_pair(&problem)?;
    let consts = BoundConstants::new(b)?;
    let jobs: Vec<(u64, usize)> = cfg.ns.iter().flat_map(|&n| (0..cfg.trials).map(move |t| (n, t))).collect();
    let rows: Vec<RateRow> = jobs
        .into_par_iter()
        .map(|(n, trial)| {
            let mut rng = rng_for(cfg.seed, &[n, trial as u64]);
            let z0 = problem.distribution().draw_sample(n as usize, &mut rng)?;
            let f = erm.hypothesis(&z0);
            let emp = problem.hypothesis_empirical_loss(f, &z0);
            let gap = problem.hypothesis_population_loss(f) - emp;
            let emp_excess = problem.empirical_excess(f, &z0);
            let kl = kl_bar(cfg, &erm, &problem, &z0, n, trial)?;
            let inputs = BoundInputs {
                n,
                beta,
                b,
                kl_bar: kl,
                emp_excess,
                eta: Some(eta_cap(n, consts.eta_max)),
                delta: Some(cfg.delta),
            };
            let main = main_bound(&inputs)?;
            let inprob = inprob_bound(&inputs)?;
            Ok(RateRow {
                n,
                trial,
                gap,
                emp_excess,
                fast_complexity: main.complexity_term,
                main_bound_total: main.total,
                inprob_total: inprob.total,
                baseline_pb: baseline_pb(kl, n, cfg.delta, emp)?,
                baseline_mi_proxy: baseline_mi((2.0 * n as f64).ln(), n)?,
                covered: gap <= inprob.total,
            })
        })
        .collect::<Result<_>>()?;

    let per_n: Vec<RateSummaryRow> = cfg
        .ns
        .iter()
        .map(|&n| {
            let rs: Vec<&RateRow> = rows.iter().filter(|r| r.n == n).collect();
            let m = rs.len() as f64;
            let mean = |g: &dyn Fn(&RateRow) -> f64| rs.iter().map(|r| g(r)).sum::<f64>() / m;
            RateSummaryRow {
                n,
                coverage: rs.iter().filter(|r| r.covered).count() as f64 / m,
                mean_gap: mean(&|r| r.gap),
                mean_abs_gap: mean(&|r| r.gap.abs()),
                fast_complexity: mean(&|r| r.fast_complexity),
                mean_inprob_total: mean(&|r| r.inprob_total),
                mean_baseline_pb: mean(&|r| r.baseline_pb),
            }
        })
        .collect();
    let slope = |g: &dyn Fn(&RateSummaryRow) -> f64| {
        loglog_slope(&per_n.iter().map(|r| (r.n as f64, g(r))).collect::<Vec<_>>()).unwrap_or(f64::NAN)
    };
    let crossover_n = (1..=62u32).map(|k| 1u64 << k).find(|&n| {
        let kl = (2.0 * n as f64).ln();
        let fast = 8.0 * starstar((kl + llog(n).unwrap()) / (n as f64 * consts.eta_max), 1.0 / (2.0 - beta)).unwrap();
        fast < baseline_pb(kl, n, cfg.delta, cfg.noise_p).unwrap()
    });
    Ok((
        rows,
        RateSummary {
            beta,
            b,
            eta_max: consts.eta_max,
            slope_fast_complexity: slope(&|r| r.fast_complexity),
            slope_baseline_pb: slope(&|r| r.mean_baseline_pb),
            slope_abs_gap: slope(&|r| r.mean_abs_gap),
            per_n,
            crossover_n,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub base: ExperimentConfig,
    /// Compression size, 0 or 1.
    pub k: usize,
    pub eta_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsRow {
    pub n: u64,
    pub trial: usize,
    pub gibbs_population_loss: f64,
    pub gibbs_empirical_loss: f64,
    pub erm_empirical_loss: f64,
    pub kl_erm_prior: f64,
    pub complexity_ub: f64,
    pub bound_rhs: f64,
    pub covered: bool,
}

/// Size-`k` compression prior `W|z` for thresholds.
///
/// `k = 0`: uniform over the class. `k = 1`: keeps the largest sample feature `x`
/// below the ERM threshold (the first point if there is none) and puts half its
/// mass on `f_{x+1}`, half uniform.
pub fn threshold_compression_prior(problem: &LearningProblem, erm: &ThresholdErm, z: &Sample, k: usize) -> Result<Posterior> {
    let ids: Vec<usize> = (0..problem.class().len()).collect();
    let uniform = Posterior::uniform(&ids)?;
    match k {
        0 => Ok(uniform),
        1 => {
            let t = erm.hypothesis(z) as i64;
            let kept: Example = z
                .iter()
                .filter(|e| e.x < t)
                .max_by(|a, b| a.canonical_cmp(b))
                .copied()
                .unwrap_or(z[0]);
            threshold_reconstruct(problem, &[kept])
        }
        _ => invalid("the threshold compression prior supports k in {0, 1}"),
    }
}

/// `W₂({(x, y)}) = ½ δ_{f_{x+1}} + ½ Uniform(F)`.
pub fn threshold_reconstruct(problem: &LearningProblem, kept: &[Example]) -> Result<Posterior> {
    let class = problem.class();
    let ids: Vec<usize> = (0..class.len()).collect();
    let uniform = Posterior::uniform(&ids)?;
    let [e] = kept else {
        return invalid("threshold reconstruction keeps exactly one example");
    };
    let id = class
        .threshold_id(crate::hypothesis::Cut::At(e.x + 1))
        .ok_or_else(|| crate::Error::InvalidInput("needs a threshold class".into()))?;
    Posterior::mixture(&[(0.5, &Posterior::point(id)), (0.5, &uniform)])
}

/// Gibbs posterior relative to the compression prior, with the ERM-relative bound.
pub fn run_gibbs_experiment(cfg: &GibbsConfig) -> Result<Vec<GibbsRow>> {
    let base = &cfg.base;
    base.validate()?;
    if !(cfg.eta_hat > 0.0) {
        return invalid("eta_hat must be positive");
    }
    if cfg.k > 1 {
        return invalid("k must be 0 or 1");
    }
    let problem = base.problem()?;
    let erm = ThresholdErm::for_class(problem.class())?;
    let (beta, b) = base.bernstein_pair(&problem)?;
    let consts = BoundConstants::new(b)?;
    let jobs: Vec<(u64, usize)> = base.ns.iter().flat_map(|&n| (0..base.trials).map(move |t| (n, t))).collect();
    jobs.into_par_iter()
        .map(|(n, trial)| {
            let mut rng = rng_for(derive_seed(base.seed, &[0x6762]), &[n, trial as u64]);
            let z0 = problem.distribution().draw_sample(n as usize, &mut rng)?;
            let w = threshold_compression_prior(&problem, &erm, &z0, cfg.k)?;
            let q = gibbs_posterior(&w, &z0, cfg.eta_hat, &problem)?;
            let f = erm.hypothesis(&z0);
            let erm_emp = problem.hypothesis_empirical_loss(f, &z0);
            let kl_erm = kl(&Posterior::point(f), &w).nats();
            let nf = n as f64;
            let ub = kl_erm + cfg.k as f64 * (2.0 * nf).ln() + llog(n)?;
            let complexity = 8.0 * starstar(ub / (nf * consts.eta_max), 1.0 / (2.0 - beta))?;
            let rn = nf.sqrt();
            let remainder = consts.eta_max / (4.0 * rn) + 24.0 * (1.0 / base.delta).ln() / (rn * consts.eta_max);
            let rhs = erm_emp + (2.0 * beta).min(1.0) * problem.empirical_excess(f, &z0) + complexity + remainder;
            let pop = population_loss(&q, &problem);
            Ok(GibbsRow {
                n,
                trial,
                gibbs_population_loss: pop,
                gibbs_empirical_loss: crate::problem::empirical_loss(&q, &z0, &problem)?,
                erm_empirical_loss: erm_emp,
                kl_erm_prior: kl_erm,
                complexity_ub: ub,
                bound_rhs: rhs,
                covered: pop <= rhs,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            ns: vec![16, 32, 64, 128],
            trials: 20,
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = (1..=8).map(|k| (2f64.powi(k), 3.0 * 2f64.powi(-k))).collect();
        assert!((loglog_slope(&pts).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn rate_experiment_is_deterministic() {
        let (a, sa) = run_rate_experiment(&small()).unwrap();
        let (b, sb) = run_rate_experiment(&small()).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        assert_eq!(a.len(), 80);
        assert!(a.iter().all(|r| r.gap.abs() <= 1.0 && r.emp_excess <= 1e-12));
        assert!((sa.b - 1.25).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let bad = ExperimentConfig { noise_p: 0.5, ..small() };
        assert!(run_rate_experiment(&bad).is_err());
        let bad = ExperimentConfig { trials: 0, ..small() };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig { kl: KlSource::Enumeration, ..small() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn gibbs_k0_uses_fixed_prior() {
        let cfg = GibbsConfig { base: small(), k: 0, eta_hat: 0.5 };
        let rows = run_gibbs_experiment(&cfg).unwrap();
        let m = 12f64.ln();
        assert!(rows.iter().all(|r| (r.kl_erm_prior - m).abs() < 1e-12));
        assert!(rows.iter().all(|r| r.covered));
    }
}
