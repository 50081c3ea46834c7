//! Fast-rate bounds, the η-grid machinery and slow-rate baselines.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lemma::c_const;

/// `⌈log₂ √n⌉`, computed in integers.
fn ceil_log2_sqrt(n: u64) -> u32 {
    // smallest k with 4^k ≥ n
    let mut k = 0;
    while 4u128.pow(k) < n as u128 {
        k += 1;
    }
    k
}

/// Grid depth `K = ⌈log₂ √n⌉ + 2`.
pub fn grid_depth(n: u64) -> u32 {
    ceil_log2_sqrt(n) + 2
}

/// `llog n = ln(⌈log₂ √n⌉ + 2)`.
pub fn llog(n: u64) -> Result<f64> {
    if n == 0 {
        return invalid("llog needs n >= 1");
    }
    Ok(f64::from(grid_depth(n)).ln())
}

/// `a^b_{[**]} = max(a^b, a)`.
pub fn starstar(a: f64, b: f64) -> Result<f64> {
    if !(a >= 0.0) || !(b > 0.0 && b <= 1.0) {
        return invalid(format!("starstar needs a >= 0 and b in (0, 1], got a = {a}, b = {b}"));
    }
    Ok(a.powf(b).max(a))
}

/// `{η_max / 2^j : j = 0, …, K}`.
pub fn eta_grid(n: u64, eta_max: f64) -> Result<Vec<f64>> {
    if n == 0 || !(eta_max > 0.0) {
        return invalid("eta_grid needs n >= 1 and eta_max > 0");
    }
    Ok((0..=grid_depth(n)).map(|j| eta_max / 2f64.powi(j as i32)).collect())
}

/// `(η/η_max)^{1/(1−β)}`, with the `β = 1` limit `1{η ≥ η_max}`.
pub fn rate_penalty(eta: f64, eta_max: f64, beta: f64) -> f64 {
    let u = eta / eta_max;
    if beta >= 1.0 {
        if u >= 1.0 {
            1.0
        } else {
            0.0
        }
    } else {
        u.powf(1.0 / (1.0 - beta))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompMinimum {
    pub eta_hat: f64,
    pub value: f64,
    /// Exponent `j` of `η̂ = η_max / 2^j`.
    pub grid_index: u32,
}

/// Minimizes `comp(η) = (η/η_max)^{1/(1−β)} + (UB + ln|G|)/(nη)` over the η-grid.
pub fn comp_minimize(kl_ub: f64, n: u64, beta: f64, eta_max: f64) -> Result<CompMinimum> {
    if !(kl_ub >= 0.0) {
        return invalid("kl_ub must be >= 0");
    }
    check_beta(beta)?;
    let grid = eta_grid(n, eta_max)?;
    let penalty = (grid.len() as f64).ln();
    let mut best: Option<CompMinimum> = None;
    for (j, &eta) in grid.iter().enumerate() {
        let value = rate_penalty(eta, eta_max, beta) + (kl_ub + penalty) / (n as f64 * eta);
        if best.is_none_or(|b| value < b.value) {
            best = Some(CompMinimum {
                eta_hat: eta,
                value,
                grid_index: j as u32,
            });
        }
    }
    Ok(best.expect("grid is non-empty"))
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&beta) {
        return invalid(format!("beta = {beta} must lie in [0, 1]"));
    }
    Ok(())
}

/// `C_{1/4} = C_{2, 1/4}` and `η_max = min(1/4, 1/(2B C_{1/4}))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c_quarter: f64,
    pub eta_max: f64,
}

impl BoundConstants {
    #[allow(non_snake_case)]
    pub fn new(B: f64) -> Result<Self> {
        if !(B >= 1.0 && B.is_finite()) {
            return invalid(format!("Bernstein constant B = {B} must be a finite value >= 1"));
        }
        let c_quarter = c_const(2.0, 0.25)?;
        Ok(Self {
            c_quarter,
            eta_max: 0.25f64.min(1.0 / (2.0 * B * c_quarter)),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n: u64,
    pub beta: f64,
    #[serde(rename = "B")]
    pub b: f64,
    /// Expected KL or any upper bound on it, in nats.
    pub kl_bar: f64,
    /// Empirical excess risk (or its expectation for in-expectation forms).
    pub emp_excess: f64,
    pub eta: Option<f64>,
    pub delta: Option<f64>,
}

impl BoundInputs {
    fn validate(&self) -> Result<BoundConstants> {
        if self.n == 0 {
            return invalid("n must be >= 1");
        }
        check_beta(self.beta)?;
        if !(self.kl_bar >= 0.0) {
            return invalid(format!("kl_bar = {} must be >= 0", self.kl_bar));
        }
        if !self.emp_excess.is_finite() {
            return invalid("emp_excess must be finite");
        }
        BoundConstants::new(self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundForm {
    Main,
    Inprob,
    Inexpect,
    Cmi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub form: BoundForm,
    pub excess_term: f64,
    pub complexity_term: f64,
    pub remainder_term: f64,
    pub total: f64,
    pub eta_max: f64,
    pub c_quarter: f64,
    pub inputs: BoundInputs,
}

impl BoundReport {
    fn new(form: BoundForm, k: BoundConstants, inputs: BoundInputs, excess: f64, complexity: f64, remainder: f64) -> Self {
        Self {
            form,
            excess_term: excess,
            complexity_term: complexity,
            remainder_term: remainder,
            total: excess + complexity + remainder,
            eta_max: k.eta_max,
            c_quarter: k.c_quarter,
            inputs,
        }
    }
}

/// Largest admissible ESI rate `√n · η_max / 24`.
pub fn eta_cap(n: u64, eta_max: f64) -> f64 {
    (n as f64).sqrt() * eta_max / 24.0
}

fn fast_complexity(factor: f64, kl: f64, n: u64, beta: f64, eta_max: f64) -> Result<f64> {
    Ok(factor * starstar(kl / (n as f64 * eta_max), 1.0 / (2.0 - beta))?)
}

/// `min(1, 2β) R + 8 ((UB + llog n)/(n η_max))^{1/(2−β)}_{[**]} + 6η/n`.
pub fn main_bound(inputs: &BoundInputs) -> Result<BoundReport> {
    let k = inputs.validate()?;
    let Some(eta) = inputs.eta else {
        return invalid("the main bound needs eta");
    };
    let cap = eta_cap(inputs.n, k.eta_max);
    if !(eta > 0.0 && eta <= cap * (1.0 + 1e-12)) {
        return invalid(format!("eta = {eta} must lie in (0, sqrt(n)·eta_max/24 = {cap}]"));
    }
    let n = inputs.n;
    let complexity = fast_complexity(8.0, inputs.kl_bar + llog(n)?, n, inputs.beta, k.eta_max)?;
    let excess = (2.0 * inputs.beta).min(1.0) * inputs.emp_excess;
    Ok(BoundReport::new(BoundForm::Main, k, *inputs, excess, complexity, 6.0 * eta / n as f64))
}

/// High-probability form: the main bound with `η` eliminated.
pub fn inprob_bound(inputs: &BoundInputs) -> Result<BoundReport> {
    let k = inputs.validate()?;
    let Some(delta) = inputs.delta else {
        return invalid("the in-probability bound needs delta");
    };
    if !(delta > 0.0 && delta < 1.0) {
        return invalid(format!("delta = {delta} must lie in (0, 1)"));
    }
    let n = inputs.n;
    let rn = (n as f64).sqrt();
    let complexity = fast_complexity(8.0, inputs.kl_bar + llog(n)?, n, inputs.beta, k.eta_max)?;
    let remainder = k.eta_max / (4.0 * rn) + 24.0 * (1.0 / delta).ln() / (rn * k.eta_max);
    let excess = (2.0 * inputs.beta).min(1.0) * inputs.emp_excess;
    Ok(BoundReport::new(BoundForm::Inprob, k, *inputs, excess, complexity, remainder))
}

/// In-expectation form `min(1, 2β) E[R] + 4 (E[KL]/(n η_max))^{1/(2−β)}_{[**]}`.
pub fn inexpect_bound(inputs: &BoundInputs) -> Result<BoundReport> {
    let k = inputs.validate()?;
    let complexity = fast_complexity(4.0, inputs.kl_bar, inputs.n, inputs.beta, k.eta_max)?;
    let excess = (2.0 * inputs.beta).min(1.0) * inputs.emp_excess;
    Ok(BoundReport::new(BoundForm::Inexpect, k, *inputs, excess, complexity, 0.0))
}

/// [`inexpect_bound`] with the conditional mutual information as `kl_bar`.
pub fn cmi_bound(inputs: &BoundInputs) -> Result<BoundReport> {
    let mut r = inexpect_bound(inputs)?;
    r.form = BoundForm::Cmi;
    Ok(r)
}

/// Minimizer over `η ∈ (0, η_max]` of `(η/η_max)^{1/(1−β)} + kl/(nη)`:
/// `η = min(η_max, η_max ((1−β) a)^{(1−β)/(2−β)})` with `a = kl/(n η_max)`.
pub fn inexpect_eta(kl: f64, n: u64, beta: f64, eta_max: f64) -> f64 {
    if beta >= 1.0 {
        return eta_max;
    }
    let a = kl / (n as f64 * eta_max);
    eta_max * ((1.0 - beta) * a).powf((1.0 - beta) / (2.0 - beta)).min(1.0)
}

/// Slow-rate PAC-Bayes baseline `√(2 L̂ (KL + ln(2√n/δ))/n) + 2(KL + ln(2√n/δ))/n`.
pub fn baseline_pb(kl: f64, n: u64, delta: f64, emp_loss: f64) -> Result<f64> {
    if !(kl >= 0.0) || n == 0 || !(delta > 0.0 && delta < 1.0) || !(0.0..=1.0).contains(&emp_loss) {
        return invalid("baseline_pb needs kl >= 0, n >= 1, delta in (0, 1), emp_loss in [0, 1]");
    }
    let nf = n as f64;
    let c = kl + (2.0 * nf.sqrt() / delta).ln();
    Ok((2.0 * emp_loss * c / nf).sqrt() + 2.0 * c / nf)
}

/// Mutual-information baseline `√(2 I / n)`.
pub fn baseline_mi(mi: f64, n: u64) -> Result<f64> {
    if !(mi >= 0.0) || n == 0 {
        return invalid("baseline_mi needs mi >= 0 and n >= 1");
    }
    Ok((2.0 * mi / n as f64).sqrt())
}
