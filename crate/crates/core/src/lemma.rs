//! Constants of the two-point randomization lemma and exhaustive checks of it.
//!
//! For `S ∼ Ber(½)` and `r₀, r₁ ∈ [−1, 1]` the claim is
//! `E[exp(η(r_{S̄} − r_S − η C r_{S̄}²))] ≤ 1`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// `c_γ = 2(−ln(1−γ) − γ)/γ²` on `(0, 1)`.
pub fn c_gamma(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return invalid(format!("c_gamma needs gamma in (0, 1), got {gamma}"));
    }
    if gamma < 1e-4 {
        // 2 Σ_{k≥2} γ^{k−2}/k, truncated where the terms drop below 1e-16
        return Ok(1.0 + gamma * (2.0 / 3.0 + gamma * (0.5 + gamma * 0.4)));
    }
    Ok(2.0 * (-(-gamma).ln_1p() - gamma) / (gamma * gamma))
}

/// `C_{A,η} = (A + √A · η/(1−η) · c_{√A η/(1−η)}) / (1 − η)`.
pub fn c_const(a: f64, eta: f64) -> Result<f64> {
    if !(a > 0.0) {
        return invalid(format!("shape parameter A = {a} must be positive"));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return invalid(format!("eta = {eta} must lie in (0, 1)"));
    }
    let k = eta / (1.0 - eta);
    let gamma = a.sqrt() * k;
    if gamma >= 1.0 {
        return invalid(format!(
            "sqrt(A)·eta/(1−eta) = {gamma} >= 1: the constant is void at eta = {eta}"
        ));
    }
    Ok((a + a.sqrt() * k * c_gamma(gamma)?) / (1.0 - eta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaConstants {
    pub a: f64,
    pub eta: f64,
    pub c_gamma_value: f64,
    pub c_value: f64,
}

impl LemmaConstants {
    pub fn new(a: f64, eta: f64) -> Result<Self> {
        let c_value = c_const(a, eta)?;
        let gamma = a.sqrt() * eta / (1.0 - eta);
        Ok(Self {
            a,
            eta,
            c_gamma_value: c_gamma(gamma)?,
            c_value,
        })
    }
}

/// `½ exp(η(r₁ − r₀ − ηC r₁²)) + ½ exp(η(r₀ − r₁ − ηC r₀²))`.
pub fn lemma1_margin(r0: f64, r1: f64, eta: f64, c: f64) -> Result<f64> {
    if r0.abs() > 1.0 || r1.abs() > 1.0 {
        return invalid("lemma inputs must satisfy |r0|, |r1| <= 1");
    }
    if !(eta > 0.0) || !(c >= 0.0) {
        return invalid("lemma needs eta > 0 and C >= 0");
    }
    Ok(margin(r0, r1, eta, c))
}

#[inline]
fn margin(r0: f64, r1: f64, eta: f64, c: f64) -> f64 {
    0.5 * (eta * (r1 - r0 - eta * c * r1 * r1)).exp()
        + 0.5 * (eta * (r0 - r1 - eta * c * r0 * r0)).exp()
}

/// How the sweep picks `C` at each `η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CRule {
    /// `C_{A,η}`.
    Closed { a: f64 },
    Fixed(f64),
}

/// Which `(r₀, r₁)` pairs are swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// `[−1, 1]²`.
    General,
    /// `[0, 1]²`.
    SameSign,
    /// The slice `r₀ = −r₁`, `r₀ ∈ [−1, 1]`.
    Antipodal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eta: f64,
    /// `None` when the closed-form constant is void at this `η`.
    pub c_used: Option<f64>,
    pub worst_margin: Option<f64>,
    pub worst_r0: Option<f64>,
    pub worst_r1: Option<f64>,
}

impl SweepRow {
    pub fn out_of_domain(&self) -> bool {
        self.c_used.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub r_step: f64,
    pub region: Region,
    pub rows: Vec<SweepRow>,
    /// Maximum over all in-domain rows.
    pub worst_margin: Option<f64>,
    pub worst_point: Option<(f64, f64, f64)>,
}

impl SweepReport {
    pub fn passes(&self) -> bool {
        self.worst_margin.is_some_and(|w| w <= 1.0 + 1e-12)
    }
}

fn grid(r_step: f64, lo: f64) -> Result<Vec<f64>> {
    if !(r_step > 0.0 && r_step <= 1.0) {
        return invalid(format!("r_step = {r_step} must lie in (0, 1]"));
    }
    let k = (1.0 / r_step).round() as i64;
    let first = if lo < 0.0 { -k } else { 0 };
    Ok((first..=k)
        .map(|i| (i as f64 / k as f64).clamp(-1.0, 1.0))
        .collect())
}

/// Worst margin and its location at one `(η, C)`; ties resolve to the first grid point.
fn worst_at(eta: f64, c: f64, r_step: f64, region: Region) -> Result<(f64, f64, f64)> {
    let lo = if region == Region::SameSign { 0.0 } else { -1.0 };
    let g = grid(r_step, lo)?;
    if region == Region::Antipodal {
        return Ok(g
            .iter()
            .map(|&r| (margin(r, -r, eta, c), r, -r))
            .fold((f64::NEG_INFINITY, 0.0, 0.0), |a, b| if b.0 > a.0 { b } else { a }));
    }
    let per_row: Vec<(f64, f64, f64)> = g
        .par_iter()
        .map(|&r0| {
            g.iter()
                .map(|&r1| (margin(r0, r1, eta, c), r0, r1))
                .fold((f64::NEG_INFINITY, 0.0, 0.0), |a, b| if b.0 > a.0 { b } else { a })
        })
        .collect();
    Ok(per_row
        .into_iter()
        .fold((f64::NEG_INFINITY, 0.0, 0.0), |a, b| if b.0 > a.0 { b } else { a }))
}

/// Exhaustive margin sweep over a grid of step `r_step` for every `η` in `etas`.
pub fn lemma1_sweep(r_step: f64, etas: &[f64], rule: CRule, region: Region) -> Result<SweepReport> {
    if etas.is_empty() {
        return invalid("lemma1_sweep needs at least one eta");
    }
    let mut rows = Vec::with_capacity(etas.len());
    let mut worst: Option<(f64, (f64, f64, f64))> = None;
    for &eta in etas {
        if !(eta > 0.0) {
            return invalid(format!("eta = {eta} must be positive"));
        }
        let c = match rule {
            CRule::Closed { a } => c_const(a, eta).ok(),
            CRule::Fixed(c) if c >= 0.0 => Some(c),
            CRule::Fixed(c) => return invalid(format!("C = {c} must be >= 0")),
        };
        let Some(c) = c else {
            rows.push(SweepRow {
                eta,
                c_used: None,
                worst_margin: None,
                worst_r0: None,
                worst_r1: None,
            });
            continue;
        };
        let (w, r0, r1) = worst_at(eta, c, r_step, region)?;
        if worst.is_none_or(|(best, _)| w > best) {
            worst = Some((w, (r0, r1, eta)));
        }
        rows.push(SweepRow {
            eta,
            c_used: Some(c),
            worst_margin: Some(w),
            worst_r0: Some(r0),
            worst_r1: Some(r1),
        });
    }
    Ok(SweepReport {
        r_step,
        region,
        rows,
        worst_margin: worst.map(|w| w.0),
        worst_point: worst.map(|w| w.1),
    })
}

/// Largest `C` tried by [`optimal_constant`].
pub const C_SEARCH_MAX: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OptimalConstant {
    /// Smallest passing `C` found, accurate to the requested tolerance from above.
    Bounded(f64),
    Unbounded,
}

impl OptimalConstant {
    pub fn value(self) -> Option<f64> {
        match self {
            OptimalConstant::Bounded(c) => Some(c),
            OptimalConstant::Unbounded => None,
        }
    }
}

/// Binary search for the smallest `C ≥ 0` whose sweep passes at `η`.
///
/// The margin is nonincreasing in `C`, so the passing set is an interval `[C_opt, ∞)`.
pub fn optimal_constant(eta: f64, r_step: f64, tol: f64, region: Region) -> Result<OptimalConstant> {
    if !(eta > 0.0 && eta <= 0.7) {
        return invalid(format!("optimal_constant needs eta in (0, 0.7], got {eta}"));
    }
    if !(tol > 0.0) {
        return invalid("tolerance must be positive");
    }
    let passes = |c: f64| worst_at(eta, c, r_step, region).map(|w| w.0 <= 1.0 + 1e-12);
    if passes(0.0)? {
        return Ok(OptimalConstant::Bounded(0.0));
    }
    if !passes(C_SEARCH_MAX)? {
        return Ok(OptimalConstant::Unbounded);
    }
    let (mut lo, mut hi) = (0.0, C_SEARCH_MAX);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if passes(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(OptimalConstant::Bounded(hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_gamma_values() {
        assert!((c_gamma(1e-6).unwrap() - 1.0).abs() < 1e-5);
        let direct = 2.0 * (2f64.ln() - 0.5) / 0.25;
        assert!((c_gamma(0.5).unwrap() - direct).abs() < 1e-14);
        assert!((c_gamma(0.5).unwrap() - 1.5452).abs() < 1e-4);
        assert!(c_gamma(0.9).unwrap() > c_gamma(0.5).unwrap());
        assert!(c_gamma(0.0).is_err() && c_gamma(1.0).is_err());
    }

    #[test]
    fn c_gamma_series_matches_formula_near_switch() {
        let g = 1e-4;
        let series = c_gamma(g * 0.999_999).unwrap();
        let formula = c_gamma(g).unwrap();
        assert!((series - formula).abs() < 1e-9);
    }

    #[test]
    fn c_const_values() {
        assert!((c_const(2.0, 0.25).unwrap() - 3.6064).abs() < 5e-5);
        assert!((c_const(2.0, 1e-7).unwrap() - 2.0).abs() < 1e-5);
        assert!((c_const(1.0, 1e-7).unwrap() - 1.0).abs() < 1e-5);
        assert!(c_const(2.0, 0.5).is_err());
        let k = LemmaConstants::new(2.0, 0.25).unwrap();
        assert!(k.c_gamma_value >= 1.0 && (k.c_value - 3.6064).abs() < 5e-5);
    }

    #[test]
    fn margin_examples() {
        let m = lemma1_margin(0.3, 0.3, 0.2, 2.0).unwrap();
        assert!((m - (-0.04f64 * 2.0 * 0.09).exp()).abs() < 1e-15);
        let m = lemma1_margin(1.0, -1.0, 0.25, 3.6064).unwrap();
        assert!((m - 0.9001).abs() < 1e-4);
        let m = lemma1_margin(0.0, 1.0, 0.25, 0.0).unwrap();
        assert!((m - 0.25f64.cosh()).abs() < 1e-15 && m > 1.0);
        assert!(lemma1_margin(1.5, 0.0, 0.25, 1.0).is_err());
    }

    #[test]
    fn sweep_out_of_domain_row() {
        let r = lemma1_sweep(0.05, &[0.25, 0.5], CRule::Closed { a: 2.0 }, Region::General).unwrap();
        assert!(!r.rows[0].out_of_domain());
        assert!(r.rows[1].out_of_domain());
        assert!(r.passes());
    }

    #[test]
    fn optimum_between_two_and_closed_form() {
        let c = optimal_constant(0.25, 0.02, 1e-3, Region::General).unwrap().value().unwrap();
        assert!(c >= 2.0 - 1e-3 && c <= c_const(2.0, 0.25).unwrap(), "C_opt = {c}");
    }
}
