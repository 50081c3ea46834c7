//! Finite hypothesis classes with a fixed well-order (the index order).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Where a threshold classifier switches from 0 to 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cut {
    At(i64),
    Infinity,
}

/// The prediction rule of a hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Rule {
    /// `f_t(x) = 1 ⇔ x ≥ t`.
    Threshold(Cut),
    /// Explicit labels on a sorted feature list; unlisted points are labelled 0.
    Table { domain: Vec<i64>, labels: Vec<f64> },
    Constant(f64),
}

impl Rule {
    pub fn predict(&self, x: i64) -> f64 {
        match self {
            Rule::Threshold(Cut::At(t)) => {
                if x >= *t {
                    1.0
                } else {
                    0.0
                }
            }
            Rule::Threshold(Cut::Infinity) => 0.0,
            Rule::Table { domain, labels } => domain
                .binary_search(&x)
                .map(|i| labels[i])
                .unwrap_or(0.0),
            Rule::Constant(c) => *c,
        }
    }
}

/// A hypothesis is identified by its index in the class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub id: usize,
    pub rule: Rule,
}

impl Hypothesis {
    pub fn predict(&self, x: i64) -> f64 {
        self.rule.predict(x)
    }
}

/// Ordered finite class. Index order is the tie-breaking well-order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisClass {
    hypotheses: Vec<Hypothesis>,
    /// Largest feature value of a threshold class; `None` for other classes.
    threshold_max: Option<i64>,
}

impl HypothesisClass {
    pub fn new(rules: Vec<Rule>) -> Result<Self> {
        if rules.is_empty() {
            return invalid("hypothesis class must be non-empty");
        }
        let hypotheses = rules
            .into_iter()
            .enumerate()
            .map(|(id, rule)| Hypothesis { id, rule })
            .collect();
        Ok(Self {
            hypotheses,
            threshold_max: None,
        })
    }

    /// Thresholds `t = 0, 1, …, x_max` followed by the sentinel `∞` (id `x_max + 1`).
    pub fn thresholds(x_max: i64) -> Result<Self> {
        if x_max < 0 {
            return invalid("threshold domain [0, x_max] needs x_max >= 0");
        }
        let mut rules: Vec<Rule> = (0..=x_max).map(|t| Rule::Threshold(Cut::At(t))).collect();
        rules.push(Rule::Threshold(Cut::Infinity));
        let mut class = Self::new(rules)?;
        class.threshold_max = Some(x_max);
        Ok(class)
    }

    /// One hypothesis per truth table over `domain`.
    pub fn from_tables(domain: &[i64], tables: &[Vec<f64>]) -> Result<Self> {
        let mut order: Vec<usize> = (0..domain.len()).collect();
        order.sort_by_key(|&i| domain[i]);
        let sorted: Vec<i64> = order.iter().map(|&i| domain[i]).collect();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return invalid("truth-table domain has repeated points");
        }
        let mut rules = Vec::with_capacity(tables.len());
        for t in tables {
            if t.len() != domain.len() {
                return invalid("truth table length differs from the domain size");
            }
            rules.push(Rule::Table {
                domain: sorted.clone(),
                labels: order.iter().map(|&i| t[i]).collect(),
            });
        }
        Self::new(rules)
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn get(&self, id: usize) -> &Hypothesis {
        &self.hypotheses[id]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Hypothesis> {
        self.hypotheses.iter()
    }

    pub fn threshold_max(&self) -> Option<i64> {
        self.threshold_max
    }

    /// Id of threshold `t` in a threshold class (`t > x_max` maps to `∞`).
    pub fn threshold_id(&self, cut: Cut) -> Option<usize> {
        let x_max = self.threshold_max?;
        Some(match cut {
            Cut::At(t) if t <= 0 => 0,
            Cut::At(t) if t <= x_max => t as usize,
            _ => (x_max + 1) as usize,
        })
    }

    /// Labelling of `xs` by hypothesis `id`.
    pub fn labelling(&self, id: usize, xs: &[i64]) -> Vec<f64> {
        let h = self.get(id);
        xs.iter().map(|&x| h.predict(x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_predictions() {
        let c = HypothesisClass::thresholds(10).unwrap();
        assert_eq!(c.len(), 12);
        assert_eq!(c.get(5).predict(4), 0.0);
        assert_eq!(c.get(5).predict(5), 1.0);
        assert_eq!(c.get(11).predict(10), 0.0);
        assert_eq!(c.threshold_id(Cut::At(11)), Some(11));
        assert_eq!(c.threshold_id(Cut::Infinity), Some(11));
    }

    #[test]
    fn tables_sorted_by_domain() {
        let c = HypothesisClass::from_tables(&[3, 1, 2], &[vec![1.0, 0.0, 1.0]]).unwrap();
        assert_eq!(c.labelling(0, &[1, 2, 3, 9]), vec![0.0, 1.0, 1.0, 0.0]);
        assert!(HypothesisClass::from_tables(&[1, 1], &[vec![0.0, 0.0]]).is_err());
        assert!(HypothesisClass::new(vec![]).is_err());
    }
}
