//! Examples, samples, supersamples and selectors.

use std::cmp::Ordering;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A single labelled example `(x, y)`.
///
/// `y` is a 0/1 label for classification tasks and a real in `[0, 1]` for generic
/// bounded-loss tasks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub x: i64,
    pub y: f64,
}

impl Example {
    pub fn new(x: i64, y: f64) -> Self {
        Self { x, y }
    }

    /// Whether two examples are bitwise identical (labels compared by bit pattern).
    pub fn same(&self, other: &Example) -> bool {
        self.x == other.x && self.y.to_bits() == other.y.to_bits()
    }

    /// Total order on examples: by feature, then label.
    pub fn canonical_cmp(&self, other: &Example) -> Ordering {
        self.x.cmp(&other.x).then(self.y.total_cmp(&other.y))
    }
}

/// An ordered, non-empty list of examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample(Vec<Example>);

impl Sample {
    pub fn new(examples: Vec<Example>) -> Result<Self> {
        if examples.is_empty() {
            return invalid("a sample must contain at least one example");
        }
        Ok(Self(examples))
    }

    pub fn into_inner(self) -> Vec<Example> {
        self.0
    }

    pub fn features(&self) -> Vec<i64> {
        self.0.iter().map(|z| z.x).collect()
    }
}

impl Deref for Sample {
    type Target = [Example];

    fn deref(&self) -> &[Example] {
        &self.0
    }
}

/// Selection bits `S ∈ {0,1}ⁿ`; `true` picks column 1 of a row.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Selector(Vec<bool>);

impl Selector {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![false; n])
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![true; n])
    }

    /// Bit `i` of `index` becomes selector bit `i`.
    pub fn from_index(index: u64, n: usize) -> Self {
        Self((0..n).map(|i| (index >> i) & 1 == 1).collect())
    }

    pub fn complement(&self) -> Self {
        Self(self.0.iter().map(|b| !b).collect())
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// An `n × 2` matrix of examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Supersample {
    rows: Vec<[Example; 2]>,
}

impl Supersample {
    pub fn new(rows: Vec<[Example; 2]>) -> Result<Self> {
        if rows.is_empty() {
            return invalid("a supersample needs at least one row");
        }
        Ok(Self { rows })
    }

    /// Builds the supersample whose columns are `z0` and `z1`.
    pub fn from_columns(z0: &Sample, z1: &Sample) -> Result<Self> {
        if z0.len() != z1.len() {
            return invalid(format!(
                "column lengths differ: {} vs {}",
                z0.len(),
                z1.len()
            ));
        }
        Self::new(z0.iter().zip(z1.iter()).map(|(a, b)| [*a, *b]).collect())
    }

    pub fn rows(&self) -> &[[Example; 2]] {
        &self.rows
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn column(&self, j: usize) -> Sample {
        Sample(self.rows.iter().map(|r| r[j]).collect())
    }

    /// All `2n` examples, row-major.
    pub fn entries(&self) -> impl Iterator<Item = &Example> {
        self.rows.iter().flat_map(|r| r.iter())
    }

    /// Exchanges the two entries of every row `i` with `s_i = 1`.
    pub fn swap(&self, s: &Selector) -> Result<Supersample> {
        check_len(self, s)?;
        let rows = self
            .rows
            .iter()
            .zip(s.bits())
            .map(|(r, &b)| if b { [r[1], r[0]] } else { *r })
            .collect();
        Ok(Supersample { rows })
    }

    /// Training sample `z̃_s` only; cheaper than [`select`] when the ghost is not needed.
    pub fn selected(&self, s: &Selector) -> Result<Sample> {
        check_len(self, s)?;
        Ok(Sample(
            self.rows
                .iter()
                .zip(s.bits())
                .map(|(r, &b)| r[usize::from(b)])
                .collect(),
        ))
    }
}

fn check_len(ss: &Supersample, s: &Selector) -> Result<()> {
    if ss.n() != s.len() {
        return invalid(format!(
            "selector length {} does not match supersample rows {}",
            s.len(),
            ss.n()
        ));
    }
    Ok(())
}

/// Splits a supersample into `(z̃_s, z̃_s̄)`.
pub fn select(ss: &Supersample, s: &Selector) -> Result<(Sample, Sample)> {
    let chosen = ss.selected(s)?;
    let ghost = ss.selected(&s.complement())?;
    Ok((chosen, ghost))
}

/// Inverse of [`select`]: puts `z_s` back into column `s_i` of each row.
pub fn recombine(z_s: &Sample, z_sbar: &Sample, s: &Selector) -> Result<Supersample> {
    if z_s.len() != s.len() || z_sbar.len() != s.len() {
        return invalid("recombine: lengths do not match the selector");
    }
    let rows = z_s
        .iter()
        .zip(z_sbar.iter())
        .zip(s.bits())
        .map(|((a, b), &bit)| if bit { [*b, *a] } else { [*a, *b] })
        .collect();
    Supersample::new(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(x: i64, y: f64) -> Example {
        Example::new(x, y)
    }

    fn two_rows() -> Supersample {
        Supersample::new(vec![[ex(1, 0.0), ex(2, 1.0)], [ex(3, 1.0), ex(4, 0.0)]]).unwrap()
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(Sample::new(vec![]).is_err());
    }

    #[test]
    fn select_zero_and_one_selectors() {
        let ss = two_rows();
        let (a, b) = select(&ss, &Selector::zeros(2)).unwrap();
        assert_eq!(a, ss.column(0));
        assert_eq!(b, ss.column(1));
        let (a, b) = select(&ss, &Selector::ones(2)).unwrap();
        assert_eq!(a, ss.column(1));
        assert_eq!(b, ss.column(0));
    }

    #[test]
    fn select_mixed() {
        let ss = two_rows();
        let (a, b) = select(&ss, &Selector::new(vec![false, true])).unwrap();
        assert_eq!(&a[..], &[ex(1, 0.0), ex(4, 0.0)]);
        assert_eq!(&b[..], &[ex(2, 1.0), ex(3, 1.0)]);
    }

    #[test]
    fn select_length_mismatch() {
        assert!(select(&two_rows(), &Selector::zeros(3)).is_err());
    }

    #[test]
    fn recombine_inverts_select() {
        let ss = two_rows();
        for idx in 0..4 {
            let s = Selector::from_index(idx, 2);
            let (a, b) = select(&ss, &s).unwrap();
            assert_eq!(recombine(&a, &b, &s).unwrap(), ss);
        }
    }
}
