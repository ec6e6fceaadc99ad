//! Small numeric helpers shared by every module.

use crate::error::{Error, Result};

/// Tolerance on the row sums of every probability table.
pub const DIST_TOL: f64 = 1e-9;

/// Normalizers below this value are treated as zero.
pub const DEGENERATE: f64 = 1e-12;

/// Neumaier compensated summation. Results depend only on the order of the
/// added terms, never on how callers batch them.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        s.extend(iter);
        s
    }
}

pub fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    sum(a.iter().zip(b).map(|(x, y)| x * y))
}

/// Checks that `row` is a probability distribution: no negative entries and
/// a sum within [`DIST_TOL`] of one.
pub fn check_distribution(row: &[f64], what: &'static str, index: usize) -> Result<()> {
    if row.is_empty() {
        return Err(Error::InvalidDistribution {
            what,
            row: index,
            reason: "empty row".into(),
        });
    }
    if let Some(p) = row.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::InvalidDistribution {
            what,
            row: index,
            reason: format!("entry {p} is negative or not finite"),
        });
    }
    let total = sum(row.iter().copied());
    if (total - 1.0).abs() > DIST_TOL {
        return Err(Error::InvalidDistribution {
            what,
            row: index,
            reason: format!("sums to {total}"),
        });
    }
    Ok(())
}

/// Normalizes in place and returns the normalizer, or `None` when it is
/// degenerate (the slice is then left untouched).
pub fn normalize(values: &mut [f64]) -> Option<f64> {
    let total = sum(values.iter().copied());
    if !(total > DEGENERATE) {
        return None;
    }
    for v in values.iter_mut() {
        *v /= total;
    }
    Some(total)
}

pub fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

pub fn one_hot(n: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[k] = 1.0;
    v
}

pub fn l1_distance(p: &[f64], q: &[f64]) -> f64 {
    sum(p.iter().zip(q).map(|(a, b)| (a - b).abs()))
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * l1_distance(p, q)
}

/// Maximizes `Σ w_i log p_i` over distributions with every `p_i ≥ floor`.
///
/// The solution is `p_i = max(floor, w_i / μ)` with `μ` fixed by the sum
/// constraint, found by clamping entries to the floor until none of the free
/// ones falls below it. A zero weight vector maps to the uniform distribution.
pub fn floor_normalize(weights: &[f64], floor: f64) -> Vec<f64> {
    let n = weights.len();
    let total = sum(weights.iter().copied());
    if n == 0 || !(total > 0.0) || floor * n as f64 >= 1.0 {
        return uniform(n);
    }
    let mut clamped = vec![false; n];
    let mut out = vec![0.0; n];
    loop {
        let n_clamped = clamped.iter().filter(|c| **c).count();
        let free_weight = sum(
            weights
                .iter()
                .zip(&clamped)
                .filter(|(_, c)| !**c)
                .map(|(w, _)| *w),
        );
        let free_mass = 1.0 - floor * n_clamped as f64;
        let mut changed = false;
        for i in 0..n {
            if clamped[i] {
                out[i] = floor;
                continue;
            }
            out[i] = weights[i] / free_weight * free_mass;
            if out[i] < floor {
                clamped[i] = true;
                changed = true;
            }
        }
        if !changed {
            return out;
        }
    }
}

/// Dense row-major `rows × cols` table stored as nested vectors; checks shape.
pub(crate) fn check_shape(
    table: &[Vec<f64>],
    rows: usize,
    cols: usize,
    what: &str,
) -> Result<()> {
    if table.len() != rows {
        return Err(Error::DimensionMismatch(format!(
            "{what}: expected {rows} rows, found {}",
            table.len()
        )));
    }
    if let Some((i, r)) = table.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(Error::DimensionMismatch(format!(
            "{what}: row {i} has {} entries, expected {cols}",
            r.len()
        )));
    }
    Ok(())
}
