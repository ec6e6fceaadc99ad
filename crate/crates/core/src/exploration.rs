//! Ellipsoid bonuses over latent features.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::dot;

/// Largest feature dimension that refactors the full matrix on every update.
pub const CHOLESKY_MAX_DIM: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    /// Dense Cholesky refreshed after every update.
    Cholesky,
    /// Rank-one Sherman-Morrison updates of the inverse.
    RankOne,
}

impl Solver {
    pub fn for_dim(m: usize) -> Self {
        if m <= CHOLESKY_MAX_DIM {
            Solver::Cholesky
        } else {
            Solver::RankOne
        }
    }
}

#[derive(Debug, Clone)]
enum Factor {
    Cholesky(Cholesky<f64, Dyn>),
    Inverse(DMatrix<f64>),
}

/// `Σ = Σ_i f_i f_iᵀ + λ I` for one step.
#[derive(Debug, Clone)]
pub struct CovarianceAccumulator {
    step: usize,
    lambda: f64,
    matrix: DMatrix<f64>,
    count: usize,
    factor: Factor,
}

impl CovarianceAccumulator {
    pub fn new(step: usize, m: usize, lambda: f64) -> Result<Self> {
        Self::with_solver(step, m, lambda, Solver::for_dim(m))
    }

    pub fn with_solver(step: usize, m: usize, lambda: f64, solver: Solver) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("feature dimension must be positive".into()));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidArgument(format!("lambda = {lambda} must be positive")));
        }
        let matrix = DMatrix::from_diagonal_element(m, m, lambda);
        let factor = match solver {
            Solver::Cholesky => Factor::Cholesky(
                Cholesky::new(matrix.clone()).ok_or(Error::NotPositiveDefinite)?,
            ),
            Solver::RankOne => Factor::Inverse(DMatrix::from_diagonal_element(m, m, 1.0 / lambda)),
        };
        Ok(Self {
            step,
            lambda,
            matrix,
            count: 0,
            factor,
        })
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn solver(&self) -> Solver {
        match self.factor {
            Factor::Cholesky(_) => Solver::Cholesky,
            Factor::Inverse(_) => Solver::RankOne,
        }
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// Adds `f fᵀ`.
    pub fn accumulate(&mut self, feature: &[f64]) -> Result<()> {
        self.check_dim(feature)?;
        let f = DVector::from_column_slice(feature);
        self.matrix.ger(1.0, &f, &f, 1.0);
        // keep exact symmetry despite rounding in the rank-one update
        let m = self.dim();
        for i in 0..m {
            for j in 0..i {
                let v = 0.5 * (self.matrix[(i, j)] + self.matrix[(j, i)]);
                self.matrix[(i, j)] = v;
                self.matrix[(j, i)] = v;
            }
        }
        match &mut self.factor {
            Factor::Cholesky(c) => {
                *c = Cholesky::new(self.matrix.clone()).ok_or(Error::NotPositiveDefinite)?;
            }
            Factor::Inverse(inv) => {
                let u = &*inv * &f;
                let denom = 1.0 + f.dot(&u);
                inv.ger(-1.0 / denom, &u, &u, 1.0);
            }
        }
        self.count += 1;
        Ok(())
    }

    /// `fᵀ Σ⁻¹ f`, applied through the factorization.
    pub fn quadratic_form(&self, feature: &[f64]) -> Result<f64> {
        self.check_dim(feature)?;
        let f = DVector::from_column_slice(feature);
        let q = match &self.factor {
            Factor::Cholesky(c) => f.dot(&c.solve(&f)),
            Factor::Inverse(inv) => f.dot(&(inv * &f)),
        };
        if !q.is_finite() || q < -1e-12 * dot(feature, feature).max(1.0) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(q.max(0.0))
    }

    fn check_dim(&self, feature: &[f64]) -> Result<()> {
        if feature.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "feature of length {} for a {}-dimensional accumulator",
                feature.len(),
                self.dim()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BonusMode {
    /// Added to the reward.
    Optimism,
    /// Subtracted from the reward.
    Pessimism,
}

impl BonusMode {
    pub fn sign(self) -> f64 {
        match self {
            BonusMode::Optimism => 1.0,
            BonusMode::Pessimism => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BonusConfig {
    pub alpha: f64,
    pub lambda: f64,
    /// `min(α √q, cap)` when set, `α q` otherwise.
    pub truncate: bool,
    pub cap: f64,
    pub mode: BonusMode,
}

pub const DEFAULT_CAP: f64 = 2.0;

impl BonusConfig {
    pub fn new(alpha: f64, lambda: f64) -> Self {
        Self {
            alpha,
            lambda,
            truncate: true,
            cap: DEFAULT_CAP,
            mode: BonusMode::Optimism,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("lambda", self.lambda), ("cap", self.cap)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} = {v} must be positive")));
            }
        }
        Ok(())
    }
}

/// Bonus magnitude for `feature`; the caller applies the sign of `cfg.mode`.
pub fn bonus(acc: &CovarianceAccumulator, feature: &[f64], cfg: &BonusConfig) -> Result<f64> {
    cfg.validate()?;
    let q = acc.quadratic_form(feature)?;
    Ok(if cfg.truncate {
        (cfg.alpha * q.sqrt()).min(cfg.cap)
    } else {
        cfg.alpha * q
    })
}

/// Largest value [`bonus`] can return for a probability-vector feature, since
/// `Σ ⪰ λI` and `‖f‖² ≤ 1`.
pub fn max_bonus(cfg: &BonusConfig) -> f64 {
    if cfg.truncate {
        (cfg.alpha / cfg.lambda.sqrt()).min(cfg.cap)
    } else {
        cfg.alpha / cfg.lambda
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default = "one")]
    pub c_alpha: f64,
    #[serde(default = "one")]
    pub c_lambda: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            c_alpha: 1.0,
            c_lambda: 1.0,
        }
    }
}

/// `(α_k, λ) = (c_α √log(k+1), c_λ log(k+1))` for episode `k ≥ 1`.
pub fn schedule(k: usize, cfg: &ScheduleConfig) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::InvalidArgument("episode index starts at 1".into()));
    }
    let l = ((k + 1) as f64).ln();
    Ok((cfg.c_alpha * l.sqrt(), cfg.c_lambda * l))
}

/// One line of the per-episode bonus trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BonusTraceRow {
    pub episode: usize,
    pub step: usize,
    pub mean_bonus: f64,
    pub max_bonus: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BonusStats {
    pub mean: f64,
    pub max: f64,
    pub count: usize,
}

impl BonusStats {
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let mut sum = crate::numeric::CompensatedSum::new();
        let mut max = 0.0f64;
        let mut count = 0;
        for v in values {
            sum.add(v);
            max = max.max(v);
            count += 1;
        }
        Self {
            mean: if count == 0 { 0.0 } else { sum.value() / count as f64 },
            max,
            count,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e1(m: usize) -> Vec<f64> {
        crate::numeric::one_hot(m, 0)
    }

    #[test]
    fn fresh_accumulator_is_ridge() {
        let acc = CovarianceAccumulator::new(0, 3, 0.5).unwrap();
        assert_eq!(acc.matrix(), &DMatrix::from_diagonal_element(3, 3, 0.5));
        assert_eq!(acc.count(), 0);
    }

    #[test]
    fn repeated_basis_vector_is_diagonal() {
        for solver in [Solver::Cholesky, Solver::RankOne] {
            let mut acc = CovarianceAccumulator::with_solver(0, 3, 1.0, solver).unwrap();
            for _ in 0..4 {
                acc.accumulate(&e1(3)).unwrap();
            }
            assert_eq!(acc.matrix(), &DMatrix::from_diagonal(&DVector::from_vec(vec![5.0, 1.0, 1.0])));
        }
    }

    #[test]
    fn bonus_examples() {
        let acc = CovarianceAccumulator::new(0, 2, 1.0).unwrap();
        assert_eq!(bonus(&acc, &e1(2), &BonusConfig::new(1.0, 1.0)).unwrap(), 1.0);
        assert_eq!(bonus(&acc, &e1(2), &BonusConfig::new(10.0, 1.0)).unwrap(), 2.0);
        let mut acc = acc;
        for n in 1..=20 {
            acc.accumulate(&e1(2)).unwrap();
            let b = bonus(&acc, &e1(2), &BonusConfig::new(1.0, 1.0)).unwrap();
            assert!((b - 1.0 / ((n + 1) as f64).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn untruncated_form_is_quadratic() {
        let mut acc = CovarianceAccumulator::new(0, 2, 1.0).unwrap();
        acc.accumulate(&e1(2)).unwrap();
        let cfg = BonusConfig {
            truncate: false,
            ..BonusConfig::new(3.0, 1.0)
        };
        assert!((bonus(&acc, &e1(2), &cfg).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn schedule_examples() {
        let (a, l) = schedule(1, &ScheduleConfig::default()).unwrap();
        assert_eq!(a, 2f64.ln().sqrt());
        assert_eq!(l, 2f64.ln());
        assert!(schedule(0, &ScheduleConfig::default()).is_err());
        let mut prev = 0.0;
        for k in 1..100 {
            let (a, _) = schedule(k, &ScheduleConfig::default()).unwrap();
            assert!(a >= prev);
            prev = a;
        }
    }

    #[test]
    fn invalid_config_and_dimension() {
        let acc = CovarianceAccumulator::new(0, 2, 1.0).unwrap();
        assert!(bonus(&acc, &e1(2), &BonusConfig::new(0.0, 1.0)).is_err());
        assert!(matches!(
            bonus(&acc, &e1(3), &BonusConfig::new(1.0, 1.0)),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(CovarianceAccumulator::new(0, 2, 0.0).is_err());
    }

    #[test]
    fn stats_of_empty_are_zero() {
        assert_eq!(BonusStats::from_values([]), BonusStats::default());
        let s = BonusStats::from_values([1.0, 3.0]);
        assert_eq!((s.mean, s.max, s.count), (2.0, 3.0, 2));
    }
}
