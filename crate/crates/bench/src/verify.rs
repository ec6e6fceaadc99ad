//! Decodability gaps and representability residuals for one fixture and policy.

use std::fmt::Write as _;
use std::str::FromStr;

use lvrep::linear_value::{RepresentabilityCheck, DECODABLE_TOL};
use lvrep::{TabularPomdp, WindowPolicy};
use serde::{Deserialize, Serialize};

use crate::error::{read, BenchError, Result};
use crate::table::{to_csv, RESIDUAL_SCHEMA};

#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    Uniform,
    Constant(usize),
    Random(u64),
    File(std::path::PathBuf),
}

impl FromStr for PolicySpec {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |what: &str| BenchError::Config(format!("invalid policy `{s}`: {what}"));
        match s.split_once(':') {
            None if s == "uniform" => Ok(PolicySpec::Uniform),
            Some(("constant", a)) => a.parse().map(PolicySpec::Constant).map_err(|_| bad("action")),
            Some(("random", seed)) => seed.parse().map(PolicySpec::Random).map_err(|_| bad("seed")),
            _ if s.ends_with(".toml") || s.contains('/') => Ok(PolicySpec::File(s.into())),
            _ => Err(bad("expected uniform, constant:A, random:SEED or a .toml path")),
        }
    }
}

impl PolicySpec {
    pub fn build(&self, pomdp: &TabularPomdp, window: usize) -> Result<WindowPolicy> {
        let policy = match self {
            PolicySpec::Uniform => WindowPolicy::uniform(pomdp.n_actions(), window),
            PolicySpec::Constant(a) => WindowPolicy::constant(pomdp.n_actions(), window, *a)?,
            PolicySpec::Random(seed) => {
                WindowPolicy::random(pomdp.n_obs(), pomdp.n_actions(), window, pomdp.horizon(), *seed)
            }
            PolicySpec::File(path) => WindowPolicy::from_text(&read(path)?)?,
        };
        if policy.window_len() != window || policy.n_actions() != pomdp.n_actions() {
            return Err(BenchError::Config(format!(
                "policy has window {} and {} actions; fixture needs window {window} and {} actions",
                policy.window_len(),
                policy.n_actions(),
                pomdp.n_actions()
            )));
        }
        Ok(policy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerifyRow {
    pub step: usize,
    pub gap: f64,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub rows: Vec<VerifyRow>,
    pub threshold: f64,
}

impl VerifyReport {
    pub fn decodable(&self) -> bool {
        self.rows.iter().all(|r| r.gap <= DECODABLE_TOL)
    }

    pub fn residuals_ok(&self) -> bool {
        self.rows.iter().all(|r| r.max_residual <= self.threshold)
    }

    /// Residuals must pass; in strict mode the fixture must also be decodable.
    pub fn passed(&self, strict: bool) -> bool {
        self.residuals_ok() && (!strict || self.decodable())
    }

    pub fn render(&self) -> String {
        let mut s = String::from("step  gap          maxResidual  meanResidual  points\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<5} {:<12.3e} {:<12.3e} {:<13.3e} {}",
                r.step, r.gap, r.max_residual, r.mean_residual, r.n_points
            );
        }
        let _ = writeln!(
            s,
            "decodable: {}\nresiduals <= {:e}: {}",
            if self.decodable() { "yes" } else { "no" },
            self.threshold,
            if self.residuals_ok() { "yes" } else { "no" }
        );
        s
    }

    pub fn csv(&self) -> Result<String> {
        to_csv(RESIDUAL_SCHEMA, &self.rows)
    }
}

pub fn run_verify(
    pomdp: &TabularPomdp,
    policy: &WindowPolicy,
    threshold: f64,
    budget: usize,
) -> Result<VerifyReport> {
    let check = RepresentabilityCheck::new(pomdp, policy, budget)?;
    let rows = (0..pomdp.horizon())
        .map(|h| {
            let r = check.residuals(h)?;
            Ok(VerifyRow {
                step: h,
                gap: check.beliefs().gap(h),
                max_residual: r.max_residual,
                mean_residual: r.mean_residual,
                n_points: r.n_points,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VerifyReport { rows, threshold })
}
