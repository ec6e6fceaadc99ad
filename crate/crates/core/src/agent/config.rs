use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exploration::{BonusConfig, BonusMode, ScheduleConfig, DEFAULT_CAP};
use crate::latent::FitConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSettings {
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_floor")]
    pub floor_prob: f64,
}

fn default_max_iters() -> usize {
    200
}

fn default_tol() -> f64 {
    1e-7
}

fn default_floor() -> f64 {
    1e-6
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            max_iters: default_max_iters(),
            tol: default_tol(),
            floor_prob: default_floor(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BonusSettings {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "yes")]
    pub truncate: bool,
    #[serde(default = "default_cap")]
    pub cap: f64,
    #[serde(default = "one")]
    pub c_alpha: f64,
    #[serde(default = "one")]
    pub c_lambda: f64,
}

fn yes() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

fn default_cap() -> f64 {
    DEFAULT_CAP
}

impl Default for BonusSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            truncate: true,
            cap: DEFAULT_CAP,
            c_alpha: 1.0,
            c_lambda: 1.0,
        }
    }
}

impl BonusSettings {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn schedule(&self) -> ScheduleConfig {
        ScheduleConfig {
            c_alpha: self.c_alpha,
            c_lambda: self.c_lambda,
        }
    }

    pub fn bonus_config(&self, alpha: f64, lambda: f64, mode: BonusMode) -> BonusConfig {
        BonusConfig {
            alpha,
            lambda,
            truncate: self.truncate,
            cap: self.cap,
            mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerConfig {
    /// Largest number of padded windows, summed over steps, the planner enumerates.
    #[serde(default = "default_window_budget")]
    pub window_budget: usize,
}

fn default_window_budget() -> usize {
    1_000_000
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            window_budget: default_window_budget(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub window_len: usize,
    pub n_latent: usize,
    pub episodes: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub fit: FitSettings,
    #[serde(default)]
    pub bonus: BonusSettings,
    #[serde(default)]
    pub planner: PlannerConfig,
    /// Log the model's prediction error against the exact oracle each episode.
    #[serde(default)]
    pub track_model_tv: bool,
}

impl AgentConfig {
    pub fn new(window_len: usize, n_latent: usize, episodes: usize, seed: u64) -> Self {
        Self {
            window_len,
            n_latent,
            episodes,
            seed,
            fit: FitSettings::default(),
            bonus: BonusSettings::default(),
            planner: PlannerConfig::default(),
            track_model_tv: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len == 0 {
            return Err(Error::InvalidArgument("window_len must be at least 1".into()));
        }
        if self.episodes == 0 {
            return Err(Error::InvalidArgument("episodes must be at least 1".into()));
        }
        self.fit_config(0).validate()?;
        let b = &self.bonus;
        for (name, v) in [("cap", b.cap), ("c_alpha", b.c_alpha), ("c_lambda", b.c_lambda)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("bonus.{name} = {v} must be positive")));
            }
        }
        if self.planner.window_budget == 0 {
            return Err(Error::InvalidArgument("planner.window_budget must be positive".into()));
        }
        Ok(())
    }

    pub fn fit_config(&self, seed: u64) -> FitConfig {
        FitConfig {
            n_latent: self.n_latent,
            max_iters: self.fit.max_iters,
            tol: self.fit.tol,
            floor_prob: self.fit.floor_prob,
            seed,
        }
    }
}
