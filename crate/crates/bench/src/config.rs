use std::collections::BTreeSet;
use std::path::PathBuf;

use lvrep::agent::{AgentConfig, BonusSettings, FitSettings, PlannerConfig};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::fixture::FixtureSpec;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    BonusOn,
    BonusOff,
    Uniform,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::BonusOn => "bonus_on",
            Variant::BonusOff => "bonus_off",
            Variant::Uniform => "uniform",
        }
    }
}

/// Agent settings without a seed; seeds come from the repetition list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    pub window_len: usize,
    pub n_latent: usize,
    pub episodes: usize,
    #[serde(default)]
    pub fit: FitSettings,
    #[serde(default)]
    pub bonus: BonusSettings,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub track_model_tv: bool,
}

impl AgentSection {
    pub fn agent_config(&self, variant: Variant, seed: u64) -> AgentConfig {
        let mut bonus = self.bonus.clone();
        if variant == Variant::BonusOff {
            bonus.enabled = false;
        }
        AgentConfig {
            window_len: self.window_len,
            n_latent: self.n_latent,
            episodes: self.episodes,
            seed,
            fit: self.fit.clone(),
            bonus,
            planner: self.planner.clone(),
            track_model_tv: self.track_model_tv,
        }
    }
}

fn default_variants() -> Vec<Variant> {
    vec![Variant::BonusOn, Variant::BonusOff, Variant::Uniform]
}

fn default_eval_episodes() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub fixture: String,
    pub seeds: Vec<u64>,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Episodes used to evaluate each run's final policy.
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    pub agent: AgentSection,
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn fixture_spec(&self) -> Result<FixtureSpec> {
        self.fixture.parse()
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(BenchError::Config(format!(
                "unsupported version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.fixture_spec()?;
        if self.seeds.is_empty() {
            return Err(BenchError::Config("`seeds` is empty".into()));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(BenchError::Config("`seeds` has duplicates".into()));
        }
        if self.variants.is_empty() {
            return Err(BenchError::Config("`variants` is empty".into()));
        }
        if self.variants.iter().collect::<BTreeSet<_>>().len() != self.variants.len() {
            return Err(BenchError::Config("`variants` has duplicates".into()));
        }
        self.agent
            .agent_config(Variant::BonusOn, 0)
            .validate()
            .map_err(|e| BenchError::Config(format!("agent: {e}")))?;
        Ok(())
    }
}
