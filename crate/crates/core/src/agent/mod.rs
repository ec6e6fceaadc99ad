//! Online exploration and offline pessimistic learning over the fitted
//! latent model, with an exact dynamic-programming planner.

mod collect;
mod config;
mod evaluate;
mod offline;
mod online;
mod planner;

pub use collect::{collect_rollout, Datasets, RolloutRecords};
pub use config::{AgentConfig, BonusSettings, FitSettings, PlannerConfig};
pub use evaluate::{evaluate_policy, Evaluation};
pub use offline::{collect_offline, run_offline, OfflineResult};
pub use online::{accumulate_covariances, run_online, run_online_observed, EpisodeLog, OnlineRun};
pub use planner::{enumerate_windows, plan, BonusTable, Plan, Shaping, TIE_TOL};
