use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{check_distribution, check_shape};

/// A finite POMDP with stationary dynamics and observation-action rewards.
///
/// Tables are dense: `trans[s][a]` is a distribution over next states,
/// `emit[s]` a distribution over observations, `reward[o][a]` the reward for
/// taking `a` at observation `o`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPomdp {
    n_states: usize,
    n_actions: usize,
    n_obs: usize,
    horizon: usize,
    rho0: Vec<f64>,
    trans: Vec<Vec<Vec<f64>>>,
    emit: Vec<Vec<f64>>,
    reward: Vec<Vec<f64>>,
}

/// On-disk layout of a fixture file.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PomdpFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    version: Option<u32>,
    states: usize,
    actions: usize,
    observations: usize,
    horizon: usize,
    rho0: Vec<f64>,
    trans: Vec<Vec<Vec<f64>>>,
    emit: Vec<Vec<f64>>,
    reward: Vec<Vec<f64>>,
}

const FILE_VERSION: u32 = 1;

impl TabularPomdp {
    pub fn new(
        horizon: usize,
        rho0: Vec<f64>,
        trans: Vec<Vec<Vec<f64>>>,
        emit: Vec<Vec<f64>>,
        reward: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n_states = rho0.len();
        let n_actions = trans.first().map_or(0, Vec::len);
        let n_obs = emit.first().map_or(0, Vec::len);
        if n_states == 0 || n_actions == 0 || n_obs == 0 || horizon == 0 {
            return Err(Error::InvalidArgument(
                "states, actions, observations and horizon must be positive".into(),
            ));
        }
        check_distribution(&rho0, "rho0", 0)?;
        if trans.len() != n_states {
            return Err(Error::DimensionMismatch(format!(
                "trans: expected {n_states} states, found {}",
                trans.len()
            )));
        }
        for (s, per_action) in trans.iter().enumerate() {
            check_shape(per_action, n_actions, n_states, "trans")?;
            for (a, row) in per_action.iter().enumerate() {
                check_distribution(row, "trans", s * n_actions + a)?;
            }
        }
        check_shape(&emit, n_states, n_obs, "emit")?;
        for (s, row) in emit.iter().enumerate() {
            check_distribution(row, "emit", s)?;
        }
        check_shape(&reward, n_obs, n_actions, "reward")?;
        for (o, row) in reward.iter().enumerate() {
            for (a, &value) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::RewardOutOfRange {
                        obs: o,
                        action: a,
                        value,
                    });
                }
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            n_obs,
            horizon,
            rho0,
            trans,
            emit,
            reward,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn rho0(&self) -> &[f64] {
        &self.rho0
    }

    pub fn trans(&self, s: usize, a: usize) -> &[f64] {
        &self.trans[s][a]
    }

    pub fn emit(&self, s: usize) -> &[f64] {
        &self.emit[s]
    }

    pub fn reward(&self, o: usize, a: usize) -> f64 {
        self.reward[o][a]
    }

    /// The full `O × A` reward table.
    pub fn reward_table(&self) -> &[Vec<f64>] {
        &self.reward
    }

    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        Ok(Self {
            horizon,
            ..self.clone()
        })
    }

    /// Same dynamics, reward identically zero.
    pub fn with_zero_reward(&self) -> Self {
        Self {
            reward: vec![vec![0.0; self.n_actions]; self.n_obs],
            ..self.clone()
        }
    }

    pub(crate) fn check_action(&self, a: usize) -> Result<()> {
        if a >= self.n_actions {
            return Err(Error::IndexOutOfRange(format!(
                "action {a} (|A| = {})",
                self.n_actions
            )));
        }
        Ok(())
    }

    pub(crate) fn check_obs(&self, o: usize) -> Result<()> {
        if o >= self.n_obs {
            return Err(Error::IndexOutOfRange(format!(
                "observation {o} (|O| = {})",
                self.n_obs
            )));
        }
        Ok(())
    }

    /// Parses the structured text fixture format.
    pub fn from_text(text: &str) -> Result<Self> {
        let file: PomdpFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if let Some(v) = file.version {
            if v != FILE_VERSION {
                return Err(Error::Parse(format!("unsupported fixture version {v}")));
            }
        }
        let pomdp = Self::new(file.horizon, file.rho0, file.trans, file.emit, file.reward)?;
        if pomdp.n_states != file.states
            || pomdp.n_actions != file.actions
            || pomdp.n_obs != file.observations
        {
            return Err(Error::DimensionMismatch(format!(
                "declared sizes ({}, {}, {}) disagree with the tables ({}, {}, {})",
                file.states,
                file.actions,
                file.observations,
                pomdp.n_states,
                pomdp.n_actions,
                pomdp.n_obs
            )));
        }
        Ok(pomdp)
    }

    pub fn to_text(&self) -> String {
        let file = PomdpFile {
            version: Some(FILE_VERSION),
            states: self.n_states,
            actions: self.n_actions,
            observations: self.n_obs,
            horizon: self.horizon,
            rho0: self.rho0.clone(),
            trans: self.trans.clone(),
            emit: self.emit.clone(),
            reward: self.reward.clone(),
        };
        toml::to_string(&file).expect("fixture tables always serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unnormalized_rows() {
        let err = TabularPomdp::new(
            2,
            vec![0.5, 0.6],
            vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]],
            vec![vec![1.0], vec![1.0]],
            vec![vec![0.0]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidDistribution { what: "rho0", .. }));
    }

    #[test]
    fn rejects_rewards_outside_unit_interval() {
        let err = TabularPomdp::new(
            1,
            vec![1.0],
            vec![vec![vec![1.0]]],
            vec![vec![1.0]],
            vec![vec![1.5]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::RewardOutOfRange { .. }));
    }

    #[test]
    fn text_round_trip_preserves_tables() {
        let p = TabularPomdp::flip(0.8, 3).unwrap();
        let back = TabularPomdp::from_text(&p.to_text()).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn text_rejects_unknown_keys() {
        let mut text = TabularPomdp::flip(1.0, 2).unwrap().to_text();
        text.push_str("discount = 0.9\n");
        assert!(matches!(
            TabularPomdp::from_text(&text),
            Err(Error::Parse(_))
        ));
    }
}
