use super::TabularPomdp;
use crate::error::{Error, Result};
use crate::numeric::{check_distribution, dot, normalize, one_hot, sum};

/// Posterior distribution over latent states given the history so far.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefVector(Vec<f64>);

impl BeliefVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_distribution(&probs, "belief", 0)?;
        Ok(Self(probs))
    }

    pub fn dirac(n_states: usize, state: usize) -> Self {
        Self(one_hot(n_states, state))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TabularPomdp {
    /// Bayes posterior over `s_0` after seeing the first observation.
    pub fn belief_init(&self, o0: usize) -> Result<BeliefVector> {
        self.check_obs(o0)?;
        let mut post: Vec<f64> = (0..self.n_states())
            .map(|s| self.rho0()[s] * self.emit(s)[o0])
            .collect();
        let normalizer = sum(post.iter().copied());
        normalize(&mut post).ok_or(Error::ZeroProbabilityObservation { obs: o0, normalizer })?;
        Ok(BeliefVector(post))
    }

    /// State distribution after acting, before the next observation.
    pub fn predict_states(&self, b: &BeliefVector, a: usize) -> Result<Vec<f64>> {
        self.check_belief(b)?;
        self.check_action(a)?;
        Ok((0..self.n_states())
            .map(|next| {
                sum((0..self.n_states()).map(|s| b.0[s] * self.trans(s, a)[next]))
            })
            .collect())
    }

    /// One-step predicted observation distribution `P(o' | b, a)`.
    pub fn obs_prob(&self, b: &BeliefVector, a: usize) -> Result<Vec<f64>> {
        let pushed = self.predict_states(b, a)?;
        Ok((0..self.n_obs())
            .map(|o| sum((0..self.n_states()).map(|s| pushed[s] * self.emit(s)[o])))
            .collect())
    }

    /// Belief recursion: push `b` through `a`, weight by the likelihood of
    /// `o_next`, renormalize.
    pub fn belief_update(&self, b: &BeliefVector, a: usize, o_next: usize) -> Result<BeliefVector> {
        self.check_obs(o_next)?;
        let pushed = self.predict_states(b, a)?;
        let mut post: Vec<f64> = pushed
            .iter()
            .enumerate()
            .map(|(s, p)| p * self.emit(s)[o_next])
            .collect();
        let normalizer = sum(post.iter().copied());
        normalize(&mut post).ok_or(Error::ZeroProbabilityObservation {
            obs: o_next,
            normalizer,
        })?;
        Ok(BeliefVector(post))
    }

    /// Marginal probability of the first observation.
    pub fn initial_obs_prob(&self) -> Vec<f64> {
        (0..self.n_obs())
            .map(|o| {
                let col: Vec<f64> = (0..self.n_states()).map(|s| self.emit(s)[o]).collect();
                dot(self.rho0(), &col)
            })
            .collect()
    }

    fn check_belief(&self, b: &BeliefVector) -> Result<()> {
        if b.0.len() != self.n_states() {
            return Err(Error::DimensionMismatch(format!(
                "belief has {} entries, fixture has {} states",
                b.0.len(),
                self.n_states()
            )));
        }
        Ok(())
    }
}
