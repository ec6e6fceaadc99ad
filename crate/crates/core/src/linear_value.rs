//! Q-functions that are linear in the latent posterior `p(· | x, a)`.
//!
//! The learned action value is `Q̂_h(x, a) = r(o_h, a) + ⟨p(· | x, a), w_h⟩`:
//! the immediate reward is observed exactly and stays outside the inner
//! product, so `w_h` carries everything after the current step.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::latent::LatentModel;
use crate::numeric::{dot, sum, CompensatedSum};
use crate::policy::WindowPolicy;
use crate::pomdp::{
    exact_value_iteration, sample_episode, TabularPomdp, Trajectory, ValueTarget, Window,
    WindowBeliefs,
};
use crate::rng::{derive_seed, rng_from_seed, sample_index};

/// Linear value coefficients over the latent space for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub step: usize,
    pub weights: Vec<f64>,
}

impl WeightVector {
    pub fn zeros(step: usize, n_latent: usize) -> Self {
        Self {
            step,
            weights: vec![0.0; n_latent],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.weights.iter().fold(0.0, |m, w| m.max(w.abs()))
    }
}

/// An encoder row used as a regression feature, with where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub step: usize,
    pub window: Window,
    pub action: usize,
}

impl FeatureVector {
    pub fn from_model(model: &LatentModel, h: usize, x: &Window, a: usize) -> Self {
        Self {
            values: model.encode(h, x, a).probs.into_owned(),
            step: h,
            window: x.clone(),
            action: a,
        }
    }
}

/// `Σ_z p(z | x, a) w(z)`.
pub fn q_value(model: &LatentModel, w: &WeightVector, x: &Window, a: usize) -> f64 {
    dot(&model.encode(w.step, x, a).probs, &w.weights)
}

/// Monte-Carlo estimate of [`q_value`] from `n_samples` draws `z ~ p(· | x, a)`.
pub fn q_value_mc(
    model: &LatentModel,
    w: &WeightVector,
    x: &Window,
    a: usize,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be at least 1".into()));
    }
    let enc = model.encode(w.step, x, a);
    let mut rng = rng_from_seed(seed);
    let total: CompensatedSum = (0..n_samples)
        .map(|_| w.weights[sample_index(&mut rng, &enc.probs)])
        .collect();
    Ok(total.value() / n_samples as f64)
}

/// `r(o_h, a) + q_value(...)`.
pub fn action_value(
    pomdp: &TabularPomdp,
    model: &LatentModel,
    w: &WeightVector,
    x: &Window,
    a: usize,
) -> f64 {
    pomdp.reward(x.current_obs(), a) + q_value(model, w, x, a)
}

/// An L-step segment of an episode starting at step `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct LRollout {
    pub step: usize,
    pub horizon: usize,
    pub start_window: Window,
    /// `a_h … a_{h+L-1}`, cut short at the horizon.
    pub actions: Vec<usize>,
    /// `o_{h+1} … o_{h+L}`.
    pub observations: Vec<usize>,
    /// `r(o_i, a_i)` for each action in `actions`.
    pub rewards: Vec<f64>,
    /// `x_{h+L}`.
    pub end_window: Window,
    pub end_action: Option<usize>,
    /// `r(o_{h+L}, a_{h+L})`, present together with `end_action`.
    pub end_reward: Option<f64>,
}

impl LRollout {
    pub fn from_trajectory(t: &Trajectory, h: usize, len: usize) -> Self {
        let horizon = t.horizon();
        let end = (h + len).min(horizon);
        let (end_action, end_reward) = if end < horizon {
            (Some(t.actions[end]), Some(t.rewards[end]))
        } else {
            (None, None)
        };
        Self {
            step: h,
            horizon,
            start_window: t.window_at(h, len),
            actions: t.actions[h..end].to_vec(),
            observations: t.observations[h + 1..=end].to_vec(),
            rewards: t.rewards[h..end].to_vec(),
            end_window: t.window_at(end, len),
            end_action,
            end_reward,
        }
    }

    /// `Σ_{i=h}^{h+L-1} r(o_i, a_i)`.
    pub fn reward_sum(&self) -> f64 {
        sum(self.rewards.iter().copied())
    }

    pub fn end_step(&self) -> usize {
        self.step + self.actions.len()
    }

    pub fn reaches_horizon(&self) -> bool {
        self.end_step() >= self.horizon
    }

    /// Checks that replaying the recorded pairs from the start window lands
    /// on the end window.
    pub fn is_consistent(&self) -> bool {
        let replayed = self
            .actions
            .iter()
            .zip(&self.observations)
            .fold(self.start_window.clone(), |x, (a, o)| x.shift(*a, *o));
        replayed == self.end_window
    }
}

/// Regression pair for one rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct LStepTarget {
    pub feature: FeatureVector,
    /// `r(o_h, a_h)`, kept outside the inner product.
    pub reward: f64,
    /// What `⟨p(· | x_h, a_h), w_h⟩` is regressed onto:
    /// `Σ_{i=h+1}^{h+L-1} r_i + r(o_{h+L}, a_{h+L}) + ⟨p(· | x_{h+L}, a_{h+L}), w_{h+L}⟩`,
    /// truncated at the horizon.
    pub target: f64,
}

impl LStepTarget {
    /// The full L-step Bellman target `Σ_{i=h}^{h+L-1} r_i + Q̂_{h+L}`.
    pub fn bellman_target(&self) -> f64 {
        self.reward + self.target
    }
}

/// Builds regression targets from L-step rollouts that all start at the same
/// step. `w_next` is the weight vector at `h + L` (`None` reads as zero).
pub fn lstep_targets(
    rollouts: &[LRollout],
    model: &LatentModel,
    w_next: Option<&WeightVector>,
) -> Result<Vec<LStepTarget>> {
    rollouts
        .iter()
        .map(|r| {
            let reward = r.rewards.first().copied().unwrap_or(0.0);
            let mut target = r.reward_sum() - reward;
            if !r.reaches_horizon() {
                let (a, end_reward) = r
                    .end_action
                    .zip(r.end_reward)
                    .ok_or(Error::MissingEndAction { step: r.step })?;
                target += end_reward;
                if let Some(w) = w_next {
                    target += q_value(model, w, &r.end_window, a);
                }
            }
            Ok(LStepTarget {
                feature: FeatureVector::from_model(model, r.step, &r.start_window, r.actions[0]),
                reward,
                target,
            })
        })
        .collect()
}

/// Ridge least squares `argmin_w Σ (⟨w, f⟩ - t)² + ridge ‖w‖²` via the
/// normal equations and a Cholesky solve.
pub fn lspe_solve(pairs: &[(FeatureVector, f64)], ridge: f64) -> Result<WeightVector> {
    let first = pairs
        .first()
        .ok_or_else(|| Error::InvalidArgument("lspe_solve needs at least one pair".into()))?;
    if !(ridge >= 0.0) {
        return Err(Error::InvalidArgument(format!("ridge = {ridge} must be nonnegative")));
    }
    let m = first.0.values.len();
    if let Some((f, _)) = pairs.iter().find(|(f, _)| f.values.len() != m) {
        return Err(Error::DimensionMismatch(format!(
            "feature of length {} among features of length {m}",
            f.values.len()
        )));
    }
    let mut gram = vec![vec![CompensatedSum::new(); m]; m];
    let mut moment = vec![CompensatedSum::new(); m];
    for (f, t) in pairs {
        for i in 0..m {
            moment[i].add(f.values[i] * t);
            for j in 0..=i {
                gram[i][j].add(f.values[i] * f.values[j]);
            }
        }
    }
    let a = DMatrix::from_fn(m, m, |i, j| {
        let g = if j <= i { gram[i][j].value() } else { gram[j][i].value() };
        if i == j {
            g + ridge
        } else {
            g
        }
    });
    let b = DVector::from_iterator(m, moment.iter().map(CompensatedSum::value));

    let scale = a.diagonal().amax().max(f64::MIN_POSITIVE);
    let chol = a.clone().cholesky().ok_or(Error::SingularSystem)?;
    if ridge == 0.0 && chol.l_dirty().diagonal().iter().any(|d| d * d <= 1e-12 * scale) {
        return Err(Error::SingularSystem);
    }
    let mut w = chol.solve(&b);
    // one round of iterative refinement
    let residual = &b - &a * &w;
    w += chol.solve(&residual);
    Ok(WeightVector {
        step: first.0.step,
        weights: w.iter().copied().collect(),
    })
}

/// Per-step weights from least-squares evaluation plus the implied initial value.
#[derive(Debug, Clone)]
pub struct PolicyEvaluation {
    pub weights: Vec<WeightVector>,
    /// Mean over rollouts of `Σ_a π_0(a | x_0) Q̂_0(x_0, a)`.
    pub value_estimate: f64,
}

/// Least-squares policy evaluation on sampled on-policy episodes: backward
/// over `h = H-1 … 0`, each step regressing L-step targets that read the
/// already-fitted weights at `h + L`.
pub fn policy_evaluate(
    pomdp: &TabularPomdp,
    model: &LatentModel,
    policy: &WindowPolicy,
    n_rollouts: usize,
    seed: u64,
    ridge: f64,
) -> Result<PolicyEvaluation> {
    let len = policy.window_len();
    if model.window_len() != len {
        return Err(Error::DimensionMismatch(format!(
            "model windows have length {}, policy windows {len}",
            model.window_len()
        )));
    }
    if n_rollouts == 0 {
        return Err(Error::InvalidArgument("n_rollouts must be positive".into()));
    }
    let horizon = pomdp.horizon();
    if model.horizon() < horizon {
        return Err(Error::DimensionMismatch("model covers fewer steps than the horizon".into()));
    }
    let episodes: Vec<Trajectory> = (0..n_rollouts)
        .map(|i| sample_episode(pomdp, policy, derive_seed(seed, &[i as u64])))
        .collect();

    let mut weights: Vec<Option<WeightVector>> = vec![None; horizon];
    for h in (0..horizon).rev() {
        let rollouts: Vec<LRollout> = episodes
            .iter()
            .map(|t| LRollout::from_trajectory(t, h, len))
            .collect();
        let w_next = weights.get(h + len).and_then(Option::as_ref);
        let pairs: Vec<(FeatureVector, f64)> = lstep_targets(&rollouts, model, w_next)?
            .into_iter()
            .map(|t| (t.feature, t.target))
            .collect();
        weights[h] = Some(lspe_solve(&pairs, ridge)?);
    }
    let weights: Vec<WeightVector> = weights.into_iter().map(|w| w.expect("filled")).collect();

    let value_estimate = episodes
        .iter()
        .map(|t| {
            let x0 = t.window_at(0, len);
            policy
                .probs(0, &x0)
                .iter()
                .enumerate()
                .map(|(a, p)| p * action_value(pomdp, model, &weights[0], &x0, a))
                .sum::<f64>()
        })
        .collect::<CompensatedSum>()
        .value()
        / n_rollouts as f64;
    Ok(PolicyEvaluation {
        weights,
        value_estimate,
    })
}

/// Least-squares evaluation on the exhaustive dataset: one pair per encoded
/// `(x, a)` of the model, with the L-step target's exact expectation under
/// the model's own observation predictions.
pub fn exact_backup_weights(
    pomdp: &TabularPomdp,
    model: &LatentModel,
    policy: &WindowPolicy,
    ridge: f64,
) -> Result<Vec<WeightVector>> {
    let len = policy.window_len();
    let horizon = pomdp.horizon();
    let mut weights: Vec<Option<WeightVector>> = vec![None; horizon];
    for h in (0..horizon).rev() {
        let ctx = Backup {
            pomdp,
            model,
            policy,
            anchor: h + len,
            w_anchor: weights.get(h + len).and_then(Option::as_ref),
        };
        let pairs: Vec<(FeatureVector, f64)> = model
            .step(h)
            .encode_table()
            .keys()
            .map(|(x, a)| {
                (
                    FeatureVector::from_model(model, h, x, *a),
                    ctx.continuation(h, x, *a),
                )
            })
            .collect();
        weights[h] = Some(if pairs.is_empty() {
            WeightVector::zeros(h, model.n_latent())
        } else {
            lspe_solve(&pairs, ridge)?
        });
    }
    Ok(weights.into_iter().map(|w| w.expect("filled")).collect())
}

struct Backup<'a> {
    pomdp: &'a TabularPomdp,
    model: &'a LatentModel,
    policy: &'a WindowPolicy,
    anchor: usize,
    w_anchor: Option<&'a WeightVector>,
}

impl Backup<'_> {
    /// Expected value after taking `a` at `(j, x)`, excluding `r(o_j, a)`.
    fn continuation(&self, j: usize, x: &Window, a: usize) -> f64 {
        let next = j + 1;
        if next >= self.pomdp.horizon() {
            return 0.0;
        }
        let probs = self.model.predicted_obs_prob(j, x, a);
        sum(probs.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(o, p)| {
            let x_next = x.shift(a, o);
            let v = sum(self.policy.probs(next, &x_next).iter().enumerate().map(|(b, pb)| {
                let tail = if next == self.anchor {
                    self.w_anchor.map_or(0.0, |w| q_value(self.model, w, &x_next, b))
                } else {
                    self.continuation(next, &x_next, b)
                };
                pb * (self.pomdp.reward(o, b) + tail)
            }));
            p * v
        }))
    }
}

/// Outcome of checking that `Q^π_h - r` is linear in the exact feature.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentabilityReport {
    pub step: usize,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub n_points: usize,
    pub weights: WeightVector,
}

/// Brute-force representability check for every step of a fixture.
pub struct RepresentabilityCheck<'a> {
    pomdp: &'a TabularPomdp,
    beliefs: WindowBeliefs,
    q: Vec<std::collections::BTreeMap<(Window, usize), f64>>,
}

/// Belief spread above which a window is treated as not decoding the state.
pub const DECODABLE_TOL: f64 = 1e-9;

impl<'a> RepresentabilityCheck<'a> {
    pub fn new(pomdp: &'a TabularPomdp, policy: &WindowPolicy, budget: usize) -> Result<Self> {
        let len = policy.window_len();
        let exact = exact_value_iteration(pomdp, ValueTarget::Policy(policy), budget)?;
        let beliefs = WindowBeliefs::from_tree(exact.tree(), len);
        Ok(Self {
            pomdp,
            q: exact.q_by_window(len),
            beliefs,
        })
    }

    pub fn beliefs(&self) -> &WindowBeliefs {
        &self.beliefs
    }

    /// Regresses `Q^π_h(x, a) - r(o_h, a)` on
    /// `f(s' | x, a) = Σ_s b(s | x) P(s' | s, a)` over every reachable
    /// `(x, a)` and reports the residuals.
    pub fn step(&self, h: usize) -> Result<RepresentabilityReport> {
        let horizon = self.pomdp.horizon();
        for t in h..horizon {
            let gap = self.beliefs.gap(t);
            if gap > DECODABLE_TOL {
                return Err(Error::NotDecodable { gap, step: t });
            }
        }
        self.residuals(h)
    }

    /// The same regression without the decodability guard; on windows that
    /// do not decode the state the feature is a reach-weighted average and
    /// small residuals are not guaranteed.
    pub fn residuals(&self, h: usize) -> Result<RepresentabilityReport> {
        let horizon = self.pomdp.horizon();
        if h >= horizon {
            return Err(Error::IndexOutOfRange(format!("step {h} (horizon {horizon})")));
        }
        let n_states = self.pomdp.n_states();
        let mut features = Vec::new();
        let mut targets = Vec::new();
        for (x, wb) in self.beliefs.step(h) {
            for a in 0..self.pomdp.n_actions() {
                features.push(self.pomdp.predict_states(&wb.belief, a)?);
                targets.push(self.q[h][&(x.clone(), a)] - self.pomdp.reward(x.current_obs(), a));
            }
        }
        let n = features.len();
        let design = DMatrix::from_fn(n, n_states, |i, j| features[i][j]);
        let rhs = DVector::from_vec(targets.clone());
        let svd = design.clone().svd(true, true);
        let w = svd.solve(&rhs, 1e-12).map_err(|_| Error::SingularSystem)?;
        let fitted = &design * &w;
        let residuals: Vec<f64> = fitted.iter().zip(&targets).map(|(f, t)| (f - t).abs()).collect();
        Ok(RepresentabilityReport {
            step: h,
            max_residual: residuals.iter().fold(0.0, |m, r| m.max(*r)),
            mean_residual: sum(residuals.iter().copied()) / n as f64,
            n_points: n,
            weights: WeightVector {
                step: h,
                weights: w.iter().copied().collect(),
            },
        })
    }
}

/// Checks linear representability of `Q^π_h` at one step.
pub fn verify_linear_representability(
    pomdp: &TabularPomdp,
    policy: &WindowPolicy,
    h: usize,
    budget: usize,
) -> Result<RepresentabilityReport> {
    RepresentabilityCheck::new(pomdp, policy, budget)?.step(h)
}
