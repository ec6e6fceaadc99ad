//! Exhaustive history-tree oracles.

use std::collections::BTreeMap;

use super::{BeliefVector, TabularPomdp, Window};
use crate::error::{Error, Result};
use crate::numeric::{total_variation, CompensatedSum, DEGENERATE};
use crate::policy::WindowPolicy;

pub const DEFAULT_NODE_BUDGET: usize = 10_000_000;

/// A child edge of a history node: action taken, observation received, and
/// `P(o' | b, a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub action: usize,
    pub obs: usize,
    pub prob: f64,
    pub child: usize,
}

/// One action-observation prefix `o_0 a_0 … o_h` with its exact belief.
/// `reach_prob` is the probability of the prefix when every action is drawn
/// uniformly at random.
#[derive(Debug, Clone)]
pub struct HistoryNode {
    pub obs: Vec<usize>,
    pub acts: Vec<usize>,
    pub belief: BeliefVector,
    pub reach_prob: f64,
    pub branches: Vec<Branch>,
}

impl HistoryNode {
    pub fn depth(&self) -> usize {
        self.acts.len()
    }

    pub fn window(&self, len: usize) -> Window {
        Window::from_history(&self.obs, &self.acts, len)
    }

    pub fn current_obs(&self) -> usize {
        self.obs[self.obs.len() - 1]
    }
}

/// All positive-probability histories up to a depth, level by level.
#[derive(Debug, Clone)]
pub struct HistoryTree {
    levels: Vec<Vec<HistoryNode>>,
    n_actions: usize,
}

impl HistoryTree {
    pub fn build(pomdp: &TabularPomdp, max_depth: usize, budget: usize) -> Result<Self> {
        let n_actions = pomdp.n_actions();
        let mut root = Vec::new();
        for (o, p) in pomdp.initial_obs_prob().into_iter().enumerate() {
            if p > DEGENERATE {
                root.push(HistoryNode {
                    obs: vec![o],
                    acts: Vec::new(),
                    belief: pomdp.belief_init(o)?,
                    reach_prob: p,
                    branches: Vec::new(),
                });
            }
        }
        let mut count = root.len();
        let mut levels = vec![root];
        for _ in 0..max_depth {
            let parents = levels.last_mut().expect("at least the root level");
            let mut next = Vec::new();
            for node in parents.iter_mut() {
                for a in 0..n_actions {
                    let probs = pomdp.obs_prob(&node.belief, a)?;
                    for (o, p) in probs.into_iter().enumerate() {
                        if p <= DEGENERATE {
                            continue;
                        }
                        count += 1;
                        if count > budget {
                            return Err(Error::BudgetExceeded { budget });
                        }
                        let mut obs = node.obs.clone();
                        obs.push(o);
                        let mut acts = node.acts.clone();
                        acts.push(a);
                        node.branches.push(Branch {
                            action: a,
                            obs: o,
                            prob: p,
                            child: next.len(),
                        });
                        next.push(HistoryNode {
                            obs,
                            acts,
                            belief: pomdp.belief_update(&node.belief, a, o)?,
                            reach_prob: node.reach_prob * p / n_actions as f64,
                            branches: Vec::new(),
                        });
                    }
                }
            }
            levels.push(next);
        }
        Ok(Self { levels, n_actions })
    }

    pub fn max_depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, h: usize) -> &[HistoryNode] {
        &self.levels[h]
    }

    pub fn node_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
}

/// What [`exact_value_iteration`] evaluates.
#[derive(Debug, Clone, Copy)]
pub enum ValueTarget<'a> {
    Policy(&'a WindowPolicy),
    Optimal,
}

/// Exact values over the full history tree.
#[derive(Debug, Clone)]
pub struct ExactValues {
    tree: HistoryTree,
    /// `q[h][node][a]`
    q: Vec<Vec<Vec<f64>>>,
    v: Vec<Vec<f64>>,
    /// Probability of each node under the evaluated policy (policy targets only).
    policy_reach: Option<Vec<Vec<f64>>>,
    value: f64,
}

/// Exact `v^π` (or `v*`) by backward induction over every history.
pub fn exact_value_iteration(
    pomdp: &TabularPomdp,
    target: ValueTarget<'_>,
    budget: usize,
) -> Result<ExactValues> {
    let horizon = pomdp.horizon();
    let tree = HistoryTree::build(pomdp, horizon - 1, budget)?;
    let n_actions = pomdp.n_actions();
    let mut q: Vec<Vec<Vec<f64>>> = vec![Vec::new(); horizon];
    let mut v: Vec<Vec<f64>> = vec![Vec::new(); horizon];
    for h in (0..horizon).rev() {
        let level = tree.level(h);
        let mut q_level = Vec::with_capacity(level.len());
        let mut v_level = Vec::with_capacity(level.len());
        for node in level {
            let o = node.current_obs();
            let mut cont = vec![CompensatedSum::new(); n_actions];
            for br in &node.branches {
                cont[br.action].add(br.prob * v[h + 1][br.child]);
            }
            let qs: Vec<f64> = (0..n_actions)
                .map(|a| pomdp.reward(o, a) + cont[a].value())
                .collect();
            let value = match target {
                ValueTarget::Optimal => qs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                ValueTarget::Policy(pi) => {
                    let probs = pi.probs(h, &node.window(pi.window_len()));
                    probs.iter().zip(&qs).map(|(p, q)| p * q).collect::<CompensatedSum>().value()
                }
            };
            q_level.push(qs);
            v_level.push(value);
        }
        q[h] = q_level;
        v[h] = v_level;
    }
    let value = tree
        .level(0)
        .iter()
        .zip(&v[0])
        .map(|(n, v)| n.reach_prob * v)
        .collect::<CompensatedSum>()
        .value();

    let policy_reach = match target {
        ValueTarget::Optimal => None,
        ValueTarget::Policy(pi) => {
            let mut reach: Vec<Vec<f64>> = vec![tree.level(0).iter().map(|n| n.reach_prob).collect()];
            for h in 0..horizon - 1 {
                let mut next = vec![0.0; tree.level(h + 1).len()];
                for (node, r) in tree.level(h).iter().zip(&reach[h]) {
                    let probs = pi.probs(h, &node.window(pi.window_len()));
                    for br in &node.branches {
                        next[br.child] = r * probs[br.action] * br.prob;
                    }
                }
                reach.push(next);
            }
            Some(reach)
        }
    };

    Ok(ExactValues {
        tree,
        q,
        v,
        policy_reach,
        value,
    })
}

impl ExactValues {
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn tree(&self) -> &HistoryTree {
        &self.tree
    }

    /// `Q_h(τ, a)` for the `node`-th history at depth `h`.
    pub fn history_q(&self, h: usize, node: usize) -> &[f64] {
        &self.q[h][node]
    }

    pub fn history_v(&self, h: usize, node: usize) -> f64 {
        self.v[h][node]
    }

    /// `Q_h(x, a)` per window: the average of the history values sharing the
    /// window, weighted by their probability under the evaluated policy, or
    /// under uniformly random actions when the policy never reaches the
    /// window (and for optimal targets).
    pub fn q_by_window(&self, len: usize) -> Vec<BTreeMap<(Window, usize), f64>> {
        let n_actions = self.tree.n_actions();
        (0..self.q.len())
            .map(|h| {
                let mut groups: BTreeMap<Window, Vec<usize>> = BTreeMap::new();
                for (i, node) in self.tree.level(h).iter().enumerate() {
                    groups.entry(node.window(len)).or_default().push(i);
                }
                let mut out = BTreeMap::new();
                for (x, members) in groups {
                    let policy_weights: Option<Vec<f64>> = self
                        .policy_reach
                        .as_ref()
                        .map(|r| members.iter().map(|i| r[h][*i]).collect())
                        .filter(|w: &Vec<f64>| w.iter().sum::<f64>() > 0.0);
                    let weights = policy_weights.unwrap_or_else(|| {
                        members
                            .iter()
                            .map(|i| self.tree.level(h)[*i].reach_prob)
                            .collect()
                    });
                    let total: f64 = weights.iter().sum();
                    for a in 0..n_actions {
                        let q = members
                            .iter()
                            .zip(&weights)
                            .map(|(i, w)| w * self.q[h][*i][a])
                            .collect::<CompensatedSum>()
                            .value();
                        out.insert((x.clone(), a), q / total);
                    }
                }
                out
            })
            .collect()
    }
}

/// Beliefs grouped by `(step, window)`.
#[derive(Debug, Clone)]
pub struct WindowBeliefs {
    window_len: usize,
    steps: Vec<BTreeMap<Window, WindowBelief>>,
}

#[derive(Debug, Clone)]
pub struct WindowBelief {
    /// Reach-weighted average of the beliefs of all histories in the group.
    pub belief: BeliefVector,
    /// Total uniform-action reach probability of the group.
    pub reach: f64,
    /// Largest total-variation distance between two beliefs in the group.
    pub gap: f64,
}

impl WindowBeliefs {
    pub fn build(pomdp: &TabularPomdp, len: usize, max_depth: usize, budget: usize) -> Result<Self> {
        let tree = HistoryTree::build(pomdp, max_depth, budget)?;
        Ok(Self::from_tree(&tree, len))
    }

    pub fn from_tree(tree: &HistoryTree, len: usize) -> Self {
        let steps = (0..=tree.max_depth())
            .map(|h| {
                let mut groups: BTreeMap<Window, Vec<&HistoryNode>> = BTreeMap::new();
                for node in tree.level(h) {
                    groups.entry(node.window(len)).or_default().push(node);
                }
                groups
                    .into_iter()
                    .map(|(x, nodes)| (x, summarize(&nodes)))
                    .collect()
            })
            .collect();
        Self {
            window_len: len,
            steps,
        }
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn max_depth(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn get(&self, h: usize, x: &Window) -> Option<&WindowBelief> {
        self.steps.get(h).and_then(|m| m.get(x))
    }

    pub fn step(&self, h: usize) -> &BTreeMap<Window, WindowBelief> {
        &self.steps[h]
    }

    pub fn gap(&self, h: usize) -> f64 {
        self.steps[h].values().map(|g| g.gap).fold(0.0, f64::max)
    }

    pub fn max_gap(&self) -> f64 {
        (0..self.steps.len()).map(|h| self.gap(h)).fold(0.0, f64::max)
    }
}

fn summarize(nodes: &[&HistoryNode]) -> WindowBelief {
    let n_states = nodes[0].belief.probs().len();
    let reach: f64 = nodes.iter().map(|n| n.reach_prob).sum();
    let mut mean = vec![0.0; n_states];
    for n in nodes {
        for (m, p) in mean.iter_mut().zip(n.belief.probs()) {
            *m += n.reach_prob * p / reach;
        }
    }
    let total: f64 = mean.iter().sum();
    mean.iter_mut().for_each(|m| *m /= total);

    // distinct beliefs only; equal beliefs reached by different arithmetic
    // differ by rounding noise well below 1e-12
    let mut distinct: BTreeMap<Vec<i64>, &[f64]> = BTreeMap::new();
    for n in nodes {
        let key = n.belief.probs().iter().map(|p| (p * 1e12).round() as i64).collect();
        distinct.entry(key).or_insert(n.belief.probs());
    }
    let rows: Vec<&[f64]> = distinct.into_values().collect();
    let mut gap: f64 = 0.0;
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            gap = gap.max(total_variation(rows[i], rows[j]));
        }
    }
    WindowBelief {
        belief: BeliefVector::new(mean).expect("averaged beliefs stay normalized"),
        reach,
        gap,
    }
}

/// Largest total-variation spread of exact beliefs that share a window of
/// length `len`, over all histories of depth at most `max_depth`. Zero
/// certifies L-decodability up to that depth.
pub fn decodability_gap(
    pomdp: &TabularPomdp,
    len: usize,
    max_depth: usize,
    budget: usize,
) -> Result<f64> {
    Ok(WindowBeliefs::build(pomdp, len, max_depth, budget)?.max_gap())
}
