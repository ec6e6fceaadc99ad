//! Step-indexed policies over L-step windows.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{check_distribution, one_hot, uniform};
use crate::pomdp::Window;
use crate::rng::{rng_from_seed, sample_index};

#[derive(Debug, Clone, PartialEq)]
enum Rule {
    Uniform,
    Constant(Vec<f64>),
    Table(Vec<BTreeMap<Window, Vec<f64>>>),
}

/// `π_h(a | x_h)` for windows of a fixed length.
///
/// Table policies fall back to the uniform distribution for windows they do
/// not list.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPolicy {
    n_actions: usize,
    window_len: usize,
    uniform: Vec<f64>,
    rule: Rule,
}

impl WindowPolicy {
    pub fn uniform(n_actions: usize, window_len: usize) -> Self {
        assert!(n_actions > 0 && window_len > 0);
        Self {
            n_actions,
            window_len,
            uniform: uniform(n_actions),
            rule: Rule::Uniform,
        }
    }

    pub fn constant(n_actions: usize, window_len: usize, action: usize) -> Result<Self> {
        if action >= n_actions {
            return Err(Error::IndexOutOfRange(format!("action {action}")));
        }
        Ok(Self {
            rule: Rule::Constant(one_hot(n_actions, action)),
            ..Self::uniform(n_actions, window_len)
        })
    }

    /// Explicit table, one map per step.
    pub fn from_table(
        n_actions: usize,
        window_len: usize,
        steps: Vec<BTreeMap<Window, Vec<f64>>>,
    ) -> Result<Self> {
        for (h, table) in steps.iter().enumerate() {
            for (x, row) in table {
                if x.len() != window_len {
                    return Err(Error::DimensionMismatch(format!(
                        "step {h}: window {x} has length {}, policy uses {window_len}",
                        x.len()
                    )));
                }
                if row.len() != n_actions {
                    return Err(Error::DimensionMismatch(format!(
                        "step {h}: row for {x} has {} actions",
                        row.len()
                    )));
                }
                check_distribution(row, "policy", h)?;
            }
        }
        Ok(Self {
            rule: Rule::Table(steps),
            ..Self::uniform(n_actions, window_len)
        })
    }

    /// Deterministic table from chosen actions.
    pub fn deterministic(
        n_actions: usize,
        window_len: usize,
        steps: Vec<BTreeMap<Window, usize>>,
    ) -> Result<Self> {
        let table = steps
            .into_iter()
            .map(|m| {
                m.into_iter()
                    .map(|(x, a)| {
                        if a >= n_actions {
                            Err(Error::IndexOutOfRange(format!("action {a}")))
                        } else {
                            Ok((x, one_hot(n_actions, a)))
                        }
                    })
                    .collect::<Result<BTreeMap<_, _>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_table(n_actions, window_len, table)
    }

    /// Random stochastic policy with a Dirichlet(1) row for every window that
    /// can occur at each of the `horizon` steps.
    pub fn random(
        n_obs: usize,
        n_actions: usize,
        window_len: usize,
        horizon: usize,
        seed: u64,
    ) -> Self {
        let mut rng = rng_from_seed(seed);
        let steps = (0..horizon)
            .map(|h| {
                Window::enumerate(window_len, h, n_obs, n_actions)
                    .into_iter()
                    .map(|x| {
                        let mut row: Vec<f64> =
                            (0..n_actions).map(|_| Exp1.sample(&mut rng)).collect();
                        let total: f64 = row.iter().sum();
                        row.iter_mut().for_each(|p| *p /= total);
                        (x, row)
                    })
                    .collect()
            })
            .collect();
        Self {
            rule: Rule::Table(steps),
            ..Self::uniform(n_actions, window_len)
        }
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn probs(&self, h: usize, x: &Window) -> &[f64] {
        match &self.rule {
            Rule::Uniform => &self.uniform,
            Rule::Constant(row) => row,
            Rule::Table(steps) => steps
                .get(h)
                .and_then(|m| m.get(x))
                .map_or(&self.uniform, |row| row),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, h: usize, x: &Window, rng: &mut R) -> usize {
        sample_index(rng, self.probs(h, x))
    }

    /// Most probable action (smallest index on ties).
    pub fn greedy_action(&self, h: usize, x: &Window) -> usize {
        let row = self.probs(h, x);
        let mut best = 0;
        for (a, p) in row.iter().enumerate() {
            if *p > row[best] {
                best = a;
            }
        }
        best
    }

    pub fn to_text(&self) -> String {
        let (kind, steps) = match &self.rule {
            Rule::Uniform => ("uniform", Vec::new()),
            Rule::Constant(row) => ("constant", vec![StepFile {
                step: 0,
                rows: vec![RowFile {
                    window: String::new(),
                    probs: row.clone(),
                }],
            }]),
            Rule::Table(steps) => (
                "table",
                steps
                    .iter()
                    .enumerate()
                    .map(|(h, m)| StepFile {
                        step: h,
                        rows: m
                            .iter()
                            .map(|(x, row)| RowFile {
                                window: x.to_string(),
                                probs: row.clone(),
                            })
                            .collect(),
                    })
                    .collect(),
            ),
        };
        let file = PolicyFile {
            format: POLICY_FORMAT.into(),
            version: POLICY_VERSION,
            kind: kind.into(),
            n_actions: self.n_actions,
            window_len: self.window_len,
            steps,
        };
        toml::to_string(&file).expect("policy tables always serialize")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let file: PolicyFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if file.format != POLICY_FORMAT || file.version != POLICY_VERSION {
            return Err(Error::Parse(format!(
                "unsupported policy format {} v{}",
                file.format, file.version
            )));
        }
        match file.kind.as_str() {
            "uniform" => Ok(Self::uniform(file.n_actions, file.window_len)),
            "constant" => {
                let row = file
                    .steps
                    .first()
                    .and_then(|s| s.rows.first())
                    .ok_or_else(|| Error::Parse("constant policy without a row".into()))?;
                check_distribution(&row.probs, "policy", 0)?;
                Ok(Self {
                    rule: Rule::Constant(row.probs.clone()),
                    ..Self::uniform(file.n_actions, file.window_len)
                })
            }
            "table" => {
                let mut steps = Vec::new();
                for s in file.steps {
                    if s.step != steps.len() {
                        return Err(Error::Parse(format!("policy step {} out of order", s.step)));
                    }
                    let m = s
                        .rows
                        .into_iter()
                        .map(|r| Ok((r.window.parse::<Window>()?, r.probs)))
                        .collect::<Result<BTreeMap<_, _>>>()?;
                    steps.push(m);
                }
                Self::from_table(file.n_actions, file.window_len, steps)
            }
            other => Err(Error::Parse(format!("unknown policy kind {other:?}"))),
        }
    }
}

const POLICY_FORMAT: &str = "lvrep-policy";
const POLICY_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyFile {
    format: String,
    version: u32,
    kind: String,
    n_actions: usize,
    window_len: usize,
    #[serde(default)]
    steps: Vec<StepFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepFile {
    step: usize,
    rows: Vec<RowFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RowFile {
    window: String,
    probs: Vec<f64>,
}
