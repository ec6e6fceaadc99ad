use std::borrow::Cow;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{TransitionDataset, TransitionRecord};
use crate::error::{Error, Result};
use crate::numeric::{check_distribution, check_shape, l1_distance, normalize, sum, uniform};
use crate::pomdp::{TabularPomdp, Window, WindowBeliefs};

/// Encoder and decoder tables for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepModel {
    encode: BTreeMap<(Window, usize), Vec<f64>>,
    decode: Vec<Vec<f64>>,
}

impl StepModel {
    pub fn new(encode: BTreeMap<(Window, usize), Vec<f64>>, decode: Vec<Vec<f64>>) -> Self {
        Self { encode, decode }
    }

    pub fn encode_table(&self) -> &BTreeMap<(Window, usize), Vec<f64>> {
        &self.encode
    }

    pub fn decode_table(&self) -> &[Vec<f64>] {
        &self.decode
    }
}

/// Encoder row for a query; `seen` is false when the model has no entry for
/// `(x, a)` and the uniform distribution over latents was substituted.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodeRow<'a> {
    pub probs: Cow<'a, [f64]>,
    pub seen: bool,
}

/// Step-indexed latent-variable model
/// `p_h(o' | x, a) = Σ_z p_h(z | x, a) p_h(o' | z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentModel {
    n_latent: usize,
    n_obs: usize,
    n_actions: usize,
    window_len: usize,
    uniform: Vec<f64>,
    steps: Vec<StepModel>,
}

impl LatentModel {
    pub fn new(
        n_latent: usize,
        n_obs: usize,
        n_actions: usize,
        window_len: usize,
        steps: Vec<StepModel>,
    ) -> Result<Self> {
        if n_latent == 0 || n_obs == 0 || n_actions == 0 || window_len == 0 {
            return Err(Error::InvalidArgument("model sizes must be positive".into()));
        }
        for (h, step) in steps.iter().enumerate() {
            check_shape(&step.decode, n_latent, n_obs, "decode")?;
            for (z, row) in step.decode.iter().enumerate() {
                check_distribution(row, "decode", z)?;
            }
            for (i, ((x, a), row)) in step.encode.iter().enumerate() {
                if x.len() != window_len || *a >= n_actions || row.len() != n_latent {
                    return Err(Error::DimensionMismatch(format!(
                        "step {h}: encode entry ({x}, {a}) does not fit the model"
                    )));
                }
                check_distribution(row, "encode", i)?;
            }
        }
        Ok(Self {
            n_latent,
            n_obs,
            n_actions,
            window_len,
            uniform: uniform(n_latent),
            steps,
        })
    }

    /// The factorization induced by a fixture with the latent taken to be the
    /// next state: `p(s' | x, a) = Σ_s b(s | x) P(s' | s, a)` and
    /// `p(o' | s') = O(o' | s')`, with `b(· | x)` the exact window belief.
    /// Exact whenever the fixture is decodable at this window length.
    pub fn from_pomdp(pomdp: &TabularPomdp, window_len: usize, budget: usize) -> Result<Self> {
        let horizon = pomdp.horizon();
        let beliefs = WindowBeliefs::build(pomdp, window_len, horizon - 1, budget)?;
        let decode: Vec<Vec<f64>> = (0..pomdp.n_states()).map(|s| pomdp.emit(s).to_vec()).collect();
        let steps = (0..horizon)
            .map(|h| {
                let mut encode = BTreeMap::new();
                for (x, wb) in beliefs.step(h) {
                    for a in 0..pomdp.n_actions() {
                        let b = wb.belief.probs();
                        let row: Vec<f64> = (0..pomdp.n_states())
                            .map(|next| sum((0..pomdp.n_states()).map(|s| b[s] * pomdp.trans(s, a)[next])))
                            .collect();
                        encode.insert((x.clone(), a), row);
                    }
                }
                StepModel::new(encode, decode.clone())
            })
            .collect();
        Self::new(pomdp.n_states(), pomdp.n_obs(), pomdp.n_actions(), window_len, steps)
    }

    pub fn n_latent(&self) -> usize {
        self.n_latent
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    /// Number of steps the model covers.
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn step(&self, h: usize) -> &StepModel {
        &self.steps[h]
    }

    pub fn encode(&self, h: usize, x: &Window, a: usize) -> EncodeRow<'_> {
        match self.steps[h].encode.get(&(x.clone(), a)) {
            Some(row) => EncodeRow {
                probs: Cow::Borrowed(row),
                seen: true,
            },
            None => EncodeRow {
                probs: Cow::Borrowed(&self.uniform),
                seen: false,
            },
        }
    }

    pub fn decode(&self, h: usize, z: usize) -> &[f64] {
        &self.steps[h].decode[z]
    }

    /// `Σ_z p(z | x, a) p(o' | z)` for every `o'`.
    pub fn predicted_obs_prob(&self, h: usize, x: &Window, a: usize) -> Vec<f64> {
        let enc = self.encode(h, x, a);
        let decode = &self.steps[h].decode;
        (0..self.n_obs)
            .map(|o| sum(enc.probs.iter().zip(decode).map(|(p, row)| p * row[o])))
            .collect()
    }

    pub fn log_marginal(&self, h: usize, x: &Window, a: usize, o_next: usize) -> f64 {
        self.predicted_obs_prob(h, x, a)[o_next].ln()
    }

    /// `p(z | x, a, o') ∝ p(z | x, a) p(o' | z)`.
    pub fn exact_posterior(&self, h: usize, x: &Window, a: usize, o_next: usize) -> Result<Vec<f64>> {
        if o_next >= self.n_obs {
            return Err(Error::IndexOutOfRange(format!("observation {o_next}")));
        }
        let enc = self.encode(h, x, a);
        let mut post: Vec<f64> = enc
            .probs
            .iter()
            .zip(&self.steps[h].decode)
            .map(|(p, row)| p * row[o_next])
            .collect();
        let normalizer = sum(post.iter().copied());
        normalize(&mut post).ok_or(Error::ZeroProbabilityObservation {
            obs: o_next,
            normalizer,
        })?;
        Ok(post)
    }

    /// The same model with latent `z` renamed to `perm[z]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.n_latent];
        if perm.len() != self.n_latent || perm.iter().any(|&p| p >= self.n_latent || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidArgument("not a permutation of the latent space".into()));
        }
        let permute = |row: &[f64]| {
            let mut out = vec![0.0; row.len()];
            for (z, p) in row.iter().enumerate() {
                out[perm[z]] = *p;
            }
            out
        };
        let steps = self
            .steps
            .iter()
            .map(|s| {
                let encode = s.encode.iter().map(|(k, row)| (k.clone(), permute(row))).collect();
                let mut decode = vec![Vec::new(); self.n_latent];
                for (z, row) in s.decode.iter().enumerate() {
                    decode[perm[z]] = row.clone();
                }
                StepModel::new(encode, decode)
            })
            .collect();
        Self::new(self.n_latent, self.n_obs, self.n_actions, self.window_len, steps)
    }

    pub fn to_text(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            n_latent: self.n_latent,
            n_obs: self.n_obs,
            n_actions: self.n_actions,
            window_len: self.window_len,
            steps: self
                .steps
                .iter()
                .enumerate()
                .map(|(h, s)| StepFile {
                    step: h,
                    decode: s.decode.clone(),
                    encode: s
                        .encode
                        .iter()
                        .map(|((x, a), probs)| EncodeFile {
                            window: x.to_string(),
                            action: *a,
                            probs: probs.clone(),
                        })
                        .collect(),
                })
                .collect(),
        };
        toml::to_string(&file).expect("model tables always serialize")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let file: ModelFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::Parse(format!(
                "unsupported model format {} v{}",
                file.format, file.version
            )));
        }
        let mut steps = Vec::with_capacity(file.steps.len());
        for s in file.steps {
            if s.step != steps.len() {
                return Err(Error::Parse(format!("model step {} out of order", s.step)));
            }
            let encode = s
                .encode
                .into_iter()
                .map(|e| Ok(((e.window.parse::<Window>()?, e.action), e.probs)))
                .collect::<Result<BTreeMap<_, _>>>()?;
            steps.push(StepModel::new(encode, s.decode));
        }
        Self::new(file.n_latent, file.n_obs, file.n_actions, file.window_len, steps)
    }
}

const MODEL_FORMAT: &str = "lvrep-model";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    n_latent: usize,
    n_obs: usize,
    n_actions: usize,
    window_len: usize,
    steps: Vec<StepFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepFile {
    step: usize,
    decode: Vec<Vec<f64>>,
    encode: Vec<EncodeFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EncodeFile {
    window: String,
    action: usize,
    probs: Vec<f64>,
}

/// Variational posterior table `q(z | x, a, o')`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VariationalPosterior {
    rows: BTreeMap<(Window, usize, usize), Vec<f64>>,
}

impl VariationalPosterior {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, x: Window, a: usize, o_next: usize, row: Vec<f64>) -> Result<()> {
        check_distribution(&row, "posterior", self.rows.len())?;
        self.rows.insert((x, a, o_next), row);
        Ok(())
    }

    pub fn row(&self, x: &Window, a: usize, o_next: usize) -> Option<&[f64]> {
        self.rows.get(&(x.clone(), a, o_next)).map(Vec::as_slice)
    }

    /// The exact posterior of `model` for every record in a dataset.
    pub fn exact(model: &LatentModel, dataset: &TransitionDataset) -> Result<Self> {
        let mut q = Self::new();
        for r in dataset.records() {
            let row = model.exact_posterior(dataset.step(), &r.window, r.action, r.next_obs)?;
            q.rows.insert((r.window.clone(), r.action, r.next_obs), row);
        }
        Ok(q)
    }
}

/// `E_q[log p(o' | z)] - KL(q ‖ p(· | x, a))` for one record and an explicit
/// posterior row.
pub fn elbo_with_row(model: &LatentModel, h: usize, record: &TransitionRecord, q: &[f64]) -> f64 {
    let enc = model.encode(h, &record.window, record.action);
    let decode = &model.steps[h].decode;
    sum(q.iter().enumerate().filter(|(_, qz)| **qz > 0.0).map(|(z, qz)| {
        qz * (decode[z][record.next_obs].ln() - (qz.ln() - enc.probs[z].ln()))
    }))
}

/// ELBO of a record under the posterior table `q`.
pub fn elbo(
    model: &LatentModel,
    q: &VariationalPosterior,
    h: usize,
    record: &TransitionRecord,
) -> Result<f64> {
    let row = q
        .row(&record.window, record.action, record.next_obs)
        .ok_or_else(|| Error::InvalidArgument(format!("no posterior row for ({}, {}, {})", record.window, record.action, record.next_obs)))?;
    if row.len() != model.n_latent() {
        return Err(Error::DimensionMismatch("posterior row length".into()));
    }
    Ok(elbo_with_row(model, h, record, row))
}

/// Weighted average of `‖p̂_h(· | x, a) - P(· | b(x), a)‖_1²` over a weighting
/// of `(x, a)` pairs, using exact window beliefs from `beliefs`.
pub fn model_tv_error(
    model: &LatentModel,
    pomdp: &TabularPomdp,
    beliefs: &WindowBeliefs,
    h: usize,
    weighting: &[((Window, usize), f64)],
) -> Result<f64> {
    let total = sum(weighting.iter().map(|(_, w)| *w));
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("weighting has no mass".into()));
    }
    let mut acc = Vec::with_capacity(weighting.len());
    for ((x, a), w) in weighting {
        let wb = beliefs
            .get(h, x)
            .ok_or_else(|| Error::InvalidArgument(format!("window {x} is unreachable at step {h}")))?;
        let truth = pomdp.obs_prob(&wb.belief, *a)?;
        let pred = model.predicted_obs_prob(h, x, *a);
        acc.push(w * l1_distance(&truth, &pred).powi(2));
    }
    Ok(sum(acc) / total)
}
