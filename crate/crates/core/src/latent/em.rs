//! Exact EM for the per-step mixture `Σ_z p(z | x, a) p(o' | z)`.
//!
//! The E-step sets `q` to the exact posterior, which makes the ELBO tight;
//! the M-step re-estimates encoder rows per distinct `(x, a)` and decoder rows
//! pooled over the step, both under the probability floor.

use rand_distr::{Distribution, Exp1};

use super::{LatentModel, StepModel, TransitionDataset};
use crate::error::{Error, Result};
use crate::numeric::{floor_normalize, sum, CompensatedSum};
use crate::pomdp::Window;
use crate::rng::{derive_seed, rng_from_seed, SeededRng};

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub n_latent: usize,
    pub max_iters: usize,
    /// Stop once an iteration improves the log-likelihood by less than this.
    pub tol: f64,
    /// Lower bound on every fitted probability.
    pub floor_prob: f64,
    pub seed: u64,
}

impl FitConfig {
    pub fn new(n_latent: usize) -> Self {
        Self {
            n_latent,
            max_iters: 200,
            tol: 1e-7,
            floor_prob: 1e-6,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_latent == 0 {
            return Err(Error::InvalidArgument("n_latent must be positive".into()));
        }
        if !(self.tol >= 0.0) || !(self.floor_prob >= 0.0) {
            return Err(Error::InvalidArgument("tol and floor_prob must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Result of fitting one step.
#[derive(Debug, Clone)]
pub struct StepFit {
    pub model: StepModel,
    /// Dataset log-likelihood at initialization and after every iteration.
    pub log_likelihood: Vec<f64>,
}

struct Groups {
    keys: Vec<(Window, usize)>,
    counts: Vec<Vec<f64>>,
}

fn dirichlet_row(rng: &mut SeededRng, n: usize, floor: f64) -> Vec<f64> {
    let draws: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    floor_normalize(&draws, floor)
}

fn log_likelihood(groups: &Groups, enc: &[Vec<f64>], dec: &[Vec<f64>]) -> f64 {
    let mut total = CompensatedSum::new();
    for (g, counts) in groups.counts.iter().enumerate() {
        for (o, c) in counts.iter().enumerate() {
            if *c > 0.0 {
                let marginal = sum(enc[g].iter().zip(dec).map(|(p, row)| p * row[o]));
                total.add(c * marginal.ln());
            }
        }
    }
    total.value()
}

/// Runs EM on one step's dataset.
pub fn fit_step(dataset: &TransitionDataset, cfg: &FitConfig, seed: u64) -> Result<StepFit> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset {
            step: dataset.step(),
        });
    }
    let m = cfg.n_latent;
    let n_obs = dataset.n_obs();
    let (keys, counts) = dataset.counts().into_iter().unzip();
    let groups = Groups { keys, counts };

    let mut rng = rng_from_seed(seed);
    let mut enc: Vec<Vec<f64>> = (0..groups.keys.len())
        .map(|_| dirichlet_row(&mut rng, m, cfg.floor_prob))
        .collect();
    let mut dec: Vec<Vec<f64>> = (0..m)
        .map(|_| dirichlet_row(&mut rng, n_obs, cfg.floor_prob))
        .collect();

    let mut trace = vec![log_likelihood(&groups, &enc, &dec)];
    for _ in 0..cfg.max_iters {
        let mut dec_acc = vec![vec![CompensatedSum::new(); n_obs]; m];
        let mut next_enc = Vec::with_capacity(enc.len());
        for (g, counts) in groups.counts.iter().enumerate() {
            let mut enc_acc = vec![CompensatedSum::new(); m];
            for (o, c) in counts.iter().enumerate() {
                if *c == 0.0 {
                    continue;
                }
                let joint: Vec<f64> = (0..m).map(|z| enc[g][z] * dec[z][o]).collect();
                let marginal = sum(joint.iter().copied());
                for z in 0..m {
                    let r = c * joint[z] / marginal;
                    enc_acc[z].add(r);
                    dec_acc[z][o].add(r);
                }
            }
            let weights: Vec<f64> = enc_acc.iter().map(CompensatedSum::value).collect();
            next_enc.push(floor_normalize(&weights, cfg.floor_prob));
        }
        enc = next_enc;
        dec = dec_acc
            .iter()
            .map(|row| {
                let weights: Vec<f64> = row.iter().map(CompensatedSum::value).collect();
                floor_normalize(&weights, cfg.floor_prob)
            })
            .collect();
        let ll = log_likelihood(&groups, &enc, &dec);
        let gain = ll - trace[trace.len() - 1];
        trace.push(ll);
        if gain < cfg.tol {
            break;
        }
    }

    let encode = groups.keys.into_iter().zip(enc).collect();
    Ok(StepFit {
        model: StepModel::new(encode, dec),
        log_likelihood: trace,
    })
}

fn check_datasets(datasets: &[TransitionDataset]) -> Result<()> {
    let first = datasets
        .first()
        .ok_or_else(|| Error::InvalidArgument("no datasets to fit".into()))?;
    for (h, d) in datasets.iter().enumerate() {
        if d.step() != h {
            return Err(Error::InvalidArgument(format!(
                "dataset {h} is labelled with step {}",
                d.step()
            )));
        }
        if d.window_len() != first.window_len()
            || d.n_obs() != first.n_obs()
            || d.n_actions() != first.n_actions()
        {
            return Err(Error::DimensionMismatch("datasets do not share a shape".into()));
        }
    }
    Ok(())
}

/// Fits a model with one step per dataset and returns the per-step
/// log-likelihood traces.
pub fn fit_mle_traced(
    datasets: &[TransitionDataset],
    cfg: &FitConfig,
) -> Result<(LatentModel, Vec<Vec<f64>>)> {
    check_datasets(datasets)?;
    let mut steps = Vec::with_capacity(datasets.len());
    let mut traces = Vec::with_capacity(datasets.len());
    for (h, d) in datasets.iter().enumerate() {
        let fit = fit_step(d, cfg, derive_seed(cfg.seed, &[h as u64]))?;
        steps.push(fit.model);
        traces.push(fit.log_likelihood);
    }
    let first = &datasets[0];
    let model = LatentModel::new(
        cfg.n_latent,
        first.n_obs(),
        first.n_actions(),
        first.window_len(),
        steps,
    )?;
    Ok((model, traces))
}

/// Maximum-likelihood latent model, one step per dataset.
pub fn fit_mle(datasets: &[TransitionDataset], cfg: &FitConfig) -> Result<LatentModel> {
    fit_mle_traced(datasets, cfg).map(|(m, _)| m)
}

/// `Σ log p̂_h(o' | x, a)` over a dataset.
pub fn dataset_log_likelihood(model: &LatentModel, dataset: &TransitionDataset) -> f64 {
    dataset
        .records()
        .iter()
        .map(|r| model.log_marginal(dataset.step(), &r.window, r.action, r.next_obs))
        .collect::<CompensatedSum>()
        .value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::TransitionRecord;

    fn dataset_from(records: &[(&str, usize, usize)], n_obs: usize) -> TransitionDataset {
        let mut d = TransitionDataset::new(0, 1, n_obs, 2);
        for (x, a, o) in records {
            d.push(TransitionRecord {
                window: x.parse().unwrap(),
                action: *a,
                next_obs: *o,
            })
            .unwrap();
        }
        d
    }

    #[test]
    fn single_latent_recovers_empirical_frequencies() {
        let d = dataset_from(
            &[("0", 0, 0), ("0", 0, 1), ("1", 1, 2), ("0", 1, 2), ("1", 0, 1), ("1", 0, 1)],
            3,
        );
        let model = fit_mle(&[d], &FitConfig::new(1)).unwrap();
        let expected = [1.0 / 6.0, 3.0 / 6.0, 2.0 / 6.0];
        for (p, e) in model.decode(0, 0).iter().zip(expected) {
            assert!((p - e).abs() < 1e-12, "{p} vs {e}");
        }
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let d = TransitionDataset::new(0, 1, 2, 2);
        assert_eq!(
            fit_mle(&[d], &FitConfig::new(2)).unwrap_err(),
            Error::EmptyDataset { step: 0 }
        );
    }

    #[test]
    fn likelihood_never_decreases() {
        let d = dataset_from(
            &[("0", 0, 0), ("0", 0, 1), ("0", 1, 1), ("1", 1, 0), ("1", 0, 1), ("1", 0, 0), ("1", 1, 0)],
            2,
        );
        let cfg = FitConfig {
            tol: 0.0,
            max_iters: 300,
            ..FitConfig::new(3)
        };
        let fit = fit_step(&d, &cfg, 5).unwrap();
        for pair in fit.log_likelihood.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-9, "{pair:?}");
        }
    }

    #[test]
    fn fitted_rows_respect_floor() {
        let d = dataset_from(&[("0", 0, 0), ("0", 0, 0), ("1", 0, 1)], 2);
        let cfg = FitConfig {
            floor_prob: 1e-3,
            ..FitConfig::new(2)
        };
        let model = fit_mle(&[d], &cfg).unwrap();
        let step = model.step(0);
        for row in step.encode_table().values().chain(step.decode_table()) {
            assert!(row.iter().all(|p| *p >= 1e-3 - 1e-15));
        }
    }
}
