//! The learned representation: per step, an encoder `p_h(z | x, a)` and a
//! decoder `p_h(o' | z)` over a finite latent space, with ELBO evaluation and
//! maximum-likelihood fitting by EM.

mod dataset;
mod em;
mod model;

pub use dataset::{TransitionDataset, TransitionRecord};
pub use em::{dataset_log_likelihood, fit_mle, fit_mle_traced, fit_step, FitConfig, StepFit};
pub use model::{
    elbo, elbo_with_row, model_tv_error, EncodeRow, LatentModel, StepModel, VariationalPosterior,
};
