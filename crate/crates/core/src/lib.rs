//! Latent-variable representation learning for L-step decodable POMDPs.
//!
//! The crate covers the full loop on small tabular problems:
//!
//! - [`pomdp`]: fixtures, exact beliefs, simulation, windows, brute-force oracles
//! - [`latent`]: the factorized model `p_h(z | x, a)`, `p_h(o' | z)`, its ELBO, and EM fitting
//! - [`linear_value`]: Q-functions linear in `p(· | x, a)` and least-squares evaluation
//! - [`exploration`]: elliptical bonuses and penalties over latent features
//! - [`agent`]: online exploration, offline pessimistic learning, and the planner

pub mod agent;
pub mod error;
pub mod exploration;
pub mod latent;
pub mod linear_value;
pub mod numeric;
pub mod policy;
pub mod pomdp;
pub mod rng;

pub use error::{Error, Result};
pub use policy::WindowPolicy;
pub use pomdp::{BeliefVector, TabularPomdp, Trajectory, Window};
