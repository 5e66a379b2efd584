//! Test-error estimation for the Poisson means problem.
//!
//! Given counts `Y ~ Pois(μ)` and a fitting algorithm `g`, the crate
//! estimates the test error `E D(Ỹ, g(Y))` under squared loss or Poisson
//! deviance with two estimators:
//!
//! * the coupled bootstrap ([`cb_estimate`]), built on binomial thinning
//!   and unbiased for the error at the shrunken mean `(1−p)μ`;
//! * the unbiased estimator ([`ue_estimate`]) from Hudson's identity, which
//!   refits `g` on `Y − eᵢ` for every nonzero coordinate.
//!
//! [`zoo`] holds the fitting algorithms used in the experiments and
//! [`oracle`] the exact and Monte Carlo ground truths used to test them.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod loss;
pub mod oracle;
pub mod rng;
pub mod thinning;
pub mod types;
pub mod zoo;

pub use error::{Error, Result};
pub use estimators::{
    cb_estimate, cb_from_draws, cb_from_draws_multi, cb_infinite_exact, cb_replicate_value,
    choose_p, illdef_probability, mean_and_se, ue_estimate, ue_estimate_multi, ue_on_subset,
    ue_sampled, ue_sampled_multi, ErrorEstimate, EstimateConfig, FitAlgorithm, FnFit, Method,
};
pub use loss::{
    deviance_loss, pad_fit, phi_and_grad, squared_loss, LossKind, LossSpec, DEFAULT_PAD,
};
pub use thinning::{
    beta_split_exponential, beta_split_with, binomial_thin, draw_coupled_bootstrap, BootstrapDraws,
    CoupledPair,
};
pub use types::{CountVector, MeanVector};
