use rayon::prelude::*;

use super::truth::{mc_truth, TruthEstimate};
use crate::error::{Error, Result};
use crate::estimators::{cb_estimate, FitAlgorithm};
use crate::loss::LossSpec;
use crate::rng::{derive_seed, poisson_vector, stream, Domain};
use crate::types::{CountVector, MeanVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompConfig {
    pub p: f64,
    pub b: usize,
    /// Number of data draws `Y`.
    pub r_outer: usize,
    /// Independent CB evaluations per data draw.
    pub r_inner: usize,
    /// Draws for the Monte Carlo value of `Err(g)`.
    pub truth_draws: usize,
    pub seed: u64,
}

impl DecompConfig {
    pub fn new(p: f64, b: usize, r_outer: usize, r_inner: usize, seed: u64) -> Self {
        Self {
            p,
            b,
            r_outer,
            r_inner,
            truth_draws: 10_000,
            seed,
        }
    }
}

/// Squared-error decomposition of `CB_p(g)` around `Err(g)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport {
    pub bias_sq: f64,
    /// `E[Var(CB_p | Y)]`.
    pub reducible_var: f64,
    pub reducible_var_se: f64,
    /// `Var(E[CB_p | Y])`, corrected for the finite number of inner draws.
    pub irreducible_var: f64,
    /// Mean of `(CB_p − Err(g))²` over every evaluation.
    pub total_mse: f64,
    pub mean_estimate: f64,
    pub truth: TruthEstimate,
    pub config: DecompConfig,
}

/// Estimates the three terms of the decomposition by nested simulation.
pub fn bias_variance_decomp<G: FitAlgorithm + ?Sized>(
    mu: &MeanVector,
    g: &G,
    loss: &LossSpec,
    cfg: &DecompConfig,
) -> Result<DecompositionReport> {
    if cfg.r_outer < 2 || cfg.r_inner < 2 {
        return Err(Error::param(
            "R",
            "need at least two outer and two inner draws",
        ));
    }
    let truth = mc_truth(
        mu,
        g,
        loss,
        0.0,
        cfg.truth_draws.max(2),
        derive_seed(cfg.seed, Domain::Truth, 0),
    )?;
    let per_outer = (0..cfg.r_outer)
        .into_par_iter()
        .map(|o| {
            let y = CountVector::new(poisson_vector(
                mu,
                &mut stream(cfg.seed, Domain::Data, o as u64),
            ))?;
            let outer_seed = derive_seed(cfg.seed, Domain::Oracle, o as u64);
            (0..cfg.r_inner)
                .map(|j| {
                    Ok(cb_estimate(
                        &y,
                        g,
                        loss,
                        cfg.p,
                        cfg.b,
                        derive_seed(outer_seed, Domain::Bootstrap, j as u64),
                    )?
                    .value)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;

    let ri = cfg.r_inner as f64;
    let ro = cfg.r_outer as f64;
    let mut cond_means = Vec::with_capacity(cfg.r_outer);
    let mut cond_vars = Vec::with_capacity(cfg.r_outer);
    let mut sq_err = 0.0;
    for vals in &per_outer {
        let m = vals.iter().sum::<f64>() / ri;
        cond_vars.push(vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (ri - 1.0));
        cond_means.push(m);
        sq_err += vals
            .iter()
            .map(|v| (v - truth.value) * (v - truth.value))
            .sum::<f64>();
    }
    let grand = cond_means.iter().sum::<f64>() / ro;
    let reducible_var = cond_vars.iter().sum::<f64>() / ro;
    let rv_sd = (cond_vars
        .iter()
        .map(|v| (v - reducible_var).powi(2))
        .sum::<f64>()
        / (ro - 1.0))
        .sqrt();
    let spread = cond_means
        .iter()
        .map(|m| (m - grand) * (m - grand))
        .sum::<f64>()
        / (ro - 1.0);
    // each conditional mean carries Var(CB | Y)/R_inner of inner noise
    let irreducible_var = (spread - reducible_var / ri).max(0.0);
    Ok(DecompositionReport {
        bias_sq: (grand - truth.value).powi(2),
        reducible_var,
        reducible_var_se: rv_sd / ro.sqrt(),
        irreducible_var,
        total_mse: sq_err / (ro * ri),
        mean_estimate: grand,
        truth,
        config: *cfg,
    })
}
