//! Log-link Poisson regression by iteratively reweighted least squares.

use nalgebra::{DMatrix, DVector};

use super::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::estimators::FitAlgorithm;

const MAX_ITER: usize = 100;
const BETA_TOL: f64 = 1e-8;
const MAX_HALVINGS: usize = 30;
const ETA_CAP: f64 = 700.0;
const WEIGHT_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GlmFit {
    pub beta: Vec<f64>,
    pub means: Vec<f64>,
    pub deviance: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `2 Σ (y log(y/μ) − (y − μ))`.
pub(crate) fn poisson_deviance(y: &[u64], mu: &[f64]) -> f64 {
    y.iter()
        .zip(mu)
        .map(|(&yi, &m)| {
            let yi = yi as f64;
            let log_term = if yi > 0.0 { yi * (yi / m).ln() } else { 0.0 };
            2.0 * (log_term - (yi - m))
        })
        .sum()
}

fn means_of(x: &DesignMatrix, beta: &[f64]) -> Vec<f64> {
    x.mul_vec(beta)
        .into_iter()
        .map(|eta| eta.min(ETA_CAP).exp())
        .collect()
}

/// Solves the weighted least-squares problem `min Σ wᵢ (zᵢ − xᵢᵀβ)²`.
fn weighted_ls(x: &DesignMatrix, w: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    let d = x.cols();
    let mut xtwx = DMatrix::<f64>::zeros(d, d);
    let mut xtwz = DVector::<f64>::zeros(d);
    for r in 0..x.rows() {
        let row = x.row(r);
        let wr = w[r];
        for a in 0..d {
            let wa = wr * row[a];
            xtwz[a] += wa * z[r];
            for b in a..d {
                xtwx[(a, b)] += wa * row[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            xtwx[(a, b)] = xtwx[(b, a)];
        }
    }
    let chol = xtwx.cholesky().ok_or(Error::Singular)?;
    Ok(chol.solve(&xtwz).iter().copied().collect())
}

/// Maximum-likelihood Poisson regression with log link.
///
/// Iterates until the largest coefficient change is below `1e-8` or 100
/// iterations have run; each step is halved while the deviance increases.
/// The caller supplies any intercept column.
pub fn poisson_irls(x: &DesignMatrix, y: &[u64]) -> Result<GlmFit> {
    let (n, d) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: n,
        });
    }
    if n < d {
        return Err(Error::param(
            "X",
            format!("needs at least as many rows as columns ({n} < {d})"),
        ));
    }
    // start from a weighted fit of log(y + 0.1)
    let start_mu: Vec<f64> = y.iter().map(|&v| v as f64 + 0.1).collect();
    let start_z: Vec<f64> = start_mu.iter().map(|m| m.ln()).collect();
    let mut beta = weighted_ls(x, &start_mu, &start_z)?;
    let mut mu = means_of(x, &beta);
    let mut deviance = poisson_deviance(y, &mu);
    for iter in 1..=MAX_ITER {
        let eta = x.mul_vec(&beta);
        let w: Vec<f64> = mu.iter().map(|m| m.max(WEIGHT_FLOOR)).collect();
        let z: Vec<f64> = (0..n)
            .map(|i| eta[i] + (y[i] as f64 - mu[i]) / w[i])
            .collect();
        let target = weighted_ls(x, &w, &z)?;
        let mut step = 1.0;
        let mut candidate = target.clone();
        let mut cand_mu = means_of(x, &candidate);
        let mut cand_dev = poisson_deviance(y, &cand_mu);
        let mut halvings = 0;
        while !(cand_dev <= deviance * (1.0 + 1e-12) + 1e-12) && halvings < MAX_HALVINGS {
            step *= 0.5;
            candidate = beta
                .iter()
                .zip(&target)
                .map(|(b, t)| b + step * (t - b))
                .collect();
            cand_mu = means_of(x, &candidate);
            cand_dev = poisson_deviance(y, &cand_mu);
            halvings += 1;
        }
        let change = beta
            .iter()
            .zip(&candidate)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        beta = candidate;
        mu = cand_mu;
        deviance = cand_dev;
        if change < BETA_TOL {
            return Ok(GlmFit {
                beta,
                means: mu,
                deviance,
                iterations: iter,
                converged: true,
            });
        }
    }
    Ok(GlmFit {
        beta,
        means: mu,
        deviance,
        iterations: MAX_ITER,
        converged: false,
    })
}

/// Poisson regression on a fixed design as a mean estimator.
///
/// If the weighted normal equations become singular the fit falls back to
/// the sample mean.
#[derive(Debug, Clone)]
pub struct PoissonGlm {
    pub x: DesignMatrix,
}

impl PoissonGlm {
    /// Uses `x` with an intercept column prepended.
    pub fn with_intercept(x: &DesignMatrix) -> Self {
        Self {
            x: x.with_intercept(),
        }
    }
}

impl FitAlgorithm for PoissonGlm {
    fn name(&self) -> String {
        "poisson_glm".into()
    }

    fn fit(&self, y: &[u64]) -> Vec<f64> {
        match poisson_irls(&self.x, y) {
            Ok(fit) => fit.means,
            Err(_) => {
                let mean = y.iter().sum::<u64>() as f64 / y.len() as f64;
                vec![mean; y.len()]
            }
        }
    }
}
