//! Ground-truth oracles for checking the estimators: Monte Carlo and
//! truncated exact enumeration of test errors, Hudson's identity, the
//! Jensen gap, the bias-variance decomposition of the CB estimator, and the
//! right-hand sides of its bias and variance bounds.
//!
//! The per-coordinate losses here are written out directly rather than
//! through the estimator code, so the two can be checked against each other.

mod bounds;
mod decomp;
mod support;
mod truth;

pub use bounds::{bound_rhs, BoundConfig, BoundKind, BoundValue};
pub use decomp::{bias_variance_decomp, DecompConfig, DecompositionReport};
pub use support::{poisson_support, PoissonSupport, ProductSupport, DEFAULT_DEFICIT};
pub use truth::{
    enum_truth, hudson_check, jensen_gap, mc_truth, mc_truth_multi, HudsonReport, OracleMethod,
    TruthEstimate, TruthMethod,
};

use crate::loss::{LossKind, LossSpec};

/// `D(a, b)` for a single coordinate, `b` already padded.
pub(crate) fn coord_loss(loss: &LossSpec, a: f64, b: f64) -> f64 {
    match loss.kind {
        LossKind::Squared => (a - b) * (a - b),
        LossKind::Deviance => {
            if a == 0.0 {
                2.0 * b
            } else {
                2.0 * (a * (a / b).ln() - a + b)
            }
        }
    }
}

pub(crate) fn coord_phi(loss: &LossSpec, x: f64) -> f64 {
    match loss.kind {
        LossKind::Squared => x * x,
        LossKind::Deviance => {
            if x == 0.0 {
                0.0
            } else {
                2.0 * x * (x.ln() - 1.0)
            }
        }
    }
}

pub(crate) fn coord_grad(loss: &LossSpec, b: f64) -> f64 {
    match loss.kind {
        LossKind::Squared => 2.0 * b,
        LossKind::Deviance => 2.0 * b.ln(),
    }
}

/// Running per-coordinate sums for means and variances.
#[derive(Debug, Clone)]
pub(crate) struct Moments {
    pub count: f64,
    pub sum: Vec<f64>,
    pub sumsq: Vec<f64>,
}

impl Moments {
    pub fn new(len: usize) -> Self {
        Self {
            count: 0.0,
            sum: vec![0.0; len],
            sumsq: vec![0.0; len],
        }
    }

    pub fn push(&mut self, values: &[f64]) {
        self.count += 1.0;
        for ((s, q), v) in self.sum.iter_mut().zip(&mut self.sumsq).zip(values) {
            *s += v;
            *q += v * v;
        }
    }

    pub fn merge(&mut self, other: &Moments) {
        self.count += other.count;
        for i in 0..self.sum.len() {
            self.sum[i] += other.sum[i];
            self.sumsq[i] += other.sumsq[i];
        }
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.sum[i] / self.count
    }

    pub fn mean_sq(&self, i: usize) -> f64 {
        self.sumsq[i] / self.count
    }

    /// Unbiased sample variance.
    pub fn var(&self, i: usize) -> f64 {
        let m = self.mean(i);
        ((self.sumsq[i] - self.count * m * m) / (self.count - 1.0)).max(0.0)
    }
}
