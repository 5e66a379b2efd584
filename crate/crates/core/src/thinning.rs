//! Binomial splitting of Poisson counts into coupled training/test vectors.
//!
//! Given `Y ~ Pois(μ)` and `ω | Y ~ Binom(Y, p)`, the vectors
//! `Y* = Y − ω` and `Y† = (1 − p)/p · ω` are independent, share the mean
//! `(1 − p)μ`, and `Y* ~ Pois((1 − p)μ)`.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{self, Domain};
use crate::types::CountVector;

/// One synthetic training/test split of the data.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPair {
    pub y_star: Vec<u64>,
    pub y_dagger: Vec<f64>,
    pub omega: Vec<u64>,
}

impl CoupledPair {
    /// Builds the pair from a given thinning draw `omega ≤ y`.
    pub fn from_omega(y: &[u64], omega: Vec<u64>, p: f64) -> Result<Self> {
        check_p(p)?;
        if y.len() != omega.len() {
            return Err(Error::LengthMismatch {
                left: y.len(),
                right: omega.len(),
            });
        }
        if let Some(i) = (0..y.len()).find(|&i| omega[i] > y[i]) {
            return Err(Error::param(
                "omega",
                format!("entry {i} exceeds the count ({} > {})", omega[i], y[i]),
            ));
        }
        let scale = (1.0 - p) / p;
        Ok(Self {
            y_star: y.iter().zip(&omega).map(|(a, w)| a - w).collect(),
            y_dagger: omega.iter().map(|&w| scale * w as f64).collect(),
            omega,
        })
    }
}

/// `B` coupled pairs drawn from the same data vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapDraws {
    pub pairs: Vec<CoupledPair>,
    pub p: f64,
    pub seed: u64,
}

impl BootstrapDraws {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

pub(crate) fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::param("p", format!("must lie in (0, 1), got {p}")));
    }
    Ok(())
}

/// Draws `ωᵢ ~ Binom(yᵢ, p)` coordinate by coordinate.
///
/// `rand_distr`'s sampler uses inversion while `yᵢ·min(p, 1 − p) < 10` and
/// BTPE rejection above that, so large image counts stay cheap.
pub fn binomial_thin<R: Rng + ?Sized>(y: &[u64], p: f64, rng: &mut R) -> Result<CoupledPair> {
    check_p(p)?;
    let omega = y
        .iter()
        .map(|&count| {
            if count == 0 {
                0
            } else {
                Binomial::new(count, p).expect("validated p").sample(rng)
            }
        })
        .collect();
    CoupledPair::from_omega(y, omega, p)
}

/// `B` independent thinning draws; replicate `b` uses stream `(seed, b)`.
pub fn draw_coupled_bootstrap(
    y: &CountVector,
    p: f64,
    b: usize,
    seed: u64,
) -> Result<BootstrapDraws> {
    check_p(p)?;
    if b < 1 {
        return Err(Error::param("B", "need at least one bootstrap draw"));
    }
    let pairs = (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rng::stream(seed, Domain::Bootstrap, rep as u64);
            binomial_thin(y, p, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BootstrapDraws { pairs, p, seed })
}

/// Splits a positive observation with a given `Z ∈ [0, 1]`.
pub fn beta_split_with(y: f64, eps: f64, z: f64) -> Result<(f64, f64)> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::param(
            "eps",
            format!("must lie in (0, 1), got {eps}"),
        ));
    }
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::param("y", format!("must be positive, got {y}")));
    }
    Ok((z / eps * y, (1.0 - z) / (1.0 - eps) * y))
}

/// Exponential-family analogue of the split: `Z ~ Beta(ε, 1 − ε)`,
/// `Y* = Z/ε · y`, `Y† = (1 − Z)/(1 − ε) · y`.
///
/// When `y ~ Exp(λ)`, `Y* ~ Gam(ε, ελ)` and `Y† ~ Gam(1 − ε, (1 − ε)λ)`
/// independently. The beta variate is the ratio of two unit-scale gammas.
pub fn beta_split_exponential<R: Rng + ?Sized>(
    y: f64,
    eps: f64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    beta_split_with(y, eps, 0.5)?;
    let a: f64 = Gamma::new(eps, 1.0).expect("valid shape").sample(rng);
    let b: f64 = Gamma::new(1.0 - eps, 1.0).expect("valid shape").sample(rng);
    let z = if a + b > 0.0 { a / (a + b) } else { eps };
    beta_split_with(y, eps, z)
}
