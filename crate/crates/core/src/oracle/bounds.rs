use rayon::prelude::*;

use super::support::{poisson_support, DEFAULT_DEFICIT};
use super::{coord_grad, coord_loss, Moments};
use crate::error::{Error, Result};
use crate::estimators::{validated_fit, FitAlgorithm};
use crate::loss::LossSpec;
use crate::rng::{poisson_vector, stream, Domain};
use crate::types::MeanVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    /// `(5p/3)·√(Var[D(Ỹ, g(Y))]·Σμᵢ)`.
    Bias,
    /// The three explicit terms of the reducible-variance bound; the
    /// `O(p/B)` remainder has no stated constant and is left out.
    ReducibleVar,
    /// The small-`p` limit bound on the irreducible variance.
    IrreducibleVar,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConfig {
    /// Monte Carlo draws for the moments inside the bias and reducible bounds.
    pub draws: usize,
    /// Batches used for the standard error.
    pub batches: usize,
    /// Largest count per coordinate in the enumeration box of the irreducible bound.
    pub max_count: u64,
    /// Largest dimension accepted by the irreducible bound.
    pub max_dim: usize,
    pub seed: u64,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self {
            draws: 100_000,
            batches: 20,
            max_count: 15,
            max_dim: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundValue {
    pub value: f64,
    /// Batch-means standard error; zero when evaluated exactly.
    pub std_error: f64,
}

fn fit_of<G: FitAlgorithm + ?Sized>(g: &G, loss: &LossSpec, y: &[u64]) -> Result<Vec<f64>> {
    Ok(loss.prepare_fit(&validated_fit(g, y)?))
}

/// `D(y, g(y)) + ⟨∇φ(g(y)), y⟩`.
fn anchored_loss(loss: &LossSpec, y: &[u64], fit: &[f64]) -> f64 {
    y.iter()
        .zip(fit)
        .map(|(&a, &b)| coord_loss(loss, a as f64, b) + a as f64 * coord_grad(loss, b))
        .sum()
}

/// Runs `draws` Monte Carlo draws in `batches` groups, accumulating one
/// [`Moments`] per group.
fn batched<F>(cfg: &BoundConfig, width: usize, domain_tag: u64, draw: F) -> Result<Vec<Moments>>
where
    F: Fn(&mut crate::rng::StreamRng) -> Result<Vec<f64>> + Sync,
{
    let batches = cfg.batches.max(2);
    let per = (cfg.draws / batches).max(2);
    (0..batches)
        .into_par_iter()
        .map(|k| {
            let mut m = Moments::new(width);
            for j in 0..per {
                let mut rng = stream(cfg.seed, Domain::Other(domain_tag), (k * per + j) as u64);
                m.push(&draw(&mut rng)?);
            }
            Ok(m)
        })
        .collect()
}

fn combine(parts: &[Moments]) -> Moments {
    let mut all = Moments::new(parts[0].sum.len());
    parts.iter().for_each(|m| all.merge(m));
    all
}

/// Value from all draws, error from the spread across batches.
fn with_batch_se(parts: &[Moments], eval: impl Fn(&Moments) -> f64) -> BoundValue {
    let value = eval(&combine(parts));
    let per: Vec<f64> = parts.iter().map(&eval).collect();
    let k = per.len() as f64;
    let mean = per.iter().sum::<f64>() / k;
    let sd = (per.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
    BoundValue {
        value,
        std_error: sd / k.sqrt(),
    }
}

/// Evaluates the right-hand side of the bias, reducible-variance or
/// irreducible-variance bound for the CB estimator.
pub fn bound_rhs<G: FitAlgorithm + ?Sized>(
    kind: BoundKind,
    mu: &MeanVector,
    g: &G,
    loss: &LossSpec,
    p: f64,
    b: usize,
    cfg: &BoundConfig,
) -> Result<BoundValue> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::param("p", format!("must lie in [0, 1), got {p}")));
    }
    match kind {
        BoundKind::Bias => bias_bound(mu, g, loss, p, cfg),
        BoundKind::ReducibleVar => rvar_bound(mu, g, loss, p, b, cfg),
        BoundKind::IrreducibleVar => ivar_bound(mu, g, loss, cfg),
    }
}

fn bias_bound<G: FitAlgorithm + ?Sized>(
    mu: &MeanVector,
    g: &G,
    loss: &LossSpec,
    p: f64,
    cfg: &BoundConfig,
) -> Result<BoundValue> {
    if p == 0.0 {
        return Ok(BoundValue {
            value: 0.0,
            std_error: 0.0,
        });
    }
    let parts = batched(cfg, 1, 0xb1a5, |rng| {
        let y = poisson_vector(mu, rng);
        let y_test = poisson_vector(mu, rng);
        let fit = fit_of(g, loss, &y)?;
        Ok(vec![y_test
            .iter()
            .zip(&fit)
            .map(|(&a, &b)| coord_loss(loss, a as f64, b))
            .sum()])
    })?;
    let total = mu.total();
    Ok(with_batch_se(&parts, |m| {
        5.0 * p / 3.0 * (m.var(0) * total).sqrt()
    }))
}

fn rvar_bound<G: FitAlgorithm + ?Sized>(
    mu: &MeanVector,
    g: &G,
    loss: &LossSpec,
    p: f64,
    b: usize,
    cfg: &BoundConfig,
) -> Result<BoundValue> {
    if p == 0.0 || b == 0 {
        return Err(Error::param(
            "p",
            "the reducible-variance bound needs p > 0 and B ≥ 1",
        ));
    }
    let n = mu.len();
    let shrunk = mu.shrunk(p);
    let anchored = batched(cfg, 1, 0x7661_7231, |rng| {
        let y = poisson_vector(mu, rng);
        let fit = fit_of(g, loss, &y)?;
        Ok(vec![anchored_loss(loss, &y, &fit)])
    })?;
    let grads = batched(cfg, n, 0x7661_7232, |rng| {
        let y = poisson_vector(&shrunk, rng);
        let fit = fit_of(g, loss, &y)?;
        Ok(fit.iter().map(|&v| coord_grad(loss, v)).collect())
    })?;
    let bf = b as f64;
    let t1 = |m: &Moments| 2.0 / bf * m.var(0);
    let t23 = |m: &Moments| {
        (0..n)
            .map(|i| 2.0 / (bf * p) * mu[i] * m.mean_sq(i) + 2.0 / bf * mu[i] * mu[i] * m.var(i))
            .sum::<f64>()
    };
    let a = with_batch_se(&anchored, t1);
    let c = with_batch_se(&grads, t23);
    Ok(BoundValue {
        value: a.value + c.value,
        std_error: (a.std_error.powi(2) + c.std_error.powi(2)).sqrt(),
    })
}

/// Exact over the box `0 ≤ y ≤ K`, with `Φᵢ(y) = max_{z ≤ y} |∇ᵢφ(g(z))|`
/// obtained as a running maximum along each axis in turn.
fn ivar_bound<G: FitAlgorithm + ?Sized>(
    mu: &MeanVector,
    g: &G,
    loss: &LossSpec,
    cfg: &BoundConfig,
) -> Result<BoundValue> {
    let n = mu.len();
    if n > cfg.max_dim {
        return Err(Error::BudgetExceeded {
            required: n as f64,
            budget: cfg.max_dim as f64,
        });
    }
    let supports = mu
        .iter()
        .map(|&m| poisson_support(m, DEFAULT_DEFICIT))
        .collect::<Result<Vec<_>>>()?;
    if let Some(s) = supports.iter().find(|s| s.max() > cfg.max_count) {
        return Err(Error::BudgetExceeded {
            required: s.max() as f64,
            budget: cfg.max_count as f64,
        });
    }
    let dims: Vec<usize> = supports.iter().map(|s| s.pmf.len()).collect();
    let size: usize = dims.iter().product();
    let mut strides = vec![1usize; n];
    for i in 1..n {
        strides[i] = strides[i - 1] * dims[i - 1];
    }
    let point = |pos: usize| -> Vec<u64> {
        (0..n)
            .map(|i| ((pos / strides[i]) % dims[i]) as u64)
            .collect()
    };

    let mut anchored = vec![0.0; size];
    let mut phi = vec![vec![0.0; size]; n];
    for pos in 0..size {
        let y = point(pos);
        let fit = fit_of(g, loss, &y)?;
        anchored[pos] = anchored_loss(loss, &y, &fit);
        for i in 0..n {
            phi[i][pos] = coord_grad(loss, fit[i]).abs();
        }
    }
    // running maximum over z ≤ y, one axis at a time
    for table in phi.iter_mut() {
        for axis in 0..n {
            for pos in 0..size {
                if !(pos / strides[axis]).is_multiple_of(dims[axis]) {
                    let prev = table[pos - strides[axis]];
                    if prev > table[pos] {
                        table[pos] = prev;
                    }
                }
            }
        }
    }
    let (mut m1, mut m2, mut cross_sq) = (0.0, 0.0, 0.0);
    for pos in 0..size {
        let y = point(pos);
        let prob: f64 = y
            .iter()
            .zip(&supports)
            .map(|(&k, s)| s.pmf[k as usize])
            .product();
        m1 += prob * anchored[pos];
        m2 += prob * anchored[pos] * anchored[pos];
        let inner: f64 = (0..n).map(|i| phi[i][pos] * y[i] as f64).sum();
        cross_sq += prob * inner * inner;
    }
    Ok(BoundValue {
        value: 2.0 * (m2 - m1 * m1).max(0.0) + 2.0 * cross_sq,
        std_error: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::LinearShrinkage;

    fn cfg() -> BoundConfig {
        BoundConfig {
            draws: 20_000,
            ..BoundConfig::default()
        }
    }

    #[test]
    fn bias_bound_vanishes_at_zero_p() {
        let mu = MeanVector::constant(10, 3.0).unwrap();
        let v = bound_rhs(
            BoundKind::Bias,
            &mu,
            &LinearShrinkage::default(),
            &LossSpec::squared(),
            0.0,
            10,
            &cfg(),
        )
        .unwrap();
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn rvar_bound_halves_when_b_doubles() {
        let mu = MeanVector::constant(10, 3.0).unwrap();
        let g = LinearShrinkage::default();
        for loss in [LossSpec::squared(), LossSpec::deviance()] {
            let a = bound_rhs(BoundKind::ReducibleVar, &mu, &g, &loss, 0.1, 32, &cfg()).unwrap();
            let b = bound_rhs(BoundKind::ReducibleVar, &mu, &g, &loss, 0.1, 64, &cfg()).unwrap();
            assert!((a.value / b.value - 2.0).abs() < 1e-12);
            assert!(a.std_error > 0.0);
        }
    }

    #[test]
    fn ivar_bound_limits() {
        let g = LinearShrinkage::default();
        let small = MeanVector::new(vec![0.5, 1.0]).unwrap();
        let v = bound_rhs(
            BoundKind::IrreducibleVar,
            &small,
            &g,
            &LossSpec::squared(),
            0.01,
            1,
            &cfg(),
        )
        .unwrap();
        assert!(v.value > 0.0 && v.std_error == 0.0);
        let big = MeanVector::new(vec![5.0]).unwrap();
        assert!(bound_rhs(
            BoundKind::IrreducibleVar,
            &big,
            &g,
            &LossSpec::squared(),
            0.01,
            1,
            &cfg()
        )
        .is_err());
        let wide = MeanVector::constant(5, 0.5).unwrap();
        assert!(bound_rhs(
            BoundKind::IrreducibleVar,
            &wide,
            &g,
            &LossSpec::squared(),
            0.01,
            1,
            &cfg()
        )
        .is_err());
    }
}
