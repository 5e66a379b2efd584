//! Test-error estimators for an arbitrary mean-estimation algorithm.
//!
//! * [`cb_estimate`]: coupled bootstrap, unbiased for the test error of the
//!   problem with means shrunk to `(1 − p)μ`.
//! * [`ue_estimate`]: Hudson-lemma estimator, unbiased for the original test
//!   error at the price of one refit per nonzero count.
//! * [`ue_sampled`]: the same with its summands subsampled.
//! * [`cb_infinite_exact`]: the `B → ∞` limit of CB, by enumeration.

use rand::seq::index;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::loss::LossSpec;
use crate::rng::{self, Domain};
use crate::thinning::{self, BootstrapDraws, CoupledPair};
use crate::types::{CountVector, MeanVector};

/// A mean estimator `g: Z₊ⁿ → R₊ⁿ`.
///
/// Implementations must be deterministic functions of `y`; any internal
/// randomness (fold assignment, say) is fixed by the implementation's own
/// configuration.
pub trait FitAlgorithm: Sync {
    fn name(&self) -> String;

    fn fit(&self, y: &[u64]) -> Vec<f64>;

    /// `gᵢ(y − eᵢ)`; only called with `y[i] ≥ 1`.
    fn fit_decremented(&self, y: &[u64], i: usize) -> f64 {
        let mut z = y.to_vec();
        z[i] -= 1;
        self.fit(&z)[i]
    }
}

impl<T: FitAlgorithm + ?Sized> FitAlgorithm for &T {
    fn name(&self) -> String {
        (**self).name()
    }

    fn fit(&self, y: &[u64]) -> Vec<f64> {
        (**self).fit(y)
    }

    fn fit_decremented(&self, y: &[u64], i: usize) -> f64 {
        (**self).fit_decremented(y, i)
    }
}

impl<T: FitAlgorithm + ?Sized> FitAlgorithm for Box<T> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn fit(&self, y: &[u64]) -> Vec<f64> {
        (**self).fit(y)
    }

    fn fit_decremented(&self, y: &[u64], i: usize) -> f64 {
        (**self).fit_decremented(y, i)
    }
}

/// Wraps a closure as an algorithm.
pub struct FnFit<F> {
    name: String,
    f: F,
}

impl<F> FnFit<F>
where
    F: Fn(&[u64]) -> Vec<f64> + Sync,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        Self {
            name: name.into(),
            f,
        }
    }
}

impl<F> FitAlgorithm for FnFit<F>
where
    F: Fn(&[u64]) -> Vec<f64> + Sync,
{
    fn name(&self) -> String {
        self.name.clone()
    }

    fn fit(&self, y: &[u64]) -> Vec<f64> {
        (self.f)(y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    CoupledBootstrap,
    Unbiased,
    UnbiasedSampled,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::CoupledBootstrap => "cb",
            Method::Unbiased => "ue",
            Method::UnbiasedSampled => "ue_ss",
        }
    }
}

/// Settings echoed alongside an estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateConfig {
    pub method: Method,
    pub loss: LossSpec,
    pub p: Option<f64>,
    pub b: Option<usize>,
    pub m: Option<usize>,
    pub seed: Option<u64>,
}

/// A point estimate with its replicate values and diagnostics.
///
/// `std_error` is the spread of the bootstrap replicates over `√B`: it
/// measures the reducible (bootstrap) noise only, not the variability of
/// the estimate across data draws. Single-shot estimators report zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorEstimate {
    pub value: f64,
    pub std_error: f64,
    pub per_replicate: Vec<f64>,
    /// Deviance summands whose log term hit a zero fit and used the pad.
    pub n_padded_summands: u64,
    /// Number of times the algorithm was run.
    pub fit_calls: usize,
    pub config: EstimateConfig,
}

impl ErrorEstimate {
    fn from_replicates(
        per_replicate: Vec<f64>,
        n_padded_summands: u64,
        fit_calls: usize,
        config: EstimateConfig,
    ) -> Self {
        let (value, std_error) = mean_and_se(&per_replicate);
        Self {
            value,
            std_error,
            per_replicate,
            n_padded_summands,
            fit_calls,
            config,
        }
    }
}

/// Sample mean and `sd/√len` (0 when fewer than two values).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64 / n as f64).sqrt())
}

pub(crate) fn validated_fit<G: FitAlgorithm + ?Sized>(g: &G, y: &[u64]) -> Result<Vec<f64>> {
    let fit = g.fit(y);
    check_fit(g, &fit, y.len())?;
    Ok(fit)
}

pub(crate) fn check_fit<G: FitAlgorithm + ?Sized>(g: &G, fit: &[f64], n: usize) -> Result<()> {
    if fit.len() != n {
        return Err(Error::FitLength {
            algorithm: g.name(),
            expected: n,
            got: fit.len(),
        });
    }
    if let Some((index, &value)) = fit
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
    {
        return Err(Error::InvalidFit {
            algorithm: g.name(),
            index,
            value,
        });
    }
    Ok(())
}

fn check_decremented<G: FitAlgorithm + ?Sized>(g: &G, index: usize, value: f64) -> Result<f64> {
    if !(value.is_finite() && value >= 0.0) {
        return Err(Error::InvalidFit {
            algorithm: g.name(),
            index,
            value,
        });
    }
    Ok(value)
}

/// Value of one coupled-bootstrap replicate,
/// `D(Y†, g(Y*)) + φ(Y*) − φ(Y†)`, evaluated as
/// `φ(Y*) + κ(g) − ⟨∇φ(g), Y†⟩` with the fit padded under deviance.
///
/// Returns the value and the number of padded summands (`Y†ᵢ ≠ 0`,
/// `gᵢ(Y*) = 0`).
pub fn cb_replicate_value(loss: &LossSpec, pair: &CoupledPair, fit: &[f64]) -> (f64, u64) {
    let mut total = 0.0;
    let mut padded = 0;
    for (i, &raw) in fit.iter().enumerate() {
        let b = if loss.is_deviance() && raw == 0.0 {
            if pair.y_dagger[i] != 0.0 {
                padded += 1;
            }
            loss.pad_c
        } else {
            raw
        };
        let dagger = pair.y_dagger[i];
        let cross = if dagger == 0.0 {
            0.0
        } else {
            loss.grad1(b) * dagger
        };
        total += loss.phi1(pair.y_star[i] as f64) + loss.offset1(b) - cross;
    }
    (total, padded)
}

fn cb_config(loss: &LossSpec, p: f64, b: usize, seed: u64) -> EstimateConfig {
    EstimateConfig {
        method: Method::CoupledBootstrap,
        loss: *loss,
        p: Some(p),
        b: Some(b),
        m: None,
        seed: Some(seed),
    }
}

/// Coupled-bootstrap estimate of `Err_p(g)`.
pub fn cb_estimate<G: FitAlgorithm + ?Sized>(
    y: &CountVector,
    g: &G,
    loss: &LossSpec,
    p: f64,
    b: usize,
    seed: u64,
) -> Result<ErrorEstimate> {
    let draws = thinning::draw_coupled_bootstrap(y, p, b, seed)?;
    cb_from_draws(&draws, g, loss)
}

/// CB estimate from pre-drawn thinning noise, so that several algorithms
/// can be compared on identical draws.
pub fn cb_from_draws<G: FitAlgorithm + ?Sized>(
    draws: &BootstrapDraws,
    g: &G,
    loss: &LossSpec,
) -> Result<ErrorEstimate> {
    let mut out = cb_from_draws_multi(draws, g, std::slice::from_ref(loss))?;
    Ok(out.remove(0))
}

/// CB estimates for several losses, fitting `g` once per replicate.
pub fn cb_from_draws_multi<G: FitAlgorithm + ?Sized>(
    draws: &BootstrapDraws,
    g: &G,
    losses: &[LossSpec],
) -> Result<Vec<ErrorEstimate>> {
    if draws.is_empty() {
        return Err(Error::param("B", "need at least one bootstrap draw"));
    }
    let per_rep: Vec<Vec<(f64, u64)>> = draws
        .pairs
        .par_iter()
        .map(|pair| {
            let fit = validated_fit(g, &pair.y_star)?;
            Ok(losses
                .iter()
                .map(|loss| cb_replicate_value(loss, pair, &fit))
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(losses
        .iter()
        .enumerate()
        .map(|(k, loss)| {
            let values: Vec<f64> = per_rep.iter().map(|r| r[k].0).collect();
            let padded = per_rep.iter().map(|r| r[k].1).sum();
            ErrorEstimate::from_replicates(
                values,
                padded,
                draws.len(),
                cb_config(loss, draws.p, draws.len(), draws.seed),
            )
        })
        .collect())
}

/// `Σ φ(yᵢ) + κ(gᵢ(y))` over the listed coordinates, the part of the
/// Hudson-lemma estimator that needs only the full fit.
fn ue_exact_part(loss: &LossSpec, y: &[u64], fit: &[f64], coords: &[usize]) -> f64 {
    coords
        .iter()
        .map(|&i| (y[i], fit[i]))
        .map(|(yi, gi)| {
            let b = if loss.is_deviance() && gi == 0.0 {
                loss.pad_c
            } else {
                gi
            };
            loss.phi1(yi as f64) + loss.offset1(b)
        })
        .sum()
}

/// `gᵢ(y − eᵢ)` for each listed coordinate, `None` when `yᵢ = 0` (no refit).
fn decremented_fits<G: FitAlgorithm + ?Sized>(
    g: &G,
    y: &[u64],
    coords: &[usize],
) -> Result<Vec<Option<f64>>> {
    coords
        .par_iter()
        .map(|&i| {
            if y[i] == 0 {
                Ok(None)
            } else {
                check_decremented(g, i, g.fit_decremented(y, i)).map(Some)
            }
        })
        .collect()
}

/// `Σ yᵢ · ∂ᵢφ(gᵢ(y − eᵢ))` over the refit coordinates, with the pad count.
fn ue_correction(
    loss: &LossSpec,
    y: &[u64],
    coords: &[usize],
    refits: &[Option<f64>],
) -> (f64, u64) {
    let mut total = 0.0;
    let mut padded = 0;
    for (&i, refit) in coords.iter().zip(refits) {
        if let Some(raw) = *refit {
            let b = if loss.is_deviance() && raw == 0.0 {
                padded += 1;
                loss.pad_c
            } else {
                raw
            };
            total += y[i] as f64 * loss.grad1(b);
        }
    }
    (total, padded)
}

fn ue_config(loss: &LossSpec, m: Option<usize>, seed: Option<u64>) -> EstimateConfig {
    EstimateConfig {
        method: if m.is_some() {
            Method::UnbiasedSampled
        } else {
            Method::Unbiased
        },
        loss: *loss,
        p: None,
        b: None,
        m,
        seed,
    }
}

/// Hudson-lemma unbiased estimate of `Err(g)`:
/// `D(y, g(y)) + ⟨∇φ(g(y)), y⟩ − ⟨∇φ(g₋(y)), y⟩` with
/// `g₋(y)ᵢ = gᵢ(y − eᵢ)`.
///
/// Coordinates with `yᵢ = 0` contribute nothing to the last term and are
/// not refit, so `g` runs `1 + #{i : yᵢ > 0}` times.
pub fn ue_estimate<G: FitAlgorithm + ?Sized>(
    y: &CountVector,
    g: &G,
    loss: &LossSpec,
) -> Result<ErrorEstimate> {
    Ok(ue_estimate_multi(y, g, std::slice::from_ref(loss))?.remove(0))
}

/// [`ue_estimate`] for several losses, sharing the refits.
pub fn ue_estimate_multi<G: FitAlgorithm + ?Sized>(
    y: &CountVector,
    g: &G,
    losses: &[LossSpec],
) -> Result<Vec<ErrorEstimate>> {
    let coords: Vec<usize> = (0..y.len()).collect();
    ue_subset_multi(y, g, losses, &coords, None)
}

/// Hudson-lemma estimator on `m` coordinates drawn uniformly without
/// replacement, scaled by `n/m`.
///
/// Whole per-coordinate summands are sampled. Within a summand the `φ(yᵢ)`
/// and refit terms largely cancel, so keeping the full-fit part exact while
/// sampling only the refit part would leave a much noisier estimate.
pub fn ue_sampled<G: FitAlgorithm + ?Sized>(
    y: &CountVector,
    g: &G,
    loss: &LossSpec,
    m: usize,
    seed: u64,
) -> Result<ErrorEstimate> {
    Ok(ue_sampled_multi(y, g, std::slice::from_ref(loss), m, seed)?.remove(0))
}

/// [`ue_sampled`] for several losses on one coordinate subset.
pub fn ue_sampled_multi<G: FitAlgorithm + ?Sized>(
    y: &CountVector,
    g: &G,
    losses: &[LossSpec],
    m: usize,
    seed: u64,
) -> Result<Vec<ErrorEstimate>> {
    let n = y.len();
    if m < 1 || m > n {
        return Err(Error::param("m", format!("must lie in 1..={n}, got {m}")));
    }
    let mut rng = rng::stream(seed, Domain::Subsample, 0);
    let mut subset = index::sample(&mut rng, n, m).into_vec();
    subset.sort_unstable();
    ue_subset_multi(y, g, losses, &subset, Some(seed))
}

/// The subsampled estimator for an explicit coordinate subset.
pub fn ue_on_subset<G: FitAlgorithm + ?Sized>(
    y: &CountVector,
    g: &G,
    loss: &LossSpec,
    subset: &[usize],
    seed: u64,
) -> Result<ErrorEstimate> {
    let n = y.len();
    if subset.is_empty() || subset.iter().any(|&i| i >= n) {
        return Err(Error::param(
            "subset",
            "indices must be nonempty and in range",
        ));
    }
    Ok(ue_subset_multi(y, g, std::slice::from_ref(loss), subset, Some(seed))?.remove(0))
}

/// Shared body: `seed = None` marks the full (unsampled) estimator.
fn ue_subset_multi<G: FitAlgorithm + ?Sized>(
    y: &CountVector,
    g: &G,
    losses: &[LossSpec],
    coords: &[usize],
    seed: Option<u64>,
) -> Result<Vec<ErrorEstimate>> {
    let fit = validated_fit(g, y)?;
    let refits = decremented_fits(g, y, coords)?;
    let calls = 1 + refits.iter().filter(|r| r.is_some()).count();
    let scale = y.len() as f64 / coords.len() as f64;
    let m = seed.map(|_| coords.len());
    Ok(losses
        .iter()
        .map(|loss| {
            let exact = ue_exact_part(loss, y, &fit, coords);
            let (correction, padded) = ue_correction(loss, y, coords, &refits);
            ErrorEstimate::from_replicates(
                vec![scale * (exact - correction)],
                padded,
                calls,
                ue_config(loss, m, seed),
            )
        })
        .collect())
}

/// Largest number of thinning outcomes [`cb_infinite_exact`] enumerates.
pub const ENUMERATION_BUDGET: f64 = 1e6;

/// `log C(n, k)`.
pub(crate) fn ln_choose(n: u64, k: u64) -> f64 {
    use statrs::function::factorial::ln_factorial;
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// `P(Binom(n, p) = k)` for every `k = 0..=n`.
pub(crate) fn binomial_pmf_table(n: u64, p: f64) -> Vec<f64> {
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    (0..=n)
        .map(|k| (ln_choose(n, k) + k as f64 * lp + (n - k) as f64 * lq).exp())
        .collect()
}

/// Exact `E[CB replicate | Y = y]`, summing over every `0 ≤ ω ≤ y`.
pub fn cb_infinite_exact<G: FitAlgorithm + ?Sized>(
    y: &CountVector,
    g: &G,
    loss: &LossSpec,
    p: f64,
) -> Result<f64> {
    thinning::check_p(p)?;
    let required: f64 = y.iter().map(|&c| c as f64 + 1.0).product();
    if required > ENUMERATION_BUDGET {
        return Err(Error::BudgetExceeded {
            required,
            budget: ENUMERATION_BUDGET,
        });
    }
    let tables: Vec<Vec<f64>> = y.iter().map(|&c| binomial_pmf_table(c, p)).collect();
    let mut omega = vec![0u64; y.len()];
    let mut total = 0.0;
    loop {
        let weight: f64 = omega
            .iter()
            .zip(&tables)
            .map(|(&w, t)| t[w as usize])
            .product();
        let pair = CoupledPair::from_omega(y, omega.clone(), p)?;
        let fit = validated_fit(g, &pair.y_star)?;
        total += weight * cb_replicate_value(loss, &pair, &fit).0;
        // odometer increment over the box 0 ≤ ω ≤ y
        let mut k = 0;
        loop {
            if k == y.len() {
                return Ok(total);
            }
            if omega[k] < y[k] {
                omega[k] += 1;
                break;
            }
            omega[k] = 0;
            k += 1;
        }
    }
}

/// `min{0.1, Σμᵢ / Σμᵢ²}`.
pub fn choose_p(mu_proxy: &MeanVector) -> Result<f64> {
    let s1 = mu_proxy.total();
    let s2: f64 = mu_proxy.iter().map(|m| m * m).sum();
    if s2 == 0.0 {
        return Err(Error::param("mu_proxy", "all entries are zero"));
    }
    Ok((s1 / s2).min(0.1))
}

/// Probabilities that a single deviance summand needs padding when `n = 1`
/// and `g(0) = 0`: `(P(Y = 1), P(Y* = 0, ω ≥ 1)) = (e^{−μ}μ, e^{−μ}(e^{pμ} − 1))`.
pub fn illdef_probability(mu: f64, p: f64) -> Result<(f64, f64)> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::param("mu", format!("must be nonnegative, got {mu}")));
    }
    thinning::check_p(p)?;
    let ue = (-mu).exp() * mu;
    let cb = (-mu).exp() * (p * mu).exp_m1();
    Ok((ue, cb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn identity() -> FnFit<impl Fn(&[u64]) -> Vec<f64> + Sync> {
        FnFit::new("identity", |y: &[u64]| {
            y.iter().map(|&v| v as f64).collect()
        })
    }

    fn hard(lam: f64) -> FnFit<impl Fn(&[u64]) -> Vec<f64> + Sync> {
        FnFit::new("hard", move |y: &[u64]| {
            y.iter()
                .map(|&v| if v as f64 > lam { v as f64 } else { 0.0 })
                .collect()
        })
    }

    fn counts(v: &[u64]) -> CountVector {
        CountVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn cb_single_count_replicates() {
        let est = cb_estimate(
            &counts(&[1]),
            &identity(),
            &LossSpec::squared(),
            0.25,
            200,
            3,
        )
        .unwrap();
        assert!(est.per_replicate.iter().all(|&v| v == 0.0 || v == 2.0));
        assert_eq!(est.value, est.per_replicate.iter().sum::<f64>() / 200.0);
        let exact =
            cb_infinite_exact(&counts(&[1]), &identity(), &LossSpec::squared(), 0.25).unwrap();
        assert_relative_eq!(exact, 1.5, max_relative = 1e-14);
    }

    #[test]
    fn cb_zero_data_is_zero() {
        for p in [0.05, 0.5, 0.9] {
            let est = cb_estimate(
                &CountVector::zeros(5).unwrap(),
                &identity(),
                &LossSpec::squared(),
                p,
                7,
                1,
            )
            .unwrap();
            assert_eq!(est.value, 0.0);
            assert_eq!(est.std_error, 0.0);
        }
    }

    #[test]
    fn cb_rejects_bad_arguments_and_fits() {
        let y = counts(&[1, 2]);
        assert!(cb_estimate(&y, &identity(), &LossSpec::squared(), 1.0, 5, 1).is_err());
        assert!(cb_estimate(&y, &identity(), &LossSpec::squared(), 0.1, 0, 1).is_err());
        let negative = FnFit::new("neg", |y: &[u64]| vec![-1.0; y.len()]);
        assert!(matches!(
            cb_estimate(&y, &negative, &LossSpec::squared(), 0.1, 5, 1),
            Err(Error::InvalidFit { .. })
        ));
        let short = FnFit::new("short", |_: &[u64]| vec![1.0]);
        assert!(matches!(
            cb_estimate(&y, &short, &LossSpec::squared(), 0.1, 5, 1),
            Err(Error::FitLength { .. })
        ));
    }

    #[test]
    fn cb_replicate_matches_direct_formula() {
        let y = [4u64, 0, 7, 2];
        let pair = CoupledPair::from_omega(&y, vec![1, 0, 3, 2], 0.3).unwrap();
        let fit = vec![2.5, 0.0, 6.0, 0.0];
        for loss in [LossSpec::squared(), LossSpec::deviance()] {
            let padded = loss.prepare_fit(&fit);
            let star: Vec<f64> = pair.y_star.iter().map(|&v| v as f64).collect();
            let direct = loss.loss(&pair.y_dagger, &padded).unwrap() + loss.phi(&star)
                - loss.phi(&pair.y_dagger);
            let (value, pads) = cb_replicate_value(&loss, &pair, &fit);
            assert_relative_eq!(value, direct, max_relative = 1e-12);
            // only coordinate 3 has Y† ≠ 0 with a zero fit
            assert_eq!(pads, if loss.is_deviance() { 1 } else { 0 });
        }
    }

    #[test]
    fn ue_identity_examples() {
        let est = ue_estimate(&counts(&[3, 0]), &identity(), &LossSpec::squared()).unwrap();
        assert_eq!(est.value, 6.0);
        let est = ue_estimate(
            &CountVector::zeros(4).unwrap(),
            &identity(),
            &LossSpec::squared(),
        )
        .unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.fit_calls, 1);
    }

    #[test]
    fn ue_constant_fit_is_plain_loss() {
        let c = vec![1.5, 0.25, 4.0];
        let cc = c.clone();
        let g = FnFit::new("const", move |_: &[u64]| cc.clone());
        let y = counts(&[2, 0, 5]);
        let est = ue_estimate(&y, &g, &LossSpec::squared()).unwrap();
        let expect = crate::loss::squared_loss(&y.to_f64(), &c).unwrap();
        assert_relative_eq!(est.value, expect, max_relative = 1e-14);
    }

    #[test]
    fn ue_counts_fit_invocations() {
        let calls = AtomicUsize::new(0);
        let g = FnFit::new("counted", |y: &[u64]| {
            calls.fetch_add(1, Ordering::Relaxed);
            y.iter().map(|&v| 0.5 * v as f64 + 1.0).collect()
        });
        let y = counts(&[3, 0, 1, 4, 0]);
        let est = ue_estimate(&y, &g, &LossSpec::deviance()).unwrap();
        assert_eq!(calls.load(Ordering::Relaxed), 4);
        assert_eq!(est.fit_calls, 4);
        calls.store(0, Ordering::Relaxed);
        let est = ue_sampled(&y, &g, &LossSpec::deviance(), 5, 9).unwrap();
        assert_eq!(calls.load(Ordering::Relaxed), est.fit_calls);
    }

    #[test]
    fn optimism_identity() {
        let y = counts(&[3, 1, 0, 6]);
        let g = hard(1.5);
        for loss in [LossSpec::squared(), LossSpec::deviance()] {
            let ue = ue_estimate(&y, &g, &loss).unwrap().value;
            let fit = loss.prepare_fit(&g.fit(&y));
            let train = loss.loss(&y.to_f64(), &fit).unwrap();
            let plus: f64 = y
                .iter()
                .zip(&fit)
                .map(|(&a, &b)| a as f64 * loss.grad1(b))
                .sum();
            let minus: f64 = (0..y.len())
                .filter(|&i| y[i] > 0)
                .map(|i| {
                    let b = loss.prepare_fit(&[g.fit_decremented(&y, i)])[0];
                    y[i] as f64 * loss.grad1(b)
                })
                .sum();
            assert_relative_eq!(
                ue - train,
                plus - minus,
                max_relative = 1e-12,
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn sampled_full_subset_equals_ue() {
        let y = counts(&[2, 5, 0, 1, 3]);
        let g = hard(1.5);
        for loss in [LossSpec::squared(), LossSpec::deviance()] {
            let full = ue_estimate(&y, &g, &loss).unwrap().value;
            let ss = ue_sampled(&y, &g, &loss, 5, 4).unwrap().value;
            assert_relative_eq!(full, ss, max_relative = 1e-12);
        }
        assert!(ue_sampled(&y, &g, &LossSpec::squared(), 0, 1).is_err());
        assert!(ue_sampled(&y, &g, &LossSpec::squared(), 6, 1).is_err());
    }

    #[test]
    fn sampled_single_coordinate_is_scaled_summand() {
        // identity under squared loss: yᵢ² + yᵢ² − 2yᵢ(yᵢ − 1) = 2yᵢ
        let y = counts(&[4, 0, 7]);
        let g = FnFit::new("id", |y: &[u64]| y.iter().map(|&v| v as f64).collect());
        for (i, want) in [(0, 24.0), (1, 0.0), (2, 42.0)] {
            let est = ue_on_subset(&y, &g, &LossSpec::squared(), &[i], 0).unwrap();
            assert_relative_eq!(est.value, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn sampled_subsets_average_to_ue() {
        let y = counts(&[2, 3]);
        let g = FnFit::new("shrink", |y: &[u64]| {
            let mean = y.iter().sum::<u64>() as f64 / y.len() as f64;
            y.iter().map(|&v| 0.8 * v as f64 + 0.2 * mean).collect()
        });
        for loss in [LossSpec::squared(), LossSpec::deviance()] {
            let full = ue_estimate(&y, &g, &loss).unwrap().value;
            let avg = (ue_on_subset(&y, &g, &loss, &[0], 0).unwrap().value
                + ue_on_subset(&y, &g, &loss, &[1], 0).unwrap().value)
                / 2.0;
            assert_relative_eq!(full, avg, max_relative = 1e-12);
        }
    }

    #[test]
    fn infinite_cb_approaches_ue_as_p_vanishes() {
        let y = counts(&[1]);
        let cb = cb_infinite_exact(&y, &identity(), &LossSpec::squared(), 1e-6).unwrap();
        assert!((cb - 2.0).abs() < 1e-5, "{cb}");
        let big = counts(&[200, 200, 200]);
        assert!(matches!(
            cb_infinite_exact(&big, &identity(), &LossSpec::squared(), 0.1),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn choose_p_examples() {
        let p = |v: f64| choose_p(&MeanVector::constant(50, v).unwrap()).unwrap();
        assert_relative_eq!(p(10.0), 0.1, max_relative = 1e-15);
        assert_relative_eq!(p(30.0), 1.0 / 30.0, max_relative = 1e-15);
        assert_eq!(p(0.5), 0.1);
        assert!(choose_p(&MeanVector::constant(3, 0.0).unwrap()).is_err());
    }

    #[test]
    fn illdef_examples() {
        let (ue, cb) = illdef_probability(1.0, 0.1).unwrap();
        assert!((ue - 0.36788).abs() < 1e-5);
        assert!((cb - 0.03869022).abs() < 1e-8);
        assert_eq!(illdef_probability(0.0, 0.3).unwrap(), (0.0, 0.0));
        let (ue, cb) = illdef_probability(1.0, 1.0 - 1e-12).unwrap();
        assert!((cb - 0.63212).abs() < 1e-5 && cb > ue);
        assert!(illdef_probability(1.0, 0.0).is_err());
    }

    #[test]
    fn shared_draws_reproduce_single_estimates() {
        let y = counts(&[3, 0, 2, 8]);
        let draws = thinning::draw_coupled_bootstrap(&y, 0.2, 30, 5).unwrap();
        let losses = [LossSpec::squared(), LossSpec::deviance()];
        let multi = cb_from_draws_multi(&draws, &identity(), &losses).unwrap();
        for (k, loss) in losses.iter().enumerate() {
            let single = cb_estimate(&y, &identity(), loss, 0.2, 30, 5).unwrap();
            assert_eq!(single.per_replicate, multi[k].per_replicate);
        }
    }
}
