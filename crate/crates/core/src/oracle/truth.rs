use rayon::prelude::*;

use super::support::{ProductSupport, DEFAULT_DEFICIT};
use super::{coord_loss, coord_phi};
use crate::error::{Error, Result};
use crate::estimators::{mean_and_se, validated_fit, FitAlgorithm};
use crate::loss::LossSpec;
use crate::rng::{poisson_vector, stream, Domain};
use crate::types::MeanVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthMethod {
    MonteCarlo,
    Enumeration,
}

/// How an oracle evaluates an expectation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    Enumeration,
    MonteCarlo { draws: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthEstimate {
    pub value: f64,
    /// Zero for enumeration.
    pub std_error: f64,
    pub method: TruthMethod,
    /// Probability mass left out by truncation (zero for Monte Carlo).
    pub truncation_mass_deficit: f64,
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::param("p", format!("must lie in [0, 1), got {p}")));
    }
    Ok(())
}

/// Monte Carlo estimate of `Err_p(g) = E D(Ỹ_p, g(Y_p))` with
/// `Y_p, Ỹ_p ~ Pois((1−p)μ)` independent; `p = 0` gives `Err(g)`.
pub fn mc_truth<G: FitAlgorithm + ?Sized>(
    mu: &MeanVector,
    g: &G,
    loss: &LossSpec,
    p: f64,
    r: usize,
    seed: u64,
) -> Result<TruthEstimate> {
    Ok(mc_truth_multi(mu, g, std::slice::from_ref(loss), p, r, seed)?.remove(0))
}

/// [`mc_truth`] for several losses on the same draws, one fit per draw.
pub fn mc_truth_multi<G: FitAlgorithm + ?Sized>(
    mu: &MeanVector,
    g: &G,
    losses: &[LossSpec],
    p: f64,
    r: usize,
    seed: u64,
) -> Result<Vec<TruthEstimate>> {
    check_p(p)?;
    if r < 2 {
        return Err(Error::param("R", "need at least two draws"));
    }
    let m = mu.shrunk(p);
    let values = (0..r)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, Domain::Truth, k as u64);
            let y = poisson_vector(&m, &mut rng);
            let y_test = poisson_vector(&m, &mut rng);
            let raw = validated_fit(g, &y)?;
            Ok(losses
                .iter()
                .map(|loss| {
                    let fit = loss.prepare_fit(&raw);
                    y_test
                        .iter()
                        .zip(&fit)
                        .map(|(&a, &b)| coord_loss(loss, a as f64, b))
                        .sum()
                })
                .collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok((0..losses.len())
        .map(|l| {
            let column: Vec<f64> = values.iter().map(|v| v[l]).collect();
            let (value, std_error) = mean_and_se(&column);
            TruthEstimate {
                value,
                std_error,
                method: TruthMethod::MonteCarlo,
                truncation_mass_deficit: 0.0,
            }
        })
        .collect())
}

/// `Err_p(g)` by summing over the truncated support of `Y_p`; the
/// expectation over the independent test copy is taken per coordinate.
pub fn enum_truth<G: FitAlgorithm + ?Sized>(
    mu: &MeanVector,
    g: &G,
    loss: &LossSpec,
    p: f64,
) -> Result<TruthEstimate> {
    check_p(p)?;
    let m = mu.shrunk(p);
    let support = ProductSupport::new(&m, DEFAULT_DEFICIT)?;
    let mut total = 0.0;
    let mut err = None;
    support.for_each(|_, y, prob| {
        if err.is_some() {
            return;
        }
        match validated_fit(g, y) {
            Ok(fit) => {
                let fit = loss.prepare_fit(&fit);
                let inner: f64 = support
                    .factors
                    .iter()
                    .zip(&fit)
                    .map(|(f, &b)| {
                        f.pmf
                            .iter()
                            .enumerate()
                            .map(|(k, q)| q * coord_loss(loss, k as f64, b))
                            .sum::<f64>()
                    })
                    .sum();
                total += prob * inner;
            }
            Err(e) => err = Some(e),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(TruthEstimate {
        value: total,
        std_error: 0.0,
        method: TruthMethod::Enumeration,
        // training and test draws each drop at most this much
        truncation_mass_deficit: 2.0 * support.deficit(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HudsonReport {
    /// `μᵢ E[gᵢ(Y)]` per coordinate.
    pub lhs: Vec<f64>,
    /// `E[Yᵢ gᵢ(Y − eᵢ)]` per coordinate.
    pub rhs: Vec<f64>,
    pub max_residual: f64,
    pub passed: bool,
}

/// Checks `μᵢ E[gᵢ(Y)] = E[Yᵢ gᵢ(Y − eᵢ)]` for every coordinate by
/// enumeration and reports the largest relative residual.
pub fn hudson_check<G: FitAlgorithm + ?Sized>(
    mu: &MeanVector,
    g: &G,
    tol: f64,
) -> Result<HudsonReport> {
    let n = mu.len();
    let support = ProductSupport::new(mu, DEFAULT_DEFICIT)?;
    let strides = support.strides();
    let mut fits: Vec<Vec<f64>> = Vec::with_capacity(support.size());
    let mut err = None;
    support.for_each(|_, y, _| {
        if err.is_none() {
            match validated_fit(g, y) {
                Ok(f) => fits.push(f),
                Err(e) => err = Some(e),
            }
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    let mut lhs = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    support.for_each(|pos, y, prob| {
        for i in 0..n {
            lhs[i] += prob * mu[i] * fits[pos][i];
            if y[i] > 0 {
                rhs[i] += prob * y[i] as f64 * fits[pos - strides[i]][i];
            }
        }
    });
    let max_residual = lhs
        .iter()
        .zip(&rhs)
        .map(|(&l, &r)| {
            let scale = l.abs().max(r.abs());
            if scale > 0.0 {
                (l - r).abs() / scale
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    Ok(HudsonReport {
        lhs,
        rhs,
        max_residual,
        passed: max_residual < tol,
    })
}

/// `E[φ(Y)] − φ(μ)`, the gap between test error and risk.
pub fn jensen_gap(mu: &MeanVector, loss: &LossSpec, method: OracleMethod) -> Result<TruthEstimate> {
    let phi_mu: f64 = mu.iter().map(|&m| coord_phi(loss, m)).sum();
    match method {
        OracleMethod::Enumeration => {
            let mut value = 0.0;
            let mut deficit = 0.0;
            // φ is additive, so each coordinate is summed on its own
            for &m in mu.iter() {
                let s = super::support::poisson_support(m, DEFAULT_DEFICIT)?;
                value += s
                    .pmf
                    .iter()
                    .enumerate()
                    .map(|(k, q)| q * coord_phi(loss, k as f64))
                    .sum::<f64>()
                    - coord_phi(loss, m);
                deficit += s.deficit;
            }
            Ok(TruthEstimate {
                value,
                std_error: 0.0,
                method: TruthMethod::Enumeration,
                truncation_mass_deficit: deficit,
            })
        }
        OracleMethod::MonteCarlo { draws, seed } => {
            if draws < 2 {
                return Err(Error::param("R", "need at least two draws"));
            }
            let values: Vec<f64> = (0..draws)
                .into_par_iter()
                .map(|k| {
                    let y = poisson_vector(mu, &mut stream(seed, Domain::Oracle, k as u64));
                    y.iter().map(|&v| coord_phi(loss, v as f64)).sum::<f64>() - phi_mu
                })
                .collect();
            let (value, std_error) = mean_and_se(&values);
            Ok(TruthEstimate {
                value,
                std_error,
                method: TruthMethod::MonteCarlo,
                truncation_mass_deficit: 0.0,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::FnFit;

    fn mu(v: &[f64]) -> MeanVector {
        MeanVector::new(v.to_vec()).unwrap()
    }

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

    #[test]
    fn enum_identity_squared_is_two_mu() {
        let t = enum_truth(&mu(&[1.0]), &identity(), &LossSpec::squared(), 0.0).unwrap();
        assert!((t.value - 2.0).abs() < 1e-8);
        assert!(t.truncation_mass_deficit <= 1e-10);
        assert_eq!(t.std_error, 0.0);
    }

    #[test]
    fn mc_identity_squared() {
        let m = mu(&[1.0, 2.0, 0.5]);
        for p in [0.0, 0.3] {
            let t = mc_truth(&m, &identity(), &LossSpec::squared(), p, 40_000, 5).unwrap();
            let expect = 2.0 * (1.0 - p) * 3.5;
            assert!(
                (t.value - expect).abs() < 4.0 * t.std_error,
                "{} vs {expect} ± {}",
                t.value,
                t.std_error
            );
        }
        let zero = mc_truth(
            &mu(&[0.0, 0.0]),
            &identity(),
            &LossSpec::squared(),
            0.0,
            10,
            1,
        )
        .unwrap();
        assert_eq!(zero.value, 0.0);
    }

    #[test]
    fn hard_threshold_continuity_in_p() {
        let m = mu(&[1.0]);
        let g = hard(0.5);
        let a = enum_truth(&m, &g, &LossSpec::squared(), 0.0).unwrap().value;
        let b = enum_truth(&m, &g, &LossSpec::squared(), 1e-4)
            .unwrap()
            .value;
        assert!((a - b).abs() < 1e-3);
        // E[(Ỹ − Y)²] with Y = 0 mapped to 0 is unchanged since g(0) = 0 = Y
        assert!((a - 2.0).abs() < 1e-8);
    }

    #[test]
    fn enum_and_mc_agree() {
        let m = mu(&[1.0, 2.0]);
        for loss in [LossSpec::squared(), LossSpec::deviance()] {
            let e = enum_truth(&m, &hard(1.5), &loss, 0.2).unwrap();
            let mc = mc_truth(&m, &hard(1.5), &loss, 0.2, 50_000, 9).unwrap();
            assert!(
                (e.value - mc.value).abs() < 4.0 * mc.std_error,
                "{e:?} {mc:?}"
            );
        }
    }

    #[test]
    fn hudson_examples() {
        let r = hudson_check(&mu(&[2.0]), &identity(), 1e-8).unwrap();
        assert!((r.lhs[0] - 4.0).abs() < 1e-9 && (r.rhs[0] - 4.0).abs() < 1e-9);
        assert!(r.passed);
        let c = FnFit::new("const", |y: &[u64]| vec![1.7; y.len()]);
        assert!(hudson_check(&mu(&[0.8, 2.5]), &c, 1e-8).unwrap().passed);
        assert!(
            hudson_check(&mu(&[1.0, 2.0]), &hard(1.0), 1e-8)
                .unwrap()
                .passed
        );
    }

    #[test]
    fn jensen_examples() {
        let sq = jensen_gap(
            &mu(&[1.0, 2.0]),
            &LossSpec::squared(),
            OracleMethod::Enumeration,
        )
        .unwrap();
        assert!((sq.value - 3.0).abs() < 1e-9);
        let zero = jensen_gap(
            &mu(&[0.0]),
            &LossSpec::deviance(),
            OracleMethod::Enumeration,
        )
        .unwrap();
        assert_eq!(zero.value, 0.0);
        let dev = jensen_gap(
            &mu(&[1.0]),
            &LossSpec::deviance(),
            OracleMethod::Enumeration,
        )
        .unwrap();
        assert!(dev.value > 0.0);
        let mc = jensen_gap(
            &mu(&[1.0]),
            &LossSpec::deviance(),
            OracleMethod::MonteCarlo {
                draws: 100_000,
                seed: 3,
            },
        )
        .unwrap();
        assert!((mc.value - dev.value).abs() < 4.0 * mc.std_error);
    }
}
