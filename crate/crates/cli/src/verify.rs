//! Self-check suites with machine-readable reports.

use cbpois::oracle::{bound_rhs, enum_truth, hudson_check, mc_truth, BoundConfig, BoundKind};
use cbpois::rng::{derive_seed, poisson_vector, stream, Domain};
use cbpois::thinning::binomial_thin;
use cbpois::zoo::{Constant, EbOneStep, Identity, LinearShrinkage, Threshold};
use cbpois::{
    cb_estimate, cb_from_draws, cb_infinite_exact, draw_coupled_bootstrap, illdef_probability,
    ue_estimate, CountVector, FitAlgorithm, LossSpec, MeanVector,
};
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Hudson,
    Limit,
    Thinning,
    Illdef,
    Bounds,
}

impl Suite {
    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Hudson => "hudson",
            Suite::Limit => "limit",
            Suite::Thinning => "thinning",
            Suite::Illdef => "illdef",
            Suite::Bounds => "bounds",
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// What `value` is compared against (a bound, target or tolerance).
    pub reference: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct VerifyReport {
    pub suite: String,
    pub passed: bool,
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    fn new(suite: Suite, seed: u64, checks: Vec<Check>) -> Self {
        Self {
            suite: suite.as_str().into(),
            passed: checks.iter().all(|c| c.passed),
            seed,
            checks,
        }
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> anyhow::Result<VerifyReport> {
    let checks = match suite {
        Suite::Hudson => hudson_checks()?,
        Suite::Limit => limit_checks()?,
        Suite::Thinning => thinning_checks(&[0.5, 2.0, 5.0], &[0.1, 0.3], 200_000, seed)?,
        Suite::Illdef => illdef_checks(&[1.0], &[0.1], 1_000_000, seed)?,
        Suite::Bounds => bound_checks(seed)?,
    };
    Ok(VerifyReport::new(suite, seed, checks))
}

/// Hudson's identity on small problems, residual below `1e-8`.
pub fn hudson_checks() -> anyhow::Result<Vec<Check>> {
    let cases: Vec<(Vec<f64>, Box<dyn FitAlgorithm>)> = vec![
        (vec![1.0, 2.0], Box::new(Identity)),
        (vec![3.0], Box::new(Identity)),
        (vec![1.0, 2.0], Box::new(Constant(vec![0.7, 1.3]))),
        (vec![1.0, 2.0], Box::new(Threshold::hard(1.5))),
        (vec![0.5, 3.0], Box::new(Threshold::hard(2.0))),
        (vec![1.0, 2.0], Box::new(LinearShrinkage::default())),
        (vec![3.0, 0.5], Box::new(LinearShrinkage::default())),
    ];
    let tol = 1e-8;
    cases
        .iter()
        .map(|(mu, g)| {
            let r = hudson_check(&MeanVector::new(mu.clone())?, g, tol)?;
            Ok(Check {
                name: format!("{} mu={mu:?}", g.name()),
                value: r.max_residual,
                reference: 0.0,
                tolerance: tol,
                passed: r.max_residual < tol,
            })
        })
        .collect()
}

/// Fixtures for the noiseless-limit check: counts, algorithm, loss.
pub fn limit_fixtures() -> Vec<(Vec<u64>, Box<dyn FitAlgorithm>, LossSpec)> {
    vec![
        (
            vec![2, 3],
            Box::new(Threshold::hard(1.5)),
            LossSpec::squared(),
        ),
        (
            vec![2, 3],
            Box::new(Threshold::hard(1.5)),
            LossSpec::deviance(),
        ),
        (
            vec![1, 4, 0],
            Box::new(LinearShrinkage::default()),
            LossSpec::deviance(),
        ),
        (
            vec![3, 1, 2],
            Box::new(EbOneStep::default()),
            LossSpec::squared(),
        ),
    ]
}

/// `|CB∞_p − UE|` at `p = 10⁻², 10⁻³, 10⁻⁴`; successive ratios in `[8, 12]`.
pub fn limit_checks() -> anyhow::Result<Vec<Check>> {
    let mut out = Vec::new();
    for (y, g, loss) in limit_fixtures() {
        let y = CountVector::new(y)?;
        let ue = ue_estimate(&y, &g, &loss)?.value;
        let gaps = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&p| Ok((cb_infinite_exact(&y, &g, &loss, p)? - ue).abs()))
            .collect::<anyhow::Result<Vec<f64>>>()?;
        for (k, w) in gaps.windows(2).enumerate() {
            let ratio = w[0] / w[1];
            out.push(Check {
                name: format!(
                    "{} {} y={:?} ratio {}",
                    g.name(),
                    loss.kind.as_str(),
                    y.as_slice(),
                    k + 1
                ),
                value: ratio,
                reference: 10.0,
                tolerance: 2.0,
                passed: (8.0..=12.0).contains(&ratio),
            });
        }
    }
    Ok(out)
}

fn ln_pois(mu: f64, k: u64) -> f64 {
    k as f64 * mu.ln() - mu - ln_gamma(k as f64 + 1.0)
}

/// Exact joint pmf of `(Y*, ω)` against `Pois((1−p)μ) ⊗ Pois(pμ)` (max
/// relative error below `1e-10` over cells with mass above `1e-300`), plus
/// Monte Carlo means of `Y*` and `Y†` within 4 SE of `(1−p)μ`.
pub fn thinning_checks(
    mus: &[f64],
    ps: &[f64],
    draws: usize,
    seed: u64,
) -> anyhow::Result<Vec<Check>> {
    let mut out = Vec::new();
    for (a, &mu) in mus.iter().enumerate() {
        for (b, &p) in ps.iter().enumerate() {
            let kmax = (mu + 40.0 * mu.sqrt() + 40.0) as u64;
            let mut worst = 0.0f64;
            for s in 0..=kmax {
                for w in 0..=kmax {
                    let y = s + w;
                    let ln_joint = ln_pois(mu, y) + ln_gamma(y as f64 + 1.0)
                        - ln_gamma(s as f64 + 1.0)
                        - ln_gamma(w as f64 + 1.0)
                        + w as f64 * p.ln()
                        + s as f64 * (-p).ln_1p();
                    let ln_prod = ln_pois((1.0 - p) * mu, s) + ln_pois(p * mu, w);
                    if ln_prod < -690.0 {
                        continue;
                    }
                    worst = worst.max((ln_joint - ln_prod).exp_m1().abs());
                }
            }
            out.push(Check {
                name: format!("joint pmf mu={mu} p={p}"),
                value: worst,
                reference: 0.0,
                tolerance: 1e-10,
                passed: worst < 1e-10,
            });
            let mut rng = stream(seed, Domain::Other(17), (a * ps.len() + b) as u64);
            let y = poisson_vector(&vec![mu; draws], &mut rng);
            let pair = binomial_thin(&y, p, &mut rng)?;
            let target = (1.0 - p) * mu;
            for (label, vals) in [
                (
                    "Y*",
                    pair.y_star.iter().map(|&v| v as f64).collect::<Vec<_>>(),
                ),
                ("Y-dagger", pair.y_dagger.clone()),
            ] {
                let (mean, se) = cbpois::mean_and_se(&vals);
                out.push(Check {
                    name: format!("mean of {label} mu={mu} p={p}"),
                    value: mean,
                    reference: target,
                    tolerance: 4.0 * se,
                    passed: (mean - target).abs() <= 4.0 * se,
                });
            }
        }
    }
    Ok(out)
}

/// Frequencies of padded deviance summands for the identity fit, over
/// `draws` coordinates of constant mean: CB pads when `Y* = 0, ω ≥ 1`, UE
/// when `Y = 1`. Each is compared with its closed form within 4 SE.
pub fn illdef_checks(
    mus: &[f64],
    ps: &[f64],
    draws: usize,
    seed: u64,
) -> anyhow::Result<Vec<Check>> {
    let loss = LossSpec::deviance();
    let nf = draws as f64;
    let mut out = Vec::new();
    for (a, &mu) in mus.iter().enumerate() {
        let y = CountVector::new(poisson_vector(
            &vec![mu; draws],
            &mut stream(seed, Domain::Data, a as u64),
        ))?;
        let ue_freq = ue_estimate(&y, &Identity, &loss)?.n_padded_summands as f64 / nf;
        let (ue_target, _) = illdef_probability(mu, 0.5)?;
        let se = (ue_target * (1.0 - ue_target) / nf).sqrt();
        out.push(Check {
            name: format!("UE padded frequency mu={mu}"),
            value: ue_freq,
            reference: ue_target,
            tolerance: 4.0 * se,
            passed: (ue_freq - ue_target).abs() <= 4.0 * se,
        });
        for (b, &p) in ps.iter().enumerate() {
            let draws_seed = derive_seed(seed, Domain::Bootstrap, (a * ps.len() + b) as u64);
            let bs = draw_coupled_bootstrap(&y, p, 1, draws_seed)?;
            let cb_freq = cb_from_draws(&bs, &Identity, &loss)?.n_padded_summands as f64 / nf;
            let (_, cb_target) = illdef_probability(mu, p)?;
            let se = (cb_target * (1.0 - cb_target) / nf).sqrt();
            out.push(Check {
                name: format!("CB padded frequency mu={mu} p={p}"),
                value: cb_freq,
                reference: cb_target,
                tolerance: 4.0 * se,
                passed: (cb_freq - cb_target).abs() <= 4.0 * se,
            });
        }
    }
    Ok(out)
}

/// The bias bound by enumeration on constant-mean linear shrinkage, and
/// the reducible-variance bound against a direct estimate on one design.
pub fn bound_checks(seed: u64) -> anyhow::Result<Vec<Check>> {
    let g = LinearShrinkage::default();
    let cfg = BoundConfig {
        seed,
        ..BoundConfig::default()
    };
    let mut out = Vec::new();
    for loss in [LossSpec::squared(), LossSpec::deviance()] {
        let mu = MeanVector::constant(2, 1.5)?;
        let err = enum_truth(&mu, &g, &loss, 0.0)?.value;
        for p in [0.05, 0.1, 0.3, 0.5] {
            let gap = (enum_truth(&mu, &g, &loss, p)?.value - err).abs();
            let rhs = bound_rhs(BoundKind::Bias, &mu, &g, &loss, p, 1, &cfg)?;
            out.push(Check {
                name: format!("bias bound {} p={p}", loss.kind.as_str()),
                value: gap,
                reference: rhs.value,
                tolerance: 4.0 * rhs.std_error,
                passed: gap <= rhs.value + 4.0 * rhs.std_error,
            });
        }
    }
    // reducible variance: spread of CB over bootstrap seeds at fixed Y,
    // averaged over a few data draws, against the bound
    let mu = MeanVector::constant(20, 3.0)?;
    let loss = LossSpec::squared();
    let (p, b) = (0.1, 32);
    let mut rvar = 0.0;
    let outer = 40;
    for o in 0..outer {
        let y = CountVector::new(poisson_vector(&mu, &mut stream(seed, Domain::Data, o)))?;
        let vals = (0..40)
            .map(|j| {
                Ok(cb_estimate(
                    &y,
                    &g,
                    &loss,
                    p,
                    b,
                    derive_seed(seed, Domain::Oracle, o * 1000 + j),
                )?
                .value)
            })
            .collect::<anyhow::Result<Vec<f64>>>()?;
        let (_, se) = cbpois::mean_and_se(&vals);
        rvar += se * se * vals.len() as f64 / outer as f64;
    }
    let rhs = bound_rhs(BoundKind::ReducibleVar, &mu, &g, &loss, p, b, &cfg)?;
    out.push(Check {
        name: format!("reducible variance bound n=20 mu=3 B={b}"),
        value: rvar,
        reference: rhs.value,
        tolerance: 0.1 * rhs.value,
        passed: rvar <= 1.1 * rhs.value,
    });
    // sanity: the Monte Carlo truth agrees with enumeration on a tiny design
    let small = MeanVector::new(vec![1.0, 2.0])?;
    let e = enum_truth(&small, &g, &loss, 0.1)?.value;
    let m = mc_truth(&small, &g, &loss, 0.1, 20_000, seed)?;
    out.push(Check {
        name: "mc truth vs enumeration".into(),
        value: m.value,
        reference: e,
        tolerance: 4.0 * m.std_error,
        passed: (m.value - e).abs() <= 4.0 * m.std_error,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hudson_and_limit_suites_pass() {
        assert!(run_suite(Suite::Hudson, 0).unwrap().passed);
        let r = run_suite(Suite::Limit, 0).unwrap();
        assert!(r.passed, "{:?}", r.failures());
    }

    #[test]
    fn thinning_pmf_is_exact() {
        let checks = thinning_checks(&[2.0], &[0.3], 2000, 1).unwrap();
        assert!(
            checks[0].passed && checks[0].value < 1e-10,
            "{:?}",
            checks[0]
        );
    }

    #[test]
    fn illdef_target() {
        let (_, cb) = illdef_probability(1.0, 0.1).unwrap();
        assert!((cb - 0.0387).abs() < 1e-4);
        let checks = illdef_checks(&[1.0], &[0.1], 200_000, 3).unwrap();
        assert!(checks.iter().all(|c| c.passed), "{checks:?}");
    }
}
