//! Repeated-draw comparison of CB, UE and UE_ss against Monte Carlo truths.

use cbpois::oracle::{mc_truth_multi, TruthEstimate};
use cbpois::rng::{derive_seed, poisson_vector, stream, Domain};
use cbpois::{
    cb_from_draws_multi, choose_p, draw_coupled_bootstrap, ue_estimate_multi, ue_sampled_multi,
    CountVector, FitAlgorithm, LossSpec,
};

use crate::config::{ExperimentConfig, LossName, MethodName, PRule};
use crate::design::{build_algorithm, build_design};
use crate::io::{num, Table};

/// Column order of the simulate CSV.
pub const SIM_HEADER: [&str; 12] = [
    "repetition",
    "method",
    "p",
    "loss",
    "estimate",
    "se",
    "truth",
    "truth_se",
    "err",
    "err_se",
    "err_p",
    "err_p_se",
];

/// One estimate, already divided by `n`. Missing values are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRow {
    pub repetition: usize,
    pub method: MethodName,
    pub p: f64,
    pub loss: LossName,
    pub estimate: f64,
    pub se: f64,
    pub truth: f64,
    pub truth_se: f64,
    pub err: f64,
    pub err_se: f64,
    pub err_p: f64,
    pub err_p_se: f64,
}

pub fn method_str(m: MethodName) -> &'static str {
    match m {
        MethodName::Cb => "cb",
        MethodName::Ue => "ue",
        MethodName::UeSs => "ue_ss",
    }
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub rows: Vec<SimRow>,
    pub p_values: Vec<f64>,
    pub n: usize,
    pub snr: f64,
}

impl SimOutput {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&SIM_HEADER);
        for r in &self.rows {
            t.push(vec![
                r.repetition.to_string(),
                method_str(r.method).into(),
                num(r.p),
                r.loss.as_str().into(),
                num(r.estimate),
                num(r.se),
                num(r.truth),
                num(r.truth_se),
                num(r.err),
                num(r.err_se),
                num(r.err_p),
                num(r.err_p_se),
            ]);
        }
        t
    }

    /// Estimates of one (method, p, loss) cell across repetitions.
    pub fn cell(&self, method: MethodName, p: Option<f64>, loss: LossName) -> Vec<&SimRow> {
        self.rows
            .iter()
            .filter(|r| r.method == method && r.loss == loss && p.is_none_or(|p| r.p == p))
            .collect()
    }
}

type Truths = Vec<Option<TruthEstimate>>;

fn truths<G: FitAlgorithm + ?Sized>(
    cfg: &ExperimentConfig,
    mu: &cbpois::MeanVector,
    g: &G,
    losses: &[LossSpec],
    p: f64,
    index: u64,
) -> anyhow::Result<Truths> {
    if cfg.truth_draws == 0 || cfg.repetitions == 0 {
        return Ok(vec![None; losses.len()]);
    }
    let seed = derive_seed(cfg.seed, Domain::Truth, index);
    Ok(mc_truth_multi(mu, g, losses, p, cfg.truth_draws, seed)?
        .into_iter()
        .map(Some)
        .collect())
}

fn value(t: &Option<TruthEstimate>, n: f64) -> (f64, f64) {
    t.as_ref()
        .map_or((f64::NAN, f64::NAN), |t| (t.value / n, t.std_error / n))
}

pub fn run_simulation(cfg: &ExperimentConfig) -> anyhow::Result<SimOutput> {
    cfg.validate()?;
    let design = build_design(&cfg.design, cfg.design_seed)?;
    let g = build_algorithm(&cfg.algorithm, &design)?;
    let n = design.mu.len();
    let nf = n as f64;
    let losses: Vec<LossSpec> = cfg
        .losses
        .iter()
        .map(|l| l.spec(cfg.pad_c))
        .collect::<anyhow::Result<_>>()?;
    let p_values = match cfg.p_rule {
        Some(PRule::Choose) => vec![choose_p(&design.mu)?],
        None => cfg.p.clone(),
    };
    let wants = |m| cfg.methods.contains(&m);
    let err_truth = truths(cfg, &design.mu, &g, &losses, 0.0, 0)?;
    let err_p_truth: Vec<Truths> = if wants(MethodName::Cb) {
        p_values
            .iter()
            .enumerate()
            .map(|(k, &p)| truths(cfg, &design.mu, &g, &losses, p, k as u64 + 1))
            .collect::<anyhow::Result<_>>()?
    } else {
        Vec::new()
    };

    let mut rows = Vec::new();
    for rep in 0..cfg.repetitions {
        let y = CountVector::new(poisson_vector(
            &design.mu,
            &mut stream(cfg.seed, Domain::Data, rep as u64),
        ))?;
        let mut push = |method,
                        p: f64,
                        l: usize,
                        est: &cbpois::ErrorEstimate,
                        truth: (f64, f64),
                        err_p: (f64, f64)| {
            let err = value(&err_truth[l], nf);
            rows.push(SimRow {
                repetition: rep,
                method,
                p,
                loss: cfg.losses[l],
                estimate: est.value / nf,
                se: est.std_error / nf,
                truth: truth.0,
                truth_se: truth.1,
                err: err.0,
                err_se: err.1,
                err_p: err_p.0,
                err_p_se: err_p.1,
            });
        };
        for &method in &cfg.methods {
            match method {
                MethodName::Cb => {
                    let rep_seed = derive_seed(cfg.seed, Domain::Bootstrap, rep as u64);
                    for (k, &p) in p_values.iter().enumerate() {
                        let draws = draw_coupled_bootstrap(
                            &y,
                            p,
                            cfg.b,
                            derive_seed(rep_seed, Domain::Bootstrap, k as u64),
                        )?;
                        let ests = cb_from_draws_multi(&draws, &g, &losses)?;
                        for (l, est) in ests.iter().enumerate() {
                            let tp = value(&err_p_truth[k][l], nf);
                            push(method, p, l, est, tp, tp);
                        }
                    }
                }
                MethodName::Ue => {
                    for (l, est) in ue_estimate_multi(&y, &g, &losses)?.iter().enumerate() {
                        let t = value(&err_truth[l], nf);
                        push(method, f64::NAN, l, est, t, (f64::NAN, f64::NAN));
                    }
                }
                MethodName::UeSs => {
                    let seed = derive_seed(cfg.seed, Domain::Subsample, rep as u64);
                    for (l, est) in ue_sampled_multi(&y, &g, &losses, cfg.m, seed)?
                        .iter()
                        .enumerate()
                    {
                        let t = value(&err_truth[l], nf);
                        push(method, f64::NAN, l, est, t, (f64::NAN, f64::NAN));
                    }
                }
            }
        }
    }
    Ok(SimOutput {
        rows,
        p_values,
        n,
        snr: design.snr(),
    })
}

/// Mean, standard deviation and standard error of a sample.
pub fn summarize(values: &[f64]) -> (f64, f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
    (mean, var.sqrt(), (var / k).sqrt())
}
