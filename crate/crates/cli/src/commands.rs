//! Subcommand definitions and their drivers.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use cbpois::rng::{derive_seed, poisson_vector, stream, Domain};
use cbpois::zoo::{
    phantom, tv_denoise, BinGrid, EbOneStep, Identity, ImageGrid, LinearShrinkage, Threshold,
    TvSettings,
};
use cbpois::{
    cb_estimate, ue_estimate, ue_sampled, CountVector, ErrorEstimate, FitAlgorithm, MeanVector,
    DEFAULT_PAD,
};

use crate::config::{load_config, LossName};
use crate::io::{self, num, Table};
use crate::simulate::{method_str, run_simulation, summarize};
use crate::sweep::{
    cb_sweep, line_grid, log_grid, product_grid, pspline_family, tv_family, SweepResult, TruthSpec,
};
use crate::verify::{run_suite, Suite};

#[derive(Debug, Parser)]
#[command(
    name = "cbpois",
    version,
    about = "Test-error estimation for Poisson count models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the test error of one algorithm on a counts file.
    Estimate(EstimateArgs),
    /// Run a simulation described by a JSON config.
    Simulate(SimulateArgs),
    /// Sweep a tuning parameter on a counts file and pick the CB minimizer.
    Tune(TuneArgs),
    /// Total-variation denoising of a count image.
    Denoise(DenoiseArgs),
    /// Lindsey P-spline density estimation with CB-selected smoothing.
    Density(DensityArgs),
    /// Run a built-in self-check suite.
    Verify(VerifyArgs),
}

fn parse_p(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if p > 0.0 && p < 1.0 {
        Ok(p)
    } else {
        Err(format!("p must lie in (0, 1), got {p}"))
    }
}

fn parse_pad(s: &str) -> Result<f64, String> {
    let c: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if c > 0.0 && c.is_finite() {
        Ok(c)
    } else {
        Err(format!("pad constant must be positive, got {c}"))
    }
}

/// Flags shared by the estimation commands.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Loss function(s); repeat or comma-separate for several.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub loss: Vec<LossName>,
    /// Binomial thinning probability.
    #[arg(long, default_value_t = 0.1, value_parser = parse_p)]
    pub p: f64,
    /// Number of bootstrap draws.
    #[arg(long = "B", default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub b: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path (CSV unless stated otherwise).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replacement for zero fits inside the deviance log.
    #[arg(long = "pad-c", default_value_t = DEFAULT_PAD, value_parser = parse_pad)]
    pub pad_c: f64,
}

impl Common {
    fn losses_or(&self, default: &[LossName]) -> Vec<LossName> {
        if self.loss.is_empty() {
            default.to_vec()
        } else {
            self.loss.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Identity,
    LinearShrinkage,
    SoftThreshold,
    HardThreshold,
    Eb,
}

impl Family {
    fn name(self) -> &'static str {
        match self {
            Family::Identity => "identity",
            Family::LinearShrinkage => "weight",
            Family::SoftThreshold | Family::HardThreshold => "lambda",
            Family::Eb => "h",
        }
    }

    fn build(self, param: Option<f64>) -> anyhow::Result<Box<dyn FitAlgorithm>> {
        let need =
            || param.ok_or_else(|| anyhow::anyhow!("--param is required for this algorithm"));
        Ok(match self {
            Family::Identity => Box::new(Identity),
            Family::LinearShrinkage => Box::new(LinearShrinkage {
                weight: param.unwrap_or(0.8),
            }),
            Family::SoftThreshold => Box::new(Threshold::soft(need()?)),
            Family::HardThreshold => Box::new(Threshold::hard(need()?)),
            Family::Eb => {
                let h = param.unwrap_or(0.85);
                anyhow::ensure!(h > 0.0, "bandwidth must be positive");
                Box::new(EbOneStep { h })
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Cb,
    Ue,
    UeSs,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Counts file: one nonnegative integer per line.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "identity")]
    pub algorithm: Family,
    /// Tuning parameter of the algorithm (weight, threshold or bandwidth).
    #[arg(long)]
    pub param: Option<f64>,
    #[arg(long, value_enum, default_value = "cb")]
    pub method: MethodArg,
    /// Subsample size for `ue-ss`.
    #[arg(long, default_value_t = 100)]
    pub m: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's output path; stdout when neither is set.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub family: Family,
    /// Grid of parameter values, comma-separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub grid: Vec<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    /// Input image (ASCII PGM); pixel values are the counts.
    #[arg(long, conflicts_with = "phantom")]
    pub input: Option<PathBuf>,
    /// Generate an N×N phantom and draw Poisson counts from it with --seed.
    #[arg(long)]
    pub phantom: Option<usize>,
    /// Largest phantom intensity.
    #[arg(long, default_value_t = 20.0)]
    pub peak: f64,
    /// Fixed TV weight.
    #[arg(long, conflicts_with = "tune")]
    pub tau: Option<f64>,
    /// Choose τ by CB over --taus.
    #[arg(long)]
    pub tune: bool,
    #[arg(long, value_delimiter = ',')]
    pub taus: Vec<f64>,
    #[arg(long, default_value_t = 1e-5)]
    pub rho: f64,
    /// Monte Carlo draws for a truth column (phantom input only).
    #[arg(long, default_value_t = 0)]
    pub truth_draws: usize,
    /// Where to write the sweep CSV (default: next to --out).
    #[arg(long)]
    pub sweep_out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PenaltyMode {
    Isotropic,
    Anisotropic,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    /// Samples: one or two reals per line.
    #[arg(long)]
    pub input: PathBuf,
    /// Bins per axis.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Knots per axis.
    #[arg(long, default_value_t = 10)]
    pub knots: usize,
    #[arg(long, value_enum, default_value = "isotropic")]
    pub mode: PenaltyMode,
    /// Penalty grid (first axis under anisotropic mode).
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Vec<f64>,
    /// Second-axis grid under anisotropic mode (default: --lambdas).
    #[arg(long, value_delimiter = ',')]
    pub lambdas2: Vec<f64>,
    #[arg(long)]
    pub sweep_out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub suite: Suite,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON report path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs a parsed command; returns the process exit code.
pub fn run(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Estimate(a) => estimate(&a),
        Command::Simulate(a) => simulate(&a),
        Command::Tune(a) => tune(&a),
        Command::Denoise(a) => denoise(&a),
        Command::Density(a) => density(&a),
        Command::Verify(a) => verify(&a),
    }
}

fn emit(table: &Table, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(path) => table.save(path),
        None => table.write_to(std::io::stdout().lock()),
    }
}

/// `a.csv` → `a_<suffix>.csv` (or `a_<suffix>.<ext>` for other extensions).
fn sibling(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

fn estimate(a: &EstimateArgs) -> anyhow::Result<i32> {
    let y = CountVector::new(io::read_counts(&a.input)?)?;
    let g = a.algorithm.build(a.param)?;
    let c = &a.common;
    let n = y.len() as f64;
    let mut table = Table::new(&[
        "method",
        "algorithm",
        "loss",
        "p",
        "B",
        "seed",
        "n",
        "estimate",
        "se",
        "n_padded_summands",
        "fit_calls",
    ]);
    for loss in c.losses_or(&[LossName::Squared]) {
        let spec = loss.spec(c.pad_c)?;
        let est: ErrorEstimate = match a.method {
            MethodArg::Cb => cb_estimate(&y, &g, &spec, c.p, c.b as usize, c.seed)?,
            MethodArg::Ue => ue_estimate(&y, &g, &spec)?,
            MethodArg::UeSs => ue_sampled(&y, &g, &spec, a.m.min(y.len()), c.seed)?,
        };
        let is_cb = a.method == MethodArg::Cb;
        println!(
            "{} {} value={} se={} n_padded_summands={}",
            est.config.method.as_str(),
            loss.as_str(),
            est.value / n,
            est.std_error / n,
            est.n_padded_summands
        );
        table.push(vec![
            est.config.method.as_str().into(),
            g.name(),
            loss.as_str().into(),
            if is_cb { num(c.p) } else { String::new() },
            if is_cb {
                c.b.to_string()
            } else {
                String::new()
            },
            c.seed.to_string(),
            y.len().to_string(),
            num(est.value / n),
            num(est.std_error / n),
            est.n_padded_summands.to_string(),
            est.fit_calls.to_string(),
        ]);
    }
    if let Some(out) = &c.out {
        table.save(out)?;
    }
    Ok(0)
}

fn simulate(a: &SimulateArgs) -> anyhow::Result<i32> {
    let cfg = load_config(&a.config)?;
    let out = run_simulation(&cfg)?;
    let path = a.out.clone().or_else(|| cfg.output.clone());
    emit(&out.table(), path.as_deref())?;
    if path.is_some() {
        eprintln!("n={} snr={:.3} p={:?}", out.n, out.snr, out.p_values);
        for &method in &cfg.methods {
            for &loss in &cfg.losses {
                let ps: Vec<Option<f64>> = if method == crate::config::MethodName::Cb {
                    out.p_values.iter().map(|&p| Some(p)).collect()
                } else {
                    vec![None]
                };
                for p in ps {
                    let cell = out.cell(method, p, loss);
                    if cell.len() < 2 {
                        continue;
                    }
                    let vals: Vec<f64> = cell.iter().map(|r| r.estimate).collect();
                    let (mean, sd, _) = summarize(&vals);
                    eprintln!(
                        "{:>5} {:>8} p={:<6} mean={mean:.5} sd={sd:.5} truth={:.5}",
                        method_str(method),
                        loss.as_str(),
                        p.map_or("-".to_string(), |p| p.to_string()),
                        cell[0].truth
                    );
                }
            }
        }
    }
    Ok(0)
}

fn print_argmins(sweep: &SweepResult, losses: &[LossName]) {
    for &loss in losses {
        if let Some(r) = sweep.argmin_row(loss) {
            let params: Vec<String> = r.params.iter().map(|v| v.to_string()).collect();
            println!(
                "argmin {}: {}={} estimate={} se={}",
                loss.as_str(),
                sweep.param_names.join(","),
                params.join(","),
                r.estimate,
                r.se
            );
        }
    }
}

fn tune(a: &TuneArgs) -> anyhow::Result<i32> {
    let y = CountVector::new(io::read_counts(&a.input)?)?;
    let c = &a.common;
    let losses = c.losses_or(&[LossName::Squared, LossName::Deviance]);
    let family = a.family;
    let sweep = cb_sweep(
        &y,
        &[family.name()],
        &line_grid(&a.grid),
        |p: &[f64]| family.build(Some(p[0])),
        &losses,
        c.pad_c,
        c.p,
        c.b as usize,
        c.seed,
        None,
    )?;
    print_argmins(&sweep, &losses);
    emit(&sweep.table(), c.out.as_deref())?;
    Ok(0)
}

/// Default τ grid for the denoiser.
pub fn default_taus() -> Vec<f64> {
    log_grid(0.05, 12.8, 9)
}

fn denoise(a: &DenoiseArgs) -> anyhow::Result<i32> {
    let c = &a.common;
    let (img, truth_mu) = match (&a.input, a.phantom) {
        (Some(path), _) => (io::read_pgm(path)?, None),
        (None, Some(n)) => {
            anyhow::ensure!(n >= 2, "phantom size must be at least 2");
            anyhow::ensure!(a.peak > 0.0, "peak must be positive");
            let mu = phantom(n, a.peak);
            let counts = poisson_vector(&mu, &mut stream(c.seed, Domain::Data, 0));
            (ImageGrid::square(n, counts)?, Some(MeanVector::new(mu)?))
        }
        (None, None) => anyhow::bail!("give --input or --phantom"),
    };
    anyhow::ensure!(a.rho > 0.0, "rho must be positive");
    let out = c
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("denoised.pgm"));
    let losses = c.losses_or(&[LossName::Squared, LossName::Deviance]);
    let tau = if a.tune {
        let taus = if a.taus.is_empty() {
            default_taus()
        } else {
            a.taus.clone()
        };
        let y = CountVector::new(img.counts.clone())?;
        let truth = match (&truth_mu, a.truth_draws) {
            (Some(mu), r) if r >= 2 => Some(TruthSpec {
                mu: mu.clone(),
                p: 0.0,
                draws: r,
                seed: derive_seed(c.seed, Domain::Truth, 0),
            }),
            _ => None,
        };
        let sweep = cb_sweep(
            &y,
            &["tau"],
            &line_grid(&taus),
            tv_family(img.width, img.height, a.rho),
            &losses,
            c.pad_c,
            c.p,
            c.b as usize,
            derive_seed(c.seed, Domain::Bootstrap, 0),
            truth.as_ref(),
        )?;
        print_argmins(&sweep, &losses);
        let sweep_path = a
            .sweep_out
            .clone()
            .unwrap_or_else(|| sibling(&out, "_sweep", "csv"));
        sweep.table().save(&sweep_path)?;
        sweep
            .argmin_row(losses[0])
            .map(|r| r.params[0])
            .ok_or_else(|| anyhow::anyhow!("every sweep point failed"))?
    } else {
        a.tau
            .ok_or_else(|| anyhow::anyhow!("give --tau or --tune"))?
    };
    let settings = TvSettings {
        rho: a.rho,
        ..TvSettings::default()
    };
    let res = tv_denoise(&img, tau, &settings)?;
    io::write_text(&out, &io::format_pgm(img.width, img.height, &res.image))?;
    let mut t = Table::new(&["row", "col", "count", "value"]);
    for (k, v) in res.image.iter().enumerate() {
        t.push(vec![
            (k / img.width).to_string(),
            (k % img.width).to_string(),
            img.counts[k].to_string(),
            num(*v),
        ]);
    }
    t.save(&sibling(&out, "", "csv"))?;
    println!(
        "tau={tau} objective={} iterations={} converged={}",
        res.objective, res.iterations, res.converged
    );
    Ok(0)
}

/// Default penalty grid for the density command.
pub fn default_lambdas() -> Vec<f64> {
    log_grid(0.01, 1000.0, 11)
}

/// Result of the density command: the sweep and the selected fits.
pub struct DensityRun {
    pub grid: BinGrid,
    pub counts: Vec<u64>,
    pub sweep: SweepResult,
    /// Per loss: selected parameters and the density at each bin.
    pub selected: Vec<(LossName, Vec<f64>, Vec<f64>)>,
}

#[allow(clippy::too_many_arguments)]
pub fn run_density(
    samples: &[Vec<f64>],
    bins: usize,
    knots: usize,
    mode: PenaltyMode,
    lambdas: &[f64],
    lambdas2: &[f64],
    losses: &[LossName],
    pad_c: f64,
    p: f64,
    b: usize,
    seed: u64,
) -> anyhow::Result<DensityRun> {
    let grid = BinGrid::covering(samples, bins)?;
    let counts = grid.counts(samples)?;
    let y = CountVector::new(counts.clone())?;
    let (names, points): (Vec<&str>, Vec<Vec<f64>>) = match mode {
        PenaltyMode::Isotropic => (vec!["lambda"], line_grid(lambdas)),
        PenaltyMode::Anisotropic => {
            anyhow::ensure!(
                grid.dims() == 2,
                "anisotropic mode needs two-dimensional samples"
            );
            let second = if lambdas2.is_empty() {
                lambdas
            } else {
                lambdas2
            };
            (vec!["lambda1", "lambda2"], product_grid(lambdas, second))
        }
    };
    let family = pspline_family(grid.clone(), knots);
    let sweep = cb_sweep(
        &y, &names, &points, &family, losses, pad_c, p, b, seed, None,
    )?;
    let mut selected = Vec::new();
    for &loss in losses {
        let row = sweep
            .argmin_row(loss)
            .ok_or_else(|| anyhow::anyhow!("every sweep point failed for {}", loss.as_str()))?;
        let fit = family(&row.params)?.fit(&counts);
        let total: f64 = fit.iter().sum();
        let volume: f64 = (0..grid.dims())
            .map(|d| (grid.hi[d] - grid.lo[d]) / grid.bins as f64)
            .product();
        let density = fit.iter().map(|m| m / (total * volume)).collect();
        selected.push((loss, row.params.clone(), density));
    }
    Ok(DensityRun {
        grid,
        counts,
        sweep,
        selected,
    })
}

fn density(a: &DensityArgs) -> anyhow::Result<i32> {
    let c = &a.common;
    let samples = io::read_samples(&a.input)?;
    let dims = samples[0].len();
    let bins = a.bins.unwrap_or(if dims == 1 { 50 } else { 30 });
    let lambdas = if a.lambdas.is_empty() {
        default_lambdas()
    } else {
        a.lambdas.clone()
    };
    let losses = c.losses_or(&[LossName::Squared, LossName::Deviance]);
    let run = run_density(
        &samples,
        bins,
        a.knots,
        a.mode,
        &lambdas,
        &a.lambdas2,
        &losses,
        c.pad_c,
        c.p,
        c.b as usize,
        c.seed,
    )?;
    print_argmins(&run.sweep, &losses);
    let out = c
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("density.csv"));
    let mut header = vec!["bin".to_string()];
    let axes: Vec<Vec<f64>> = (0..dims).map(|d| run.grid.centers(d)).collect();
    header.extend((0..dims).map(|d| format!("x{}", d + 1)));
    header.push("count".into());
    header.extend(losses.iter().map(|l| format!("density_{}", l.as_str())));
    let mut t = Table {
        header,
        rows: Vec::new(),
    };
    for k in 0..run.grid.len() {
        let mut rec = vec![k.to_string()];
        if dims == 1 {
            rec.push(num(axes[0][k]));
        } else {
            rec.push(num(axes[0][k / run.grid.bins]));
            rec.push(num(axes[1][k % run.grid.bins]));
        }
        rec.push(run.counts[k].to_string());
        rec.extend(run.selected.iter().map(|(_, _, d)| num(d[k])));
        t.push(rec);
    }
    t.save(&out)?;
    let sweep_path = a
        .sweep_out
        .clone()
        .unwrap_or_else(|| sibling(&out, "_sweep", "csv"));
    run.sweep.table().save(&sweep_path)?;
    Ok(0)
}

fn verify(a: &VerifyArgs) -> anyhow::Result<i32> {
    let report = run_suite(a.suite, a.seed)?;
    match &a.out {
        Some(path) => io::write_json(path, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    for c in report.failures() {
        eprintln!(
            "FAILED {}: value {} vs {} (tol {})",
            c.name, c.value, c.reference, c.tolerance
        );
    }
    eprintln!(
        "suite {}: {}",
        report.suite,
        if report.passed { "passed" } else { "FAILED" }
    );
    Ok(if report.passed { 0 } else { 1 })
}
