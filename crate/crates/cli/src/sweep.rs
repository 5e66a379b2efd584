//! Tuning sweeps: one CB estimate per grid point per loss, with the
//! thinning draws shared across the grid.

use cbpois::oracle::mc_truth_multi;
use cbpois::zoo::{BinGrid, LindseyPSpline, Penalty, SplineBasisSpec, TvDenoiser, TvSettings};
use cbpois::{
    cb_from_draws_multi, draw_coupled_bootstrap, CountVector, FitAlgorithm, LossSpec, MeanVector,
};

use crate::config::LossName;
use crate::io::{num, Table};

/// One (grid point, loss) entry; values are divided by `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub params: Vec<f64>,
    pub loss: LossName,
    pub estimate: f64,
    pub se: f64,
    /// Monte Carlo truth when the means are known, else NaN.
    pub truth: f64,
    pub truth_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub param_names: Vec<String>,
    pub rows: Vec<SweepRow>,
}

/// Index of the smallest value, first one on ties; NaNs never win.
pub fn argmin(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        if best.is_none_or(|b| *v < values[b]) {
            best = Some(i);
        }
    }
    best
}

impl SweepResult {
    pub fn for_loss(&self, loss: LossName) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.loss == loss).collect()
    }

    /// Grid index minimizing the CB estimate for `loss`.
    pub fn argmin_index(&self, loss: LossName) -> Option<usize> {
        argmin(
            &self
                .for_loss(loss)
                .iter()
                .map(|r| r.estimate)
                .collect::<Vec<_>>(),
        )
    }

    /// Grid index minimizing the truth column for `loss`.
    pub fn truth_argmin_index(&self, loss: LossName) -> Option<usize> {
        argmin(
            &self
                .for_loss(loss)
                .iter()
                .map(|r| r.truth)
                .collect::<Vec<_>>(),
        )
    }

    pub fn argmin_row(&self, loss: LossName) -> Option<&SweepRow> {
        self.argmin_index(loss).map(|k| self.for_loss(loss)[k])
    }

    /// Rows plus an `argmin` flag marking each loss's minimizer.
    pub fn table(&self) -> Table {
        let mut header: Vec<&str> = self.param_names.iter().map(String::as_str).collect();
        header.extend(["loss", "estimate", "se", "truth", "truth_se", "argmin"]);
        let mut t = Table::new(&header);
        for r in &self.rows {
            let is_min = self.argmin_row(r.loss).is_some_and(|m| std::ptr::eq(m, r));
            let mut rec: Vec<String> = r.params.iter().map(|&v| num(v)).collect();
            rec.extend([
                r.loss.as_str().to_string(),
                num(r.estimate),
                num(r.se),
                num(r.truth),
                num(r.truth_se),
                u8::from(is_min).to_string(),
            ]);
            t.push(rec);
        }
        t
    }
}

/// Known means for a truth column: `Err_p` at `p`, from `draws` Monte
/// Carlo draws under `seed`.
#[derive(Debug, Clone)]
pub struct TruthSpec {
    pub mu: MeanVector,
    pub p: f64,
    pub draws: usize,
    pub seed: u64,
}

/// CB sweep over `grid`, where `family(params)` builds the algorithm at one
/// grid point. All grid points see the same `b` thinning draws of `y`.
#[allow(clippy::too_many_arguments)]
pub fn cb_sweep<F>(
    y: &CountVector,
    param_names: &[&str],
    grid: &[Vec<f64>],
    family: F,
    losses: &[LossName],
    pad_c: f64,
    p: f64,
    b: usize,
    seed: u64,
    truth: Option<&TruthSpec>,
) -> anyhow::Result<SweepResult>
where
    F: Fn(&[f64]) -> anyhow::Result<Box<dyn FitAlgorithm>>,
{
    anyhow::ensure!(!grid.is_empty(), "tuning grid is empty");
    anyhow::ensure!(!losses.is_empty(), "no losses given");
    let specs: Vec<LossSpec> = losses
        .iter()
        .map(|l| l.spec(pad_c))
        .collect::<anyhow::Result<_>>()?;
    let draws = draw_coupled_bootstrap(y, p, b, seed)?;
    let n = y.len() as f64;
    let mut per_point = Vec::with_capacity(grid.len());
    for params in grid {
        anyhow::ensure!(
            params.len() == param_names.len(),
            "grid point has the wrong arity"
        );
        let g = family(params)?;
        let ests = cb_from_draws_multi(&draws, &g, &specs)?;
        let truths = match truth {
            Some(t) => mc_truth_multi(&t.mu, &g, &specs, t.p, t.draws, t.seed)?
                .into_iter()
                .map(|e| (e.value / n, e.std_error / n))
                .collect(),
            None => vec![(f64::NAN, f64::NAN); specs.len()],
        };
        per_point.push((params.clone(), ests, truths));
    }
    // rows grouped by loss, grid order within each loss
    let mut rows = Vec::with_capacity(grid.len() * losses.len());
    for (l, &loss) in losses.iter().enumerate() {
        for (params, ests, truths) in &per_point {
            rows.push(SweepRow {
                params: params.clone(),
                loss,
                estimate: ests[l].value / n,
                se: ests[l].std_error / n,
                truth: truths[l].0,
                truth_se: truths[l].1,
            });
        }
    }
    Ok(SweepResult {
        param_names: param_names.iter().map(|s| s.to_string()).collect(),
        rows,
    })
}

/// One-parameter grid as a list of points.
pub fn line_grid(values: &[f64]) -> Vec<Vec<f64>> {
    values.iter().map(|&v| vec![v]).collect()
}

/// Outer product of two axes, first axis slowest.
pub fn product_grid(a: &[f64], b: &[f64]) -> Vec<Vec<f64>> {
    a.iter()
        .flat_map(|&x| b.iter().map(move |&z| vec![x, z]))
        .collect()
}

/// Log-spaced grid from `lo` to `hi` with `k` points.
pub fn log_grid(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..k)
        .map(|i| (a + (b - a) * i as f64 / (k - 1) as f64).exp())
        .collect()
}

/// TV denoisers on a `width × height` image, one per τ.
pub fn tv_family(
    width: usize,
    height: usize,
    rho: f64,
) -> impl Fn(&[f64]) -> anyhow::Result<Box<dyn FitAlgorithm>> {
    move |params: &[f64]| {
        let mut g = TvDenoiser::new(width, height, params[0])?;
        g.settings = TvSettings { rho, ..g.settings };
        Ok(Box::new(g) as Box<dyn FitAlgorithm>)
    }
}

/// Lindsey P-spline fits on a fixed bin grid; one parameter is isotropic,
/// two are per-axis strengths.
pub fn pspline_family(
    grid: BinGrid,
    knots: usize,
) -> impl Fn(&[f64]) -> anyhow::Result<Box<dyn FitAlgorithm>> {
    move |params: &[f64]| {
        let penalty = match *params {
            [l] => Penalty::Isotropic(l),
            [a, b] => Penalty::Anisotropic(a, b),
            _ => anyhow::bail!("P-spline grid points take one or two strengths"),
        };
        let spec = SplineBasisSpec::cubic(grid.bins, knots, penalty)?;
        Ok(Box::new(LindseyPSpline::new(grid.clone(), spec)?) as Box<dyn FitAlgorithm>)
    }
}
