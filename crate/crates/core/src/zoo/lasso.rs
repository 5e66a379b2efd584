//! ℓ₁-penalized Poisson regression: pathwise coordinate descent on the
//! IRLS quadratic surrogate, with K-fold cross-validation over the path.
//!
//! Objective at a given λ, on standardized columns:
//! `(1/n) Σ (exp(ηᵢ) − yᵢηᵢ) + λ Σⱼ |βⱼ|`, intercept unpenalized.

use super::design::DesignMatrix;
use super::glm::poisson_deviance;
use crate::error::{Error, Result};
use crate::estimators::FitAlgorithm;
use crate::rng::{self, Domain};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoSettings {
    /// Number of λ values on the log-spaced path.
    pub grid_size: usize,
    /// The path runs from `λ_max` down to `λ_max · 10^(−decades)`.
    pub decades: f64,
    pub max_outer: usize,
    pub max_sweeps: usize,
    pub tol: f64,
    /// Stop the path once the fraction of null deviance explained exceeds this.
    pub max_dev_ratio: f64,
}

impl Default for LassoSettings {
    fn default() -> Self {
        Self {
            grid_size: 20,
            decades: 4.0,
            max_outer: 25,
            max_sweeps: 1000,
            tol: 1e-7,
            max_dev_ratio: 0.99,
        }
    }
}

/// Solutions along a λ path, on the original feature scale.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoPath {
    pub lambdas: Vec<f64>,
    pub intercepts: Vec<f64>,
    pub betas: Vec<Vec<f64>>,
    /// Number of λ values actually solved (the path may stop early).
    pub completed: usize,
}

impl LassoPath {
    pub fn means(&self, x: &DesignMatrix, k: usize) -> Vec<f64> {
        x.mul_vec(&self.betas[k])
            .into_iter()
            .map(|e| (self.intercepts[k] + e).min(700.0).exp())
            .collect()
    }
}

struct Standardized {
    cols: Vec<Vec<f64>>,
    center: Vec<f64>,
    scale: Vec<f64>,
}

fn standardize(x: &DesignMatrix) -> Standardized {
    let n = x.rows() as f64;
    let mut cols = x.columns();
    let mut center = Vec::with_capacity(cols.len());
    let mut scale = Vec::with_capacity(cols.len());
    for col in &mut cols {
        let mean = col.iter().sum::<f64>() / n;
        let sd = (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        center.push(mean);
        if sd > 1e-12 {
            col.iter_mut().for_each(|v| *v = (*v - mean) / sd);
            scale.push(sd);
        } else {
            // constant column: carries no signal once the intercept is in
            col.iter_mut().for_each(|v| *v = 0.0);
            scale.push(0.0);
        }
    }
    Standardized {
        cols,
        center,
        scale,
    }
}

fn lambda_max(std: &Standardized, y: &[u64]) -> f64 {
    let n = y.len() as f64;
    let ybar = y.iter().sum::<u64>() as f64 / n;
    std.cols
        .iter()
        .map(|col| {
            (col.iter()
                .zip(y)
                .map(|(x, &v)| x * (v as f64 - ybar))
                .sum::<f64>()
                / n)
                .abs()
        })
        .fold(0.0, f64::max)
}

fn soft(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

struct Solver<'a> {
    cols: &'a [Vec<f64>],
    y: &'a [u64],
    settings: &'a LassoSettings,
    /// Null deviance per observation. Sweeps, and IRLS steps, stop once
    /// every weighted squared coefficient change falls below `tol` times this.
    scale: f64,
}

impl Solver<'_> {
    fn eta(&self, b0: f64, beta: &[f64]) -> Vec<f64> {
        let mut eta = vec![b0; self.y.len()];
        for (col, &b) in self.cols.iter().zip(beta) {
            if b != 0.0 {
                eta.iter_mut().zip(col).for_each(|(e, x)| *e += b * x);
            }
        }
        eta
    }

    fn objective(&self, eta: &[f64], beta: &[f64], lam: f64) -> f64 {
        let n = self.y.len() as f64;
        let nll: f64 = eta
            .iter()
            .zip(self.y)
            .map(|(&e, &v)| e.min(700.0).exp() - v as f64 * e)
            .sum();
        nll / n + lam * beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    /// Coordinate descent for `(1/2n) Σ wᵢ(zᵢ − b₀ − xᵢᵀβ)² + λ‖β‖₁`.
    /// Returns the largest weighted squared change between the entry and
    /// exit coefficients.
    fn weighted_lasso(
        &self,
        w: &[f64],
        z: &[f64],
        lam: f64,
        b0: &mut f64,
        beta: &mut [f64],
    ) -> f64 {
        let n = self.y.len() as f64;
        let (start_b0, start) = (*b0, beta.to_vec());
        let eta = self.eta(*b0, beta);
        let mut r: Vec<f64> = z.iter().zip(&eta).map(|(z, e)| z - e).collect();
        let wsum: f64 = w.iter().sum();
        let denom: Vec<f64> = self
            .cols
            .iter()
            .map(|col| col.iter().zip(w).map(|(x, w)| w * x * x).sum::<f64>() / n)
            .collect();
        let mut full_pass = true;
        for _ in 0..self.settings.max_sweeps {
            let mut max_change = 0.0f64;
            let shift = r.iter().zip(w).map(|(r, w)| r * w).sum::<f64>() / wsum;
            if shift != 0.0 {
                *b0 += shift;
                r.iter_mut().for_each(|v| *v -= shift);
                max_change = max_change.max(shift * shift * wsum / n);
            }
            for j in 0..self.cols.len() {
                if denom[j] == 0.0 || (!full_pass && beta[j] == 0.0) {
                    continue;
                }
                let col = &self.cols[j];
                let grad: f64 = col
                    .iter()
                    .zip(&r)
                    .zip(w)
                    .map(|((x, r), w)| w * x * r)
                    .sum::<f64>()
                    / n;
                let new = soft(grad + denom[j] * beta[j], lam) / denom[j];
                let delta = new - beta[j];
                if delta != 0.0 {
                    r.iter_mut().zip(col).for_each(|(r, x)| *r -= delta * x);
                    beta[j] = new;
                    max_change = max_change.max(delta * delta * denom[j]);
                }
            }
            if max_change < self.settings.tol * self.scale {
                if full_pass {
                    break;
                }
                full_pass = true;
            } else {
                full_pass = false;
            }
        }
        (0..beta.len())
            .map(|j| denom[j] * (beta[j] - start[j]).powi(2))
            .fold(wsum / n * (*b0 - start_b0).powi(2), f64::max)
    }

    /// Proximal-Newton outer loop with step halving on the penalized objective.
    fn solve(&self, lam: f64, b0: &mut f64, beta: &mut [f64]) {
        let mut eta = self.eta(*b0, beta);
        let mut obj = self.objective(&eta, beta, lam);
        for _ in 0..self.settings.max_outer {
            let mu: Vec<f64> = eta.iter().map(|e| e.min(700.0).exp()).collect();
            let w: Vec<f64> = mu.iter().map(|m| m.max(1e-5)).collect();
            let z: Vec<f64> = (0..self.y.len())
                .map(|i| eta[i] + (self.y[i] as f64 - mu[i]) / w[i])
                .collect();
            let (old_b0, old_beta) = (*b0, beta.to_vec());
            let moved = self.weighted_lasso(&w, &z, lam, b0, beta);
            let mut new_eta = self.eta(*b0, beta);
            let mut new_obj = self.objective(&new_eta, beta, lam);
            let mut halvings = 0;
            while new_obj > obj + 1e-12 * obj.abs().max(1.0) && halvings < 20 {
                *b0 = 0.5 * (*b0 + old_b0);
                beta.iter_mut()
                    .zip(&old_beta)
                    .for_each(|(b, o)| *b = 0.5 * (*b + o));
                new_eta = self.eta(*b0, beta);
                new_obj = self.objective(&new_eta, beta, lam);
                halvings += 1;
            }
            let improvement = obj - new_obj;
            eta = new_eta;
            obj = new_obj;
            if moved < self.settings.tol * self.scale
                || improvement.abs() < 1e-10 * obj.abs().max(1.0)
            {
                break;
            }
        }
    }
}

fn null_deviance(y: &[u64]) -> f64 {
    let ybar = y.iter().sum::<u64>() as f64 / y.len() as f64;
    poisson_deviance(y, &vec![ybar; y.len()])
}

fn log_grid(lmax: f64, settings: &LassoSettings) -> Vec<f64> {
    let k = settings.grid_size.max(1);
    if k == 1 {
        return vec![lmax];
    }
    (0..k)
        .map(|i| lmax * 10f64.powf(-settings.decades * i as f64 / (k - 1) as f64))
        .collect()
}

fn fit_path(x: &DesignMatrix, y: &[u64], lambdas: &[f64], settings: &LassoSettings) -> LassoPath {
    let std = standardize(x);
    let d = x.cols();
    let ybar = y.iter().sum::<u64>() as f64 / y.len() as f64;
    let mut out = LassoPath {
        lambdas: lambdas.to_vec(),
        intercepts: Vec::with_capacity(lambdas.len()),
        betas: Vec::with_capacity(lambdas.len()),
        completed: 0,
    };
    if ybar == 0.0 {
        // all-zero response: the fit is identically zero
        for _ in lambdas {
            out.intercepts.push(f64::NEG_INFINITY);
            out.betas.push(vec![0.0; d]);
        }
        out.completed = lambdas.len();
        return out;
    }
    let null_dev = null_deviance(y);
    let solver = Solver {
        cols: &std.cols,
        y,
        settings,
        scale: (null_dev / y.len() as f64).max(1e-12),
    };
    let mut b0 = ybar.ln();
    let mut beta = vec![0.0; d];
    for &lam in lambdas {
        solver.solve(lam, &mut b0, &mut beta);
        // back to the original scale
        let mut intercept = b0;
        let orig: Vec<f64> = (0..d)
            .map(|j| {
                if std.scale[j] == 0.0 {
                    0.0
                } else {
                    let b = beta[j] / std.scale[j];
                    intercept -= b * std.center[j];
                    b
                }
            })
            .collect();
        out.intercepts.push(intercept);
        out.betas.push(orig);
        out.completed += 1;
        let dev = poisson_deviance(
            y,
            &solver
                .eta(b0, &beta)
                .iter()
                .map(|e| e.min(700.0).exp())
                .collect::<Vec<_>>(),
        );
        if null_dev > 0.0 && 1.0 - dev / null_dev > settings.max_dev_ratio {
            break;
        }
    }
    out
}

/// The solution path over a log-spaced grid from `λ_max` (the smallest λ
/// with every penalized coefficient at zero) down `decades` decades.
pub fn lasso_poisson_path(
    x: &DesignMatrix,
    y: &[u64],
    settings: &LassoSettings,
) -> Result<LassoPath> {
    if y.len() != x.rows() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: x.rows(),
        });
    }
    let lmax = lambda_max(&standardize(x), y);
    Ok(fit_path(x, y, &log_grid(lmax, settings), settings))
}

/// Lasso Poisson regression with λ chosen by K-fold cross-validated deviance.
///
/// Folds are a fixed function of `seed` and `n`, so the estimator is a
/// deterministic function of the counts.
#[derive(Debug, Clone)]
pub struct LassoPoissonCv {
    pub x: DesignMatrix,
    pub folds: usize,
    pub seed: u64,
    pub settings: LassoSettings,
}

impl LassoPoissonCv {
    pub fn new(x: DesignMatrix, folds: usize, grid_size: usize, seed: u64) -> Result<Self> {
        if folds < 2 {
            return Err(Error::param(
                "K",
                "cross-validation needs at least two folds",
            ));
        }
        if folds > x.rows() {
            return Err(Error::param("K", "more folds than observations"));
        }
        Ok(Self {
            x,
            folds,
            seed,
            settings: LassoSettings {
                grid_size,
                ..LassoSettings::default()
            },
        })
    }

    fn fold_of(&self) -> Vec<usize> {
        use rand::seq::SliceRandom;
        let n = self.x.rows();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng::stream(self.seed, Domain::Folds, n as u64));
        let mut fold = vec![0; n];
        for (k, &row) in perm.iter().enumerate() {
            fold[row] = k % self.folds;
        }
        fold
    }

    /// Index of the selected λ, the full-data path and the CV curve.
    pub fn select(&self, y: &[u64]) -> (usize, LassoPath, Vec<f64>) {
        let full =
            lasso_poisson_path(&self.x, y, &self.settings).expect("lengths checked by caller");
        let fold = self.fold_of();
        let mut usable = full.completed;
        let mut cv = vec![0.0; full.lambdas.len()];
        for k in 0..self.folds {
            let train: Vec<usize> = (0..y.len()).filter(|&i| fold[i] != k).collect();
            let test: Vec<usize> = (0..y.len()).filter(|&i| fold[i] == k).collect();
            let xt = self.x.select_rows(&train);
            let yt: Vec<u64> = train.iter().map(|&i| y[i]).collect();
            let path = fit_path(&xt, &yt, &full.lambdas, &self.settings);
            usable = usable.min(path.completed);
            let xv = self.x.select_rows(&test);
            let yv: Vec<u64> = test.iter().map(|&i| y[i]).collect();
            for (l, slot) in cv.iter_mut().enumerate().take(path.completed) {
                let mu: Vec<f64> = path.means(&xv, l).iter().map(|m| m.max(1e-10)).collect();
                *slot += poisson_deviance(&yv, &mu);
            }
        }
        let mut best = 0;
        for l in 1..usable.max(1) {
            if cv[l] < cv[best] {
                best = l;
            }
        }
        cv.truncate(usable.max(1));
        (best, full, cv)
    }
}

impl FitAlgorithm for LassoPoissonCv {
    fn name(&self) -> String {
        format!("lasso_poisson_cv(K={})", self.folds)
    }

    fn fit(&self, y: &[u64]) -> Vec<f64> {
        let (best, path, _) = self.select(y);
        path.means(&self.x, best)
    }
}

pub fn lasso_poisson_cv(
    x: &DesignMatrix,
    y: &[u64],
    folds: usize,
    grid_size: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if y.len() != x.rows() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: x.rows(),
        });
    }
    Ok(LassoPoissonCv::new(x.clone(), folds, grid_size, seed)?.fit(y))
}
