//! Lindsey's method: bin the samples, then fit the bin counts by a Poisson
//! GLM on a cubic B-spline basis with a difference penalty (a P-spline).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimators::FitAlgorithm;

const MAX_ITER: usize = 100;
const COEF_TOL: f64 = 1e-6;
const MAX_HALVINGS: usize = 30;
const ETA_CAP: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    /// Separate strengths along the first and second axis.
    Anisotropic(f64, f64),
    Isotropic(f64),
}

impl Penalty {
    fn strengths(self) -> (f64, f64) {
        match self {
            Penalty::Anisotropic(a, b) => (a, b),
            Penalty::Isotropic(l) => (l, l),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplineBasisSpec {
    /// Bins per axis.
    pub bins: usize,
    /// Equally spaced knots per axis, endpoints included.
    pub knots: usize,
    pub degree: usize,
    /// Order of the coefficient differences in the penalty.
    pub order: usize,
    pub penalty: Penalty,
}

impl SplineBasisSpec {
    pub fn cubic(bins: usize, knots: usize, penalty: Penalty) -> Result<Self> {
        let spec = Self {
            bins,
            knots,
            degree: 3,
            order: 2,
            penalty,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.knots < 4 {
            return Err(Error::param("knots", "need at least 4 knots"));
        }
        if self.bins < self.knots {
            return Err(Error::param("bins", "need at least as many bins as knots"));
        }
        if self.degree == 0 || self.order == 0 || self.order >= self.basis_size() {
            return Err(Error::param(
                "degree",
                "degree and penalty order must be positive and small",
            ));
        }
        let (a, b) = self.penalty.strengths();
        if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::param("lambda", "must be finite and nonnegative"));
        }
        Ok(())
    }

    /// Number of B-spline functions per axis.
    pub fn basis_size(&self) -> usize {
        self.knots - 1 + self.degree
    }
}

/// Equal-width bins over a box, in one or two dimensions. In 2d, bin
/// `(i, j)` is stored at `i · bins + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinGrid {
    pub bins: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BinGrid {
    pub fn new(bins: usize, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if bins == 0 {
            return Err(Error::param("bins", "must be positive"));
        }
        if lo.len() != hi.len() || !(1..=2).contains(&lo.len()) {
            return Err(Error::param("bins", "grid must be 1d or 2d"));
        }
        if lo
            .iter()
            .zip(&hi)
            .any(|(l, h)| !(h > l) || !l.is_finite() || !h.is_finite())
        {
            return Err(Error::param("bins", "each axis needs lo < hi"));
        }
        Ok(Self { bins, lo, hi })
    }

    /// The smallest box containing every sample; a degenerate axis is widened by one unit.
    pub fn covering(samples: &[Vec<f64>], bins: usize) -> Result<Self> {
        let dims = check_samples(samples)?;
        let mut lo = vec![f64::INFINITY; dims];
        let mut hi = vec![f64::NEG_INFINITY; dims];
        for s in samples {
            for d in 0..dims {
                lo[d] = lo[d].min(s[d]);
                hi[d] = hi[d].max(s[d]);
            }
        }
        for d in 0..dims {
            if hi[d] <= lo[d] {
                lo[d] -= 0.5;
                hi[d] += 0.5;
            }
        }
        Self::new(bins, lo, hi)
    }

    pub fn dims(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self) -> usize {
        self.bins.pow(self.dims() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Bin centres along axis `d`.
    pub fn centers(&self, d: usize) -> Vec<f64> {
        let w = (self.hi[d] - self.lo[d]) / self.bins as f64;
        (0..self.bins)
            .map(|i| self.lo[d] + (i as f64 + 0.5) * w)
            .collect()
    }

    fn axis_index(&self, d: usize, v: f64) -> Option<usize> {
        if !(v >= self.lo[d] && v <= self.hi[d]) {
            return None;
        }
        let w = (self.hi[d] - self.lo[d]) / self.bins as f64;
        Some((((v - self.lo[d]) / w) as usize).min(self.bins - 1))
    }

    /// Counts per bin; samples outside the box are an error.
    pub fn counts(&self, samples: &[Vec<f64>]) -> Result<Vec<u64>> {
        let mut out = vec![0u64; self.len()];
        for s in samples {
            if s.len() != self.dims() {
                return Err(Error::param("samples", "dimension does not match the grid"));
            }
            let mut idx = 0;
            for (d, &v) in s.iter().enumerate() {
                let i = self
                    .axis_index(d, v)
                    .ok_or_else(|| Error::param("samples", "sample outside the bin range"))?;
                idx = idx * self.bins + i;
            }
            out[idx] += 1;
        }
        Ok(out)
    }
}

fn check_samples(samples: &[Vec<f64>]) -> Result<usize> {
    let dims = samples.first().ok_or(Error::Empty("samples"))?.len();
    if !(1..=2).contains(&dims) {
        return Err(Error::param("samples", "points must be 1d or 2d"));
    }
    if samples
        .iter()
        .any(|s| s.len() != dims || s.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::param(
            "samples",
            "points must share a dimension and be finite",
        ));
    }
    Ok(dims)
}

/// Index of the first nonzero function and the `degree + 1` nonzero values
/// of the B-spline basis with equally spaced knots on `[lo, hi]`.
fn basis_at(x: f64, lo: f64, hi: f64, knots: usize, degree: usize) -> (usize, Vec<f64>) {
    let h = (hi - lo) / (knots - 1) as f64;
    let span = (((x - lo) / h).floor().max(0.0) as usize).min(knots - 2);
    // knot t_k = lo + (k − degree)·h; x lies in [t_{span+degree}, t_{span+degree+1})
    let t = |k: usize| lo + (k as f64 - degree as f64) * h;
    let i = span + degree;
    let mut n = vec![0.0; degree + 1];
    let mut left = vec![0.0; degree + 1];
    let mut right = vec![0.0; degree + 1];
    n[0] = 1.0;
    for j in 1..=degree {
        left[j] = x - t(i + 1 - j);
        right[j] = t(i + j) - x;
        let mut saved = 0.0;
        for r in 0..j {
            let tmp = n[r] / (right[r + 1] + left[j - r]);
            n[r] = saved + right[r + 1] * tmp;
            saved = left[j - r] * tmp;
        }
        n[j] = saved;
    }
    (span, n)
}

/// Dense B-spline basis matrix: one row per point, `knots − 1 + degree` columns.
pub fn bspline_basis(
    x: &[f64],
    lo: f64,
    hi: f64,
    knots: usize,
    degree: usize,
) -> Result<Vec<Vec<f64>>> {
    if knots < 2 || !(hi > lo) {
        return Err(Error::param(
            "knots",
            "need at least two knots on a nonempty interval",
        ));
    }
    let k = knots - 1 + degree;
    Ok(x.iter()
        .map(|&v| {
            let mut row = vec![0.0; k];
            let (first, vals) = basis_at(v, lo, hi, knots, degree);
            row[first..first + vals.len()].copy_from_slice(&vals);
            row
        })
        .collect())
}

/// `DᵀD` for the `order`-th difference operator on `k` coefficients.
fn difference_gram(k: usize, order: usize) -> DMatrix<f64> {
    let mut d = DMatrix::<f64>::identity(k, k);
    for _ in 0..order {
        let rows = d.nrows() - 1;
        d = DMatrix::from_fn(rows, k, |r, c| d[(r + 1, c)] - d[(r, c)]);
    }
    d.transpose() * d
}

struct SparseRow {
    idx: Vec<usize>,
    val: Vec<f64>,
}

/// P-spline fit to bin counts on a fixed grid.
#[derive(Debug, Clone)]
pub struct LindseyPSpline {
    pub grid: BinGrid,
    pub spec: SplineBasisSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LindseyFit {
    pub counts: Vec<u64>,
    pub bin_means: Vec<f64>,
    /// Fitted means normalized to sum to one over the bins.
    pub density: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Penalized objective after each accepted step.
    pub objective_history: Vec<f64>,
}

impl LindseyPSpline {
    pub fn new(grid: BinGrid, spec: SplineBasisSpec) -> Result<Self> {
        spec.validate()?;
        if grid.bins != spec.bins {
            return Err(Error::param(
                "bins",
                "grid and spline spec disagree on the bin count",
            ));
        }
        Ok(Self { grid, spec })
    }

    fn design(&self) -> (Vec<SparseRow>, usize) {
        let s = &self.spec;
        let k = s.basis_size();
        let axes: Vec<Vec<(usize, Vec<f64>)>> = (0..self.grid.dims())
            .map(|d| {
                self.grid
                    .centers(d)
                    .iter()
                    .map(|&x| basis_at(x, self.grid.lo[d], self.grid.hi[d], s.knots, s.degree))
                    .collect()
            })
            .collect();
        if axes.len() == 1 {
            let rows = axes[0]
                .iter()
                .map(|(first, vals)| SparseRow {
                    idx: (*first..first + vals.len()).collect(),
                    val: vals.clone(),
                })
                .collect();
            return (rows, k);
        }
        let mut rows = Vec::with_capacity(self.grid.len());
        for (f1, v1) in &axes[0] {
            for (f2, v2) in &axes[1] {
                let mut idx = Vec::with_capacity(v1.len() * v2.len());
                let mut val = Vec::with_capacity(v1.len() * v2.len());
                for (a, x) in v1.iter().enumerate() {
                    for (b, z) in v2.iter().enumerate() {
                        idx.push((f1 + a) * k + f2 + b);
                        val.push(x * z);
                    }
                }
                rows.push(SparseRow { idx, val });
            }
        }
        (rows, k * k)
    }

    fn penalty_matrix(&self) -> DMatrix<f64> {
        let k = self.spec.basis_size();
        let g = difference_gram(k, self.spec.order);
        let (l1, l2) = self.spec.penalty.strengths();
        if self.grid.dims() == 1 {
            return g * l1;
        }
        let eye = DMatrix::<f64>::identity(k, k);
        g.kronecker(&eye) * l1 + eye.kronecker(&g) * l2
    }

    /// Penalized IRLS on bin counts in grid order.
    pub fn fit_counts(&self, y: &[u64]) -> Result<LindseyFit> {
        if y.len() != self.grid.len() {
            return Err(Error::LengthMismatch {
                left: y.len(),
                right: self.grid.len(),
            });
        }
        let total: u64 = y.iter().sum();
        let (rows, p) = self.design();
        let pen = self.penalty_matrix();
        let eta_of = |beta: &DVector<f64>| -> Vec<f64> {
            rows.iter()
                .map(|r| {
                    r.idx
                        .iter()
                        .zip(&r.val)
                        .map(|(&j, v)| v * beta[j])
                        .sum::<f64>()
                        .clamp(-ETA_CAP, ETA_CAP)
                })
                .collect()
        };
        let objective = |beta: &DVector<f64>, eta: &[f64]| -> f64 {
            let nll: f64 = eta
                .iter()
                .zip(y)
                .map(|(e, &v)| e.exp() - v as f64 * e)
                .sum();
            nll + 0.5 * beta.dot(&(&pen * beta))
        };
        if total == 0 {
            let n = y.len();
            return Ok(LindseyFit {
                counts: y.to_vec(),
                bin_means: vec![0.0; n],
                density: vec![1.0 / n as f64; n],
                coefficients: vec![f64::NEG_INFINITY; p],
                iterations: 0,
                converged: true,
                objective_history: vec![],
            });
        }
        // B-splines sum to one, so a constant coefficient vector is a flat fit
        let mut beta = DVector::from_element(p, (total as f64 / y.len() as f64).ln());
        let mut eta = eta_of(&beta);
        let mut obj = objective(&beta, &eta);
        let mut history = vec![obj];
        let mut converged = false;
        let mut iterations = 0;
        for it in 0..MAX_ITER {
            iterations = it + 1;
            let mut lhs = DMatrix::<f64>::zeros(p, p);
            let mut rhs = DVector::<f64>::zeros(p);
            for (i, r) in rows.iter().enumerate() {
                let mu = eta[i].exp();
                let w = mu.max(1e-12);
                let z = eta[i] + (y[i] as f64 - mu) / w;
                for (a, (&ja, &va)) in r.idx.iter().zip(&r.val).enumerate() {
                    rhs[ja] += w * va * z;
                    for (&jb, &vb) in r.idx[a..].iter().zip(&r.val[a..]) {
                        lhs[(ja, jb)] += w * va * vb;
                    }
                }
            }
            for a in 0..p {
                for b in 0..a {
                    let v = lhs[(a, b)] + lhs[(b, a)];
                    lhs[(a, b)] = v;
                    lhs[(b, a)] = v;
                }
            }
            lhs += &pen;
            let chol = match lhs.clone().cholesky() {
                Some(c) => c,
                None => {
                    // tiny ridge for an empty, unpenalized region
                    lhs += DMatrix::<f64>::identity(p, p) * 1e-10;
                    lhs.cholesky().ok_or(Error::Singular)?
                }
            };
            let target = chol.solve(&rhs);
            let mut step = &target - &beta;
            let mut cand = &beta + &step;
            let mut cand_eta = eta_of(&cand);
            let mut cand_obj = objective(&cand, &cand_eta);
            let mut halvings = 0;
            while !(cand_obj <= obj + 1e-10 * obj.abs().max(1.0)) && halvings < MAX_HALVINGS {
                step *= 0.5;
                cand = &beta + &step;
                cand_eta = eta_of(&cand);
                cand_obj = objective(&cand, &cand_eta);
                halvings += 1;
            }
            if !(cand_obj <= obj + 1e-10 * obj.abs().max(1.0)) {
                converged = step.amax() < COEF_TOL;
                break;
            }
            let change = step.amax();
            beta = cand;
            eta = cand_eta;
            obj = cand_obj;
            history.push(obj);
            if change < COEF_TOL {
                converged = true;
                break;
            }
        }
        let bin_means: Vec<f64> = eta.iter().map(|e| e.exp()).collect();
        let sum: f64 = bin_means.iter().sum();
        Ok(LindseyFit {
            counts: y.to_vec(),
            density: bin_means.iter().map(|m| m / sum).collect(),
            bin_means,
            coefficients: beta.iter().copied().collect(),
            iterations,
            converged,
            objective_history: history,
        })
    }
}

impl FitAlgorithm for LindseyPSpline {
    fn name(&self) -> String {
        format!("lindsey_pspline({:?})", self.spec.penalty)
    }

    fn fit(&self, y: &[u64]) -> Vec<f64> {
        match self.fit_counts(y) {
            Ok(f) => f.bin_means,
            Err(_) => vec![f64::NAN; y.len()],
        }
    }
}

/// Bins `samples` over their bounding box and fits the P-spline.
pub fn lindsey_pspline(samples: &[Vec<f64>], spec: &SplineBasisSpec) -> Result<LindseyFit> {
    let grid = BinGrid::covering(samples, spec.bins)?;
    let counts = grid.counts(samples)?;
    LindseyPSpline::new(grid, *spec)?.fit_counts(&counts)
}
