use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::estimators::ENUMERATION_BUDGET;

/// Largest upper-tail mass dropped per coordinate.
pub const DEFAULT_DEFICIT: f64 = 1e-12;

/// `P(Y = k)` for `k = 0..pmf.len()` and a bound on the mass beyond.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSupport {
    pub pmf: Vec<f64>,
    pub deficit: f64,
}

impl PoissonSupport {
    pub fn max(&self) -> u64 {
        self.pmf.len() as u64 - 1
    }
}

/// Truncates `Pois(mu)` at the first `K ≥ mu` whose upper tail is at most
/// `max_deficit`, using `P(Y > K) ≤ P(Y = K+1) / (1 − mu/(K+2))`.
pub fn poisson_support(mu: f64, max_deficit: f64) -> Result<PoissonSupport> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::param("mu", format!("must be nonnegative, got {mu}")));
    }
    if !(max_deficit > 0.0) {
        return Err(Error::param("deficit", "must be positive"));
    }
    if mu == 0.0 {
        return Ok(PoissonSupport {
            pmf: vec![1.0],
            deficit: 0.0,
        });
    }
    let ln_mu = mu.ln();
    let pmf_at = |k: u64| (k as f64 * ln_mu - mu - ln_factorial(k)).exp();
    let mut pmf = Vec::new();
    let mut k = 0u64;
    loop {
        pmf.push(pmf_at(k));
        if k as f64 >= mu {
            let ratio = mu / (k as f64 + 2.0);
            let tail = pmf_at(k + 1) / (1.0 - ratio);
            if tail <= max_deficit {
                return Ok(PoissonSupport { pmf, deficit: tail });
            }
        }
        k += 1;
    }
}

/// The product of per-coordinate truncated supports, walked in mixed radix
/// with the first coordinate fastest.
#[derive(Debug, Clone)]
pub struct ProductSupport {
    pub factors: Vec<PoissonSupport>,
}

impl ProductSupport {
    pub fn new(mu: &[f64], max_deficit: f64) -> Result<Self> {
        let factors = mu
            .iter()
            .map(|&m| poisson_support(m, max_deficit))
            .collect::<Result<Vec<_>>>()?;
        let s = Self { factors };
        let required = s.size_f64();
        if required > ENUMERATION_BUDGET {
            return Err(Error::BudgetExceeded {
                required,
                budget: ENUMERATION_BUDGET,
            });
        }
        Ok(s)
    }

    fn size_f64(&self) -> f64 {
        self.factors.iter().map(|f| f.pmf.len() as f64).product()
    }

    pub fn size(&self) -> usize {
        self.factors.iter().map(|f| f.pmf.len()).product()
    }

    /// Union bound on the joint mass outside the box.
    pub fn deficit(&self) -> f64 {
        self.factors.iter().map(|f| f.deficit).sum()
    }

    /// Position strides of each coordinate in the flattened order.
    pub fn strides(&self) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.factors.len());
        let mut acc = 1;
        for f in &self.factors {
            s.push(acc);
            acc *= f.pmf.len();
        }
        s
    }

    /// Calls `visit(position, y, probability)` for every point.
    pub fn for_each(&self, mut visit: impl FnMut(usize, &[u64], f64)) {
        let n = self.factors.len();
        let mut y = vec![0u64; n];
        for pos in 0..self.size() {
            let prob: f64 = y
                .iter()
                .zip(&self.factors)
                .map(|(&k, f)| f.pmf[k as usize])
                .product();
            visit(pos, &y, prob);
            for (k, f) in y.iter_mut().zip(&self.factors) {
                if *k < f.max() {
                    *k += 1;
                    break;
                }
                *k = 0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn support_mass_and_deficit() {
        for mu in [0.3, 1.0, 4.0, 25.0] {
            let s = poisson_support(mu, 1e-12).unwrap();
            let mass: f64 = s.pmf.iter().sum();
            assert!((1.0 - mass).abs() < 1e-11, "mu={mu}: {mass}");
            assert!(s.deficit <= 1e-12);
            let mean: f64 = s.pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
            assert!((mean - mu).abs() < 1e-9);
        }
        assert_eq!(poisson_support(0.0, 1e-12).unwrap().pmf, vec![1.0]);
    }

    #[test]
    fn product_walk_visits_all() {
        let ps = ProductSupport::new(&[0.5, 1.0], 1e-12).unwrap();
        let mut total = 0.0;
        let mut count = 0;
        let strides = ps.strides();
        ps.for_each(|pos, y, prob| {
            assert_eq!(pos, y[0] as usize * strides[0] + y[1] as usize * strides[1]);
            total += prob;
            count += 1;
        });
        assert_eq!(count, ps.size());
        assert!((total - 1.0).abs() < 1e-11);
    }

    #[test]
    fn budget_enforced() {
        assert!(matches!(
            ProductSupport::new(&[20.0; 6], 1e-12),
            Err(Error::BudgetExceeded { .. })
        ));
    }
}
