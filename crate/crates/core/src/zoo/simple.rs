use crate::estimators::FitAlgorithm;

/// `g(y) = y`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl FitAlgorithm for Identity {
    fn name(&self) -> String {
        "identity".into()
    }

    fn fit(&self, y: &[u64]) -> Vec<f64> {
        y.iter().map(|&v| v as f64).collect()
    }

    fn fit_decremented(&self, y: &[u64], i: usize) -> f64 {
        (y[i] - 1) as f64
    }
}

/// A fit that ignores the data.
#[derive(Debug, Clone)]
pub struct Constant(pub Vec<f64>);

impl FitAlgorithm for Constant {
    fn name(&self) -> String {
        "constant".into()
    }

    fn fit(&self, _y: &[u64]) -> Vec<f64> {
        self.0.clone()
    }

    fn fit_decremented(&self, _y: &[u64], i: usize) -> f64 {
        self.0[i]
    }
}

/// `g(y) = w·y + (1 − w)·ȳ + 0.01·1{ȳ = 0}`; the default weight is 0.8.
#[derive(Debug, Clone, Copy)]
pub struct LinearShrinkage {
    pub weight: f64,
}

impl Default for LinearShrinkage {
    fn default() -> Self {
        Self { weight: 0.8 }
    }
}

const EMPTY_BUMP: f64 = 0.01;

impl LinearShrinkage {
    fn coordinate(&self, yi: f64, total: u64, n: usize) -> f64 {
        let mean = total as f64 / n as f64;
        let bump = if total == 0 { EMPTY_BUMP } else { 0.0 };
        self.weight * yi + (1.0 - self.weight) * mean + bump
    }
}

impl FitAlgorithm for LinearShrinkage {
    fn name(&self) -> String {
        format!("linear_shrinkage(w={})", self.weight)
    }

    fn fit(&self, y: &[u64]) -> Vec<f64> {
        let total: u64 = y.iter().sum();
        y.iter()
            .map(|&v| self.coordinate(v as f64, total, y.len()))
            .collect()
    }

    fn fit_decremented(&self, y: &[u64], i: usize) -> f64 {
        let total: u64 = y.iter().sum::<u64>() - 1;
        self.coordinate((y[i] - 1) as f64, total, y.len())
    }
}

/// `0.8·y + 0.2·ȳ + 0.01·1{ȳ = 0}`.
pub fn linear_shrinkage(y: &[u64]) -> Vec<f64> {
    LinearShrinkage::default().fit(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdKind {
    Soft,
    Hard,
}

/// Soft `max(y − λ, 0)` or hard `y·1{y > λ}` thresholding.
#[derive(Debug, Clone, Copy)]
pub struct Threshold {
    pub lam: f64,
    pub kind: ThresholdKind,
}

impl Threshold {
    pub fn soft(lam: f64) -> Self {
        Self {
            lam,
            kind: ThresholdKind::Soft,
        }
    }

    pub fn hard(lam: f64) -> Self {
        Self {
            lam,
            kind: ThresholdKind::Hard,
        }
    }

    fn apply(&self, v: f64) -> f64 {
        match self.kind {
            ThresholdKind::Soft => (v - self.lam).max(0.0),
            ThresholdKind::Hard => {
                if v > self.lam {
                    v
                } else {
                    0.0
                }
            }
        }
    }
}

impl FitAlgorithm for Threshold {
    fn name(&self) -> String {
        match self.kind {
            ThresholdKind::Soft => format!("soft_threshold({})", self.lam),
            ThresholdKind::Hard => format!("hard_threshold({})", self.lam),
        }
    }

    fn fit(&self, y: &[u64]) -> Vec<f64> {
        y.iter().map(|&v| self.apply(v as f64)).collect()
    }

    fn fit_decremented(&self, y: &[u64], i: usize) -> f64 {
        self.apply((y[i] - 1) as f64)
    }
}

pub fn threshold(y: &[u64], lam: f64, kind: ThresholdKind) -> Vec<f64> {
    Threshold { lam, kind }.fit(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn shrinkage_examples() {
        assert_eq!(linear_shrinkage(&[0, 0, 0]), vec![0.01; 3]);
        let fit = linear_shrinkage(&[1, 3]);
        assert!((fit[0] - 1.2).abs() < 1e-15 && (fit[1] - 2.8).abs() < 1e-15);
        assert_eq!(linear_shrinkage(&[4, 4, 4, 4]), vec![4.0; 4]);
    }

    #[test]
    fn threshold_examples() {
        for kind in [ThresholdKind::Soft, ThresholdKind::Hard] {
            assert_eq!(threshold(&[0, 3, 7], 0.0, kind), vec![0.0, 3.0, 7.0]);
        }
        assert_eq!(threshold(&[2], 1.5, ThresholdKind::Soft), vec![0.5]);
        assert_eq!(threshold(&[2], 1.5, ThresholdKind::Hard), vec![2.0]);
        assert_eq!(threshold(&[1], 1.5, ThresholdKind::Soft), vec![0.0]);
        assert_eq!(threshold(&[1], 1.5, ThresholdKind::Hard), vec![0.0]);
    }

    proptest! {
        #[test]
        fn fast_decrement_matches_refit(y in prop::collection::vec(0u64..20, 1..10), w in 0.0f64..1.0, lam in 0.0f64..5.0) {
            let algs: Vec<Box<dyn FitAlgorithm>> = vec![
                Box::new(Identity),
                Box::new(LinearShrinkage { weight: w }),
                Box::new(Threshold::soft(lam)),
                Box::new(Threshold::hard(lam)),
                Box::new(Constant(vec![1.5; y.len()])),
            ];
            for g in &algs {
                for i in (0..y.len()).filter(|&i| y[i] > 0) {
                    let mut z = y.clone();
                    z[i] -= 1;
                    let slow = g.fit(&z)[i];
                    let fast = g.fit_decremented(&y, i);
                    prop_assert!((slow - fast).abs() <= 1e-12 * (1.0 + slow.abs()));
                }
                let fit = g.fit(&y);
                prop_assert_eq!(fit.len(), y.len());
                prop_assert!(fit.iter().all(|v| *v >= 0.0));
            }
        }
    }
}
