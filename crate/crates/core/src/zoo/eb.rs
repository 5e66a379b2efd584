use crate::estimators::FitAlgorithm;

/// Floor on the smoothed count frequencies.
const FREQ_FLOOR: f64 = 1e-12;

/// Robbins-type empirical Bayes rule with kernel-smoothed frequencies:
/// `gᵢ(y) = (yᵢ + 1)·Ñ(yᵢ + 1)/Ñ(yᵢ)`, where `Ñ(k)` is a Gaussian kernel
/// smooth (bandwidth `h`) of the empirical frequency of the value `k`.
///
/// This is an exchangeable, nonlinear rule standing in for the one-step
/// EB improvement used in the denoising simulation; `h = 0.85` there.
#[derive(Debug, Clone, Copy)]
pub struct EbOneStep {
    pub h: f64,
}

impl Default for EbOneStep {
    fn default() -> Self {
        Self { h: 0.85 }
    }
}

impl EbOneStep {
    /// `Ñ(k)` for `k = 0..=max+1`, built from a histogram of the counts so
    /// the result does not depend on their order.
    fn smoothed_frequencies(&self, y: &[u64]) -> Vec<f64> {
        let max = y.iter().copied().max().unwrap_or(0) as usize;
        let mut hist = vec![0u64; max + 1];
        for &v in y {
            hist[v as usize] += 1;
        }
        let two_h2 = 2.0 * self.h * self.h;
        (0..=max + 1)
            .map(|k| {
                let s: f64 = hist
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(|(v, &c)| {
                        let d = k as f64 - v as f64;
                        c as f64 * (-d * d / two_h2).exp()
                    })
                    .sum();
                (s / y.len() as f64).max(FREQ_FLOOR)
            })
            .collect()
    }
}

impl FitAlgorithm for EbOneStep {
    fn name(&self) -> String {
        format!("eb_one_step(h={})", self.h)
    }

    fn fit(&self, y: &[u64]) -> Vec<f64> {
        let freq = self.smoothed_frequencies(y);
        y.iter()
            .map(|&v| {
                let k = v as usize;
                (v as f64 + 1.0) * freq[k + 1] / freq[k]
            })
            .collect()
    }
}

pub fn eb_one_step(y: &[u64], h: f64) -> Vec<f64> {
    EbOneStep { h }.fit(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_bandwidth_collapses_toward_zero() {
        let fit = eb_one_step(&[4; 10], 0.05);
        assert!(fit.iter().all(|&v| (0.0..1e-10).contains(&v)), "{fit:?}");
    }

    #[test]
    fn permutation_equivariant() {
        let y = [0u64, 3, 1, 10, 2, 0, 7];
        let fit = eb_one_step(&y, 0.85);
        let perm = [3usize, 0, 6, 1, 5, 2, 4];
        let permuted: Vec<u64> = perm.iter().map(|&i| y[i]).collect();
        let fit_p = eb_one_step(&permuted, 0.85);
        for (j, &i) in perm.iter().enumerate() {
            assert_eq!(fit_p[j], fit[i]);
        }
    }

    #[test]
    fn nonnegative_and_finite() {
        let fit = eb_one_step(&[0, 0, 0, 50, 1], 0.85);
        assert!(fit.iter().all(|v| v.is_finite() && *v >= 0.0));
    }
}
