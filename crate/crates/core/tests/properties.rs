//! Randomized invariants across the library.

use cbpois::zoo::{
    DesignMatrix, EbOneStep, Identity, LinearShrinkage, PoissonTree, Threshold, TvDenoiser,
};
use cbpois::{
    cb_estimate, cb_infinite_exact, draw_coupled_bootstrap, squared_loss, ue_estimate, CountVector,
    FitAlgorithm, LossSpec,
};
use proptest::prelude::*;

fn counts(max_len: usize, max_count: u64) -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(0..=max_count, 1..=max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zoo_fits_are_nonnegative_and_sized(y in counts(30, 25)) {
        let n = y.len();
        let x = DesignMatrix::new(n, 1, (0..n).map(|i| (i * 7 % 5) as f64).collect()).unwrap();
        let algs: Vec<Box<dyn FitAlgorithm>> = vec![
            Box::new(Identity),
            Box::new(LinearShrinkage::default()),
            Box::new(Threshold::soft(1.5)),
            Box::new(Threshold::hard(1.5)),
            Box::new(EbOneStep::default()),
            Box::new(PoissonTree::new(x, 3, 2).unwrap()),
        ];
        for g in &algs {
            let fit = g.fit(&y);
            prop_assert_eq!(fit.len(), n);
            prop_assert!(fit.iter().all(|v| v.is_finite() && *v >= 0.0), "{}", g.name());
            prop_assert_eq!(fit, g.fit(&y));
        }
    }

    #[test]
    fn tv_fit_is_nonnegative(y in prop::collection::vec(0u64..30, 16)) {
        let fit = TvDenoiser::new(4, 4, 0.7).unwrap().fit(&y);
        prop_assert!(fit.iter().all(|&v| v >= 0.0 && v.is_finite()));
    }

    #[test]
    fn cb_is_deterministic(y in counts(8, 10), seed in any::<u64>(), p in 0.05f64..0.9) {
        let y = CountVector::new(y).unwrap();
        let g = LinearShrinkage::default();
        for loss in [LossSpec::squared(), LossSpec::deviance()] {
            let a = cb_estimate(&y, &g, &loss, p, 7, seed).unwrap();
            let b = cb_estimate(&y, &g, &loss, p, 7, seed).unwrap();
            prop_assert_eq!(a, b);
        }
        let d = draw_coupled_bootstrap(&y, p, 5, seed).unwrap();
        for pair in &d.pairs {
            for i in 0..y.len() {
                prop_assert_eq!(pair.y_star[i] + pair.omega[i], y[i]);
            }
        }
    }

    #[test]
    fn ue_identity_squared_is_twice_the_total(y in counts(20, 50)) {
        let v = ue_estimate(&CountVector::new(y.clone()).unwrap(), &Identity, &LossSpec::squared()).unwrap().value;
        prop_assert!((v - 2.0 * y.iter().sum::<u64>() as f64).abs() < 1e-9);
    }

    #[test]
    fn ue_constant_fit_is_plain_loss(y in counts(10, 20), c in prop::collection::vec(0.0f64..10.0, 10)) {
        let c = c[..y.len()].to_vec();
        let g = cbpois::zoo::Constant(c.clone());
        let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
        let v = ue_estimate(&CountVector::new(y).unwrap(), &g, &LossSpec::squared()).unwrap().value;
        let direct = squared_loss(&yf, &c).unwrap();
        prop_assert!((v - direct).abs() < 1e-9 * (1.0 + direct));
    }

    #[test]
    fn infinite_cb_single_count_identity(y in 0u64..40, p in 0.01f64..0.99) {
        // each ω gives φ(y−ω) + (y−ω)² − 2(y−ω)·((1−p)/p)ω; the mean is 2(1−p)y
        let v = cb_infinite_exact(&CountVector::new(vec![y]).unwrap(), &Identity, &LossSpec::squared(), p).unwrap();
        prop_assert!((v - 2.0 * (1.0 - p) * y as f64).abs() < 1e-8 * (1.0 + y as f64 * y as f64));
    }
}
