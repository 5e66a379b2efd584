//! Estimator properties checked against the enumeration and Monte Carlo oracles.

use cbpois::oracle::{enum_truth, mc_truth, ProductSupport};
use cbpois::rng::{derive_seed, poisson_vector, stream, Domain};
use cbpois::zoo::{EbOneStep, Identity, LinearShrinkage, Threshold};
use cbpois::{
    cb_estimate, cb_infinite_exact, mean_and_se, ue_estimate, ue_sampled, CountVector,
    FitAlgorithm, LossSpec, MeanVector,
};

fn losses() -> [LossSpec; 2] {
    [LossSpec::squared(), LossSpec::deviance()]
}

/// `E[f(Y)]` over the truncated law of `Y ~ Pois(mu)`.
fn expect(mu: &[f64], f: impl Fn(&CountVector) -> f64) -> f64 {
    let support = ProductSupport::new(mu, 1e-12).unwrap();
    let mut total = 0.0;
    support.for_each(|_, y, prob| total += prob * f(&CountVector::new(y.to_vec()).unwrap()));
    total
}

#[test]
fn cb_is_unbiased_for_the_shrunken_error() {
    let mu = [0.5, 1.0, 2.0];
    let g = Threshold::hard(1.5);
    for loss in losses() {
        for p in [0.1, 0.3] {
            let mean_cb = expect(&mu, |y| cb_infinite_exact(y, &g, &loss, p).unwrap());
            let truth = enum_truth(&MeanVector::new(mu.to_vec()).unwrap(), &g, &loss, p).unwrap();
            let rel = (mean_cb - truth.value).abs() / truth.value;
            assert!(rel < 1e-6, "{loss:?} p={p}: {mean_cb} vs {}", truth.value);
        }
    }
}

#[test]
fn ue_is_unbiased_for_the_error() {
    let mu = [0.8, 2.5];
    for loss in losses() {
        let algs: Vec<Box<dyn FitAlgorithm>> = vec![
            Box::new(Identity),
            Box::new(Threshold::hard(1.0)),
            Box::new(LinearShrinkage::default()),
            Box::new(EbOneStep::default()),
        ];
        for g in &algs {
            let mean_ue = expect(&mu, |y| ue_estimate(y, g, &loss).unwrap().value);
            let truth = enum_truth(&MeanVector::new(mu.to_vec()).unwrap(), g, &loss, 0.0).unwrap();
            let rel = (mean_ue - truth.value).abs() / truth.value.abs();
            assert!(
                rel < 1e-6,
                "{} {loss:?}: {mean_ue} vs {}",
                g.name(),
                truth.value
            );
        }
    }
}

#[test]
fn model_comparison_matches_truth_difference() {
    let mu = [1.0, 2.0];
    let m = MeanVector::new(mu.to_vec()).unwrap();
    let g = Threshold::hard(1.5);
    let h = LinearShrinkage::default();
    let loss = LossSpec::squared();
    let p = 0.2;
    let diff_cb = expect(&mu, |y| {
        cb_infinite_exact(y, &g, &loss, p).unwrap() - cb_infinite_exact(y, &h, &loss, p).unwrap()
    });
    let diff_truth =
        enum_truth(&m, &g, &loss, p).unwrap().value - enum_truth(&m, &h, &loss, p).unwrap().value;
    assert!((diff_cb - diff_truth).abs() < 1e-8 * diff_truth.abs().max(1.0));
}

#[test]
fn noiseless_limit_is_linear_in_p() {
    let fixtures: Vec<(Vec<u64>, Box<dyn FitAlgorithm>, LossSpec)> = vec![
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
    ];
    for (y, g, loss) in &fixtures {
        let y = CountVector::new(y.clone()).unwrap();
        let ue = ue_estimate(&y, g, loss).unwrap().value;
        let gaps: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&p| (cb_infinite_exact(&y, g, loss, p).unwrap() - ue).abs())
            .collect();
        for w in gaps.windows(2) {
            let ratio = w[0] / w[1];
            assert!(
                (8.0..=12.0).contains(&ratio),
                "{} {loss:?}: gaps {gaps:?}",
                g.name()
            );
        }
    }
}

#[test]
fn cb_matches_mc_truth_on_sparse_design() {
    let n = 100;
    let mu = MeanVector::constant(n, 0.5).unwrap();
    let g = LinearShrinkage::default();
    let loss = LossSpec::deviance();
    let (p, b, reps) = (0.1, 100, 2000);
    let values: Vec<f64> = (0..reps)
        .map(|r| {
            let y = CountVector::new(poisson_vector(&mu, &mut stream(1, Domain::Data, r))).unwrap();
            cb_estimate(&y, &g, &loss, p, b, derive_seed(1, Domain::Bootstrap, r))
                .unwrap()
                .value
        })
        .collect();
    let (mean, se) = mean_and_se(&values);
    let truth = mc_truth(&mu, &g, &loss, p, 20_000, 2).unwrap();
    let tol = 4.0 * (se * se + truth.std_error * truth.std_error).sqrt();
    assert!(
        (mean - truth.value).abs() < tol,
        "{mean} vs {} (tol {tol})",
        truth.value
    );
}

#[test]
fn subsampling_adds_variance() {
    let n = 1000;
    let mu = MeanVector::constant(n, 0.5).unwrap();
    let g = LinearShrinkage::default();
    let loss = LossSpec::squared();
    let (mut full, mut sampled) = (Vec::new(), Vec::new());
    for r in 0..2000 {
        let y = CountVector::new(poisson_vector(&mu, &mut stream(4, Domain::Data, r))).unwrap();
        full.push(ue_estimate(&y, &g, &loss).unwrap().value);
        sampled.push(ue_sampled(&y, &g, &loss, 100, r).unwrap().value);
    }
    let var = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
    };
    assert!(
        var(&sampled) > var(&full),
        "{} vs {}",
        var(&sampled),
        var(&full)
    );
    // both stay unbiased for the same target
    let (ms, ses) = mean_and_se(&sampled);
    let (mf, sef) = mean_and_se(&full);
    assert!((ms - mf).abs() < 4.0 * (ses * ses + sef * sef).sqrt());
}

#[test]
fn padded_summands_count_only_consulted_pads() {
    // g ≡ 0: under deviance every nonzero Y† consults the pad
    let zero = cbpois::FnFit::new("zero", |y: &[u64]| vec![0.0; y.len()]);
    let y = CountVector::new(vec![0, 5, 0, 9]).unwrap();
    let est = cb_estimate(&y, &zero, &LossSpec::deviance(), 0.5, 200, 3).unwrap();
    let draws = cbpois::draw_coupled_bootstrap(&y, 0.5, 200, 3).unwrap();
    let expected: u64 = draws
        .pairs
        .iter()
        .map(|q| q.omega.iter().filter(|&&w| w > 0).count() as u64)
        .sum();
    assert_eq!(est.n_padded_summands, expected);
    assert_eq!(
        cb_estimate(&y, &zero, &LossSpec::squared(), 0.5, 200, 3)
            .unwrap()
            .n_padded_summands,
        0
    );
}
