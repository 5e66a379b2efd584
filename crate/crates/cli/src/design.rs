//! Mean vectors, fixed features and fitting algorithms built from config.

use cbpois::rng::{stream, Domain};
use cbpois::zoo::{
    DesignMatrix, EbOneStep, Identity, LassoPoissonCv, LinearShrinkage, PoissonGlm, PoissonTree,
    Threshold,
};
use cbpois::{FitAlgorithm, MeanVector};

use crate::config::{AlgorithmSpec, DesignSpec, ThresholdRule};

/// True means plus the feature matrix they were built from, if any.
#[derive(Debug, Clone)]
pub struct Design {
    pub mu: MeanVector,
    pub x: Option<DesignMatrix>,
}

impl Design {
    /// `Var(μ)/mean(μ)` over the coordinates.
    pub fn snr(&self) -> f64 {
        let n = self.mu.len() as f64;
        let mean = self.mu.total() / n;
        let var = self.mu.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / n;
        var / mean
    }
}

/// Builds the design; features are drawn once from `design_seed`.
pub fn build_design(spec: &DesignSpec, design_seed: u64) -> anyhow::Result<Design> {
    let mut rng = stream(design_seed, Domain::Design, 0);
    let (mu, x) = match *spec {
        DesignSpec::Denoising {
            n,
            spikes,
            high,
            low,
        } => (
            (0..n)
                .map(|i| if i < spikes { high } else { low })
                .collect(),
            None,
        ),
        DesignSpec::LowDim { n, d, theta, beta } => {
            let x = DesignMatrix::gaussian(n, d, theta, 1.0, &mut rng)?;
            let mu = x
                .mul_vec(&vec![beta; d])
                .into_iter()
                .map(|v| v.max(0.0))
                .collect();
            (mu, Some(x))
        }
        DesignSpec::HighDim { n, d, sigma2, beta } => {
            let x = DesignMatrix::gaussian(n, d, 0.0, sigma2, &mut rng)?;
            let mu = x
                .mul_vec(&vec![beta; d])
                .into_iter()
                .map(|v| v.max(0.0))
                .collect();
            (mu, Some(x))
        }
        DesignSpec::Constant { n, mu } => (vec![mu; n], None),
        DesignSpec::Explicit { ref mu } => (mu.clone(), None),
    };
    Ok(Design {
        mu: MeanVector::new(mu)?,
        x,
    })
}

pub fn build_algorithm(
    spec: &AlgorithmSpec,
    design: &Design,
) -> anyhow::Result<Box<dyn FitAlgorithm + Send>> {
    let features = || {
        design
            .x
            .clone()
            .ok_or_else(|| anyhow::anyhow!("algorithm needs a design with features"))
    };
    Ok(match *spec {
        AlgorithmSpec::Identity => Box::new(Identity),
        AlgorithmSpec::LinearShrinkage { weight } => Box::new(LinearShrinkage { weight }),
        AlgorithmSpec::Threshold { lam, rule } => Box::new(match rule {
            ThresholdRule::Soft => Threshold::soft(lam),
            ThresholdRule::Hard => Threshold::hard(lam),
        }),
        AlgorithmSpec::Eb { h } => {
            anyhow::ensure!(h > 0.0, "eb bandwidth must be positive");
            Box::new(EbOneStep { h })
        }
        AlgorithmSpec::Glm => Box::new(PoissonGlm::with_intercept(&features()?)),
        AlgorithmSpec::Cart {
            max_depth,
            min_leaf,
        } => Box::new(PoissonTree::new(features()?, max_depth, min_leaf)?),
        AlgorithmSpec::LassoCv {
            folds,
            grid,
            fold_seed,
        } => Box::new(LassoPoissonCv::new(features()?, folds, grid, fold_seed)?),
    })
}
