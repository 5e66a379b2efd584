//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "design": { "denoising": { "n": 100 } },
//!   "algorithm": { "eb": { "h": 0.85 } },
//!   "losses": ["squared", "deviance"],
//!   "p": [0.05, 0.1, 0.3, 0.5, 0.7],
//!   "methods": ["cb", "ue"],
//!   "b": 100,
//!   "repetitions": 100,
//!   "truth_draws": 2000,
//!   "seed": 1,
//!   "design_seed": 7
//! }
//! ```
//!
//! Designs and algorithms are externally tagged (`"glm"`, `{"cart": {}}`,
//! `{"lasso_cv": {"folds": 5}}`). Unknown fields are rejected and every
//! error names the offending path.

use std::path::{Path, PathBuf};

use anyhow::Context;
use cbpois::{LossKind, LossSpec, DEFAULT_PAD};
use serde::{Deserialize, Serialize};

/// How the mean vector of a simulation is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DesignSpec {
    /// `μᵢ = high` for the first `spikes` coordinates, `low` elsewhere.
    Denoising {
        n: usize,
        #[serde(default = "default_spikes")]
        spikes: usize,
        #[serde(default = "default_high")]
        high: f64,
        #[serde(default = "default_low")]
        low: f64,
    },
    /// `X ~ N(θ, I_d)`, `μ = Xβ` with constant `θ` and `β`.
    LowDim {
        n: usize,
        #[serde(default = "default_low_d")]
        d: usize,
        #[serde(default = "default_theta")]
        theta: f64,
        #[serde(default = "default_low_beta")]
        beta: f64,
    },
    /// `X ~ N(0, σ² I_d)`, `μ = max(Xβ, 0)`.
    HighDim {
        n: usize,
        #[serde(default = "default_high_d")]
        d: usize,
        #[serde(default = "default_sigma2")]
        sigma2: f64,
        #[serde(default = "default_high_beta")]
        beta: f64,
    },
    Constant {
        n: usize,
        mu: f64,
    },
    Explicit {
        mu: Vec<f64>,
    },
}

fn default_spikes() -> usize {
    10
}
fn default_high() -> f64 {
    10.0
}
fn default_low() -> f64 {
    0.5
}
fn default_low_d() -> usize {
    10
}
fn default_theta() -> f64 {
    3.0
}
fn default_low_beta() -> f64 {
    0.05
}
fn default_high_d() -> usize {
    200
}
fn default_sigma2() -> f64 {
    1.5
}
fn default_high_beta() -> f64 {
    0.13
}

impl DesignSpec {
    pub fn n(&self) -> usize {
        match self {
            DesignSpec::Denoising { n, .. }
            | DesignSpec::LowDim { n, .. }
            | DesignSpec::HighDim { n, .. }
            | DesignSpec::Constant { n, .. } => *n,
            DesignSpec::Explicit { mu } => mu.len(),
        }
    }

    /// Whether the design carries a feature matrix.
    pub fn has_features(&self) -> bool {
        matches!(self, DesignSpec::LowDim { .. } | DesignSpec::HighDim { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    Soft,
    Hard,
}

/// The fitting algorithm `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgorithmSpec {
    Identity,
    LinearShrinkage {
        #[serde(default = "default_weight")]
        weight: f64,
    },
    Threshold {
        lam: f64,
        rule: ThresholdRule,
    },
    Eb {
        #[serde(default = "default_h")]
        h: f64,
    },
    /// Poisson regression on the design features (with intercept).
    Glm,
    Cart {
        #[serde(default = "default_depth")]
        max_depth: usize,
        #[serde(default = "default_min_leaf")]
        min_leaf: usize,
    },
    LassoCv {
        #[serde(default = "default_folds")]
        folds: usize,
        #[serde(default = "default_grid")]
        grid: usize,
        #[serde(default)]
        fold_seed: u64,
    },
}

fn default_weight() -> f64 {
    0.8
}
fn default_h() -> f64 {
    0.85
}
fn default_depth() -> usize {
    4
}
fn default_min_leaf() -> usize {
    5
}
fn default_folds() -> usize {
    5
}
fn default_grid() -> usize {
    20
}

impl AlgorithmSpec {
    pub fn needs_features(&self) -> bool {
        matches!(
            self,
            AlgorithmSpec::Glm | AlgorithmSpec::Cart { .. } | AlgorithmSpec::LassoCv { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum LossName {
    Squared,
    Deviance,
}

impl LossName {
    pub fn spec(self, pad_c: f64) -> anyhow::Result<LossSpec> {
        let kind = match self {
            LossName::Squared => LossKind::Squared,
            LossName::Deviance => LossKind::Deviance,
        };
        Ok(LossSpec::new(kind, pad_c)?)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LossName::Squared => "squared",
            LossName::Deviance => "deviance",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Cb,
    Ue,
    UeSs,
}

/// A `simulate` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub design: DesignSpec,
    pub algorithm: AlgorithmSpec,
    pub losses: Vec<LossName>,
    /// Noise levels for CB; ignored when `p_rule` is `"choose"`.
    #[serde(default)]
    pub p: Vec<f64>,
    /// `"choose"` sets `p = min{0.1, Σμ/Σμ²}` from the true means.
    #[serde(default)]
    pub p_rule: Option<PRule>,
    pub methods: Vec<MethodName>,
    #[serde(default = "default_b")]
    pub b: usize,
    /// Subsample size for `ue_ss`.
    #[serde(default = "default_m")]
    pub m: usize,
    pub repetitions: usize,
    /// Monte Carlo draws per truth value; 0 leaves the truth columns empty.
    #[serde(default)]
    pub truth_draws: usize,
    pub seed: u64,
    /// Seed for the fixed feature matrix.
    #[serde(default)]
    pub design_seed: u64,
    #[serde(default = "default_pad")]
    pub pad_c: f64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PRule {
    Choose,
}

fn default_b() -> usize {
    100
}
fn default_m() -> usize {
    100
}
fn default_pad() -> f64 {
    DEFAULT_PAD
}

impl ExperimentConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        anyhow::ensure!(self.design.n() > 0, "design: n must be positive");
        anyhow::ensure!(!self.losses.is_empty(), "losses: list is empty");
        anyhow::ensure!(!self.methods.is_empty(), "methods: list is empty");
        if self.methods.contains(&MethodName::Cb) {
            anyhow::ensure!(self.b >= 1, "b: need at least one bootstrap draw");
            if self.p_rule.is_none() {
                anyhow::ensure!(!self.p.is_empty(), "p: list is empty and no p_rule given");
            }
            for (i, p) in self.p.iter().enumerate() {
                anyhow::ensure!(
                    (0.0..1.0).contains(p) && *p > 0.0,
                    "p[{i}]: must lie in (0, 1), got {p}"
                );
            }
        }
        if self.methods.contains(&MethodName::UeSs) {
            anyhow::ensure!(
                self.m >= 1 && self.m <= self.design.n(),
                "m: must lie in 1..={}, got {}",
                self.design.n(),
                self.m
            );
        }
        anyhow::ensure!(
            !self.algorithm.needs_features() || self.design.has_features(),
            "algorithm: needs a design with features (low_dim or high_dim)"
        );
        anyhow::ensure!(
            self.truth_draws == 0 || self.truth_draws >= 2,
            "truth_draws: need 0 or at least 2"
        );
        Ok(())
    }
}

/// Parses a config, reporting the JSON path of any schema error.
pub fn parse_config(text: &str) -> anyhow::Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        anyhow::anyhow!("config error at `{path}`: {}", e.into_inner())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> anyhow::Result<ExperimentConfig> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "design": {"denoising": {"n": 100}},
        "algorithm": {"eb": {}},
        "losses": ["squared"],
        "p": [0.1],
        "methods": ["cb"],
        "repetitions": 3,
        "seed": 4
    }"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.b, 100);
        assert_eq!(cfg.algorithm, AlgorithmSpec::Eb { h: 0.85 });
        assert_eq!(
            cfg.design,
            DesignSpec::Denoising {
                n: 100,
                spikes: 10,
                high: 10.0,
                low: 0.5
            }
        );
    }

    #[test]
    fn schema_errors_carry_the_field_path() {
        let bad = MINIMAL.replace(r#""n": 100"#, r#""n": "many""#);
        let msg = format!("{:#}", parse_config(&bad).unwrap_err());
        assert!(msg.contains("design.denoising.n"), "{msg}");
        let bad = MINIMAL.replace(r#""squared""#, r#""absolute""#);
        let msg = format!("{:#}", parse_config(&bad).unwrap_err());
        assert!(msg.contains("losses[0]"), "{msg}");
    }

    #[test]
    fn feature_algorithms_need_feature_designs() {
        let bad = MINIMAL.replace(r#"{"eb": {}}"#, r#""glm""#);
        assert!(parse_config(&bad).is_err());
    }

    #[test]
    fn p_must_be_in_range() {
        let bad = MINIMAL.replace("[0.1]", "[1.5]");
        assert!(parse_config(&bad).is_err());
    }
}
