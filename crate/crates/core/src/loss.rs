//! Bregman-divergence losses on Poisson means.
//!
//! Both shipped losses are generated by a separable convex function `φ`:
//!
//! * squared loss: `φ(x) = ‖x‖²`, `D(a, b) = ‖a − b‖²`
//! * Poisson deviance: `φ(x) = 2 Σ xᵢ (log xᵢ − 1)`,
//!   `D(a, b) = 2 Σ (aᵢ log(aᵢ/bᵢ) + bᵢ − aᵢ)`
//!
//! with the convention `0·log 0 = 0`. Every divergence can be written as
//! `D(a, b) = φ(a) + κ(b) − ⟨∇φ(b), a⟩` where `κ(b) = ⟨∇φ(b), b⟩ − φ(b)`.
//! The estimators use that form because it is affine in the test argument
//! `a` and never subtracts two large `φ` values.

use crate::error::{Error, Result};

/// Default padding constant substituted for zero fitted means under deviance.
pub const DEFAULT_PAD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    Squared,
    Deviance,
}

impl LossKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Squared => "squared",
            LossKind::Deviance => "deviance",
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared" | "sqr" => Ok(LossKind::Squared),
            "deviance" | "dev" => Ok(LossKind::Deviance),
            other => Err(Error::param("loss", format!("unknown loss `{other}`"))),
        }
    }
}

/// A loss together with the deviance padding constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    pub kind: LossKind,
    pub pad_c: f64,
}

impl LossSpec {
    pub fn new(kind: LossKind, pad_c: f64) -> Result<Self> {
        if kind == LossKind::Deviance && !(pad_c > 0.0 && pad_c.is_finite()) {
            return Err(Error::param(
                "pad_c",
                format!("must be positive, got {pad_c}"),
            ));
        }
        Ok(Self { kind, pad_c })
    }

    pub fn squared() -> Self {
        Self {
            kind: LossKind::Squared,
            pad_c: DEFAULT_PAD,
        }
    }

    pub fn deviance() -> Self {
        Self {
            kind: LossKind::Deviance,
            pad_c: DEFAULT_PAD,
        }
    }

    pub fn is_deviance(&self) -> bool {
        self.kind == LossKind::Deviance
    }

    /// `D(a, b)`. For deviance `b` must already be padded (all entries > 0).
    pub fn loss(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        match self.kind {
            LossKind::Squared => squared_loss(a, b),
            LossKind::Deviance => deviance_loss(a, b, self),
        }
    }

    /// `φ(x)`, extended by `0·(log 0 − 1) = 0` for deviance.
    pub fn phi(&self, x: &[f64]) -> f64 {
        x.iter().map(|&v| self.phi1(v)).sum()
    }

    /// Pads zero entries for deviance; squared-loss fits pass through.
    pub fn prepare_fit(&self, fit: &[f64]) -> Vec<f64> {
        match self.kind {
            LossKind::Squared => fit.to_vec(),
            LossKind::Deviance => pad_fit(fit, self.pad_c),
        }
    }

    #[inline]
    pub(crate) fn phi1(&self, x: f64) -> f64 {
        match self.kind {
            LossKind::Squared => x * x,
            LossKind::Deviance => {
                if x == 0.0 {
                    0.0
                } else {
                    2.0 * x * (x.ln() - 1.0)
                }
            }
        }
    }

    /// `∂φ/∂xᵢ` at a (padded) fitted value.
    #[inline]
    pub(crate) fn grad1(&self, b: f64) -> f64 {
        match self.kind {
            LossKind::Squared => 2.0 * b,
            LossKind::Deviance => 2.0 * b.ln(),
        }
    }

    /// `κ(b) = b·φ'(b) − φ(b)` per coordinate.
    #[inline]
    pub(crate) fn offset1(&self, b: f64) -> f64 {
        match self.kind {
            LossKind::Squared => b * b,
            LossKind::Deviance => 2.0 * b,
        }
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch { left: a, right: b });
    }
    Ok(())
}

/// `Σᵢ (aᵢ − bᵢ)²`.
pub fn squared_loss(a: &[f64], b: &[f64]) -> Result<f64> {
    check_lengths(a.len(), b.len())?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// `2 Σᵢ (aᵢ log(aᵢ/bᵢ) + bᵢ − aᵢ)` with `0·log 0 = 0`.
///
/// A zero entry in `b` is a contract violation: pad the fit first.
pub fn deviance_loss(a: &[f64], b: &[f64], spec: &LossSpec) -> Result<f64> {
    check_lengths(a.len(), b.len())?;
    let _ = spec;
    let mut total = 0.0;
    for (index, (&ai, &bi)) in a.iter().zip(b).enumerate() {
        if !(bi > 0.0) {
            return Err(Error::NonPositiveMean { index, value: bi });
        }
        total += if ai == 0.0 {
            2.0 * bi
        } else {
            2.0 * (ai * (ai / bi).ln() + bi - ai)
        };
    }
    Ok(total)
}

/// `(φ(x), ∇φ(x))`.
pub fn phi_and_grad(spec: &LossSpec, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    if spec.is_deviance() {
        if let Some(index) = x.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::UndefinedGradient { index });
        }
    }
    Ok((spec.phi(x), x.iter().map(|&v| spec.grad1(v)).collect()))
}

/// Replaces every exact zero of `fit` by `c`.
pub fn pad_fit(fit: &[f64], c: f64) -> Vec<f64> {
    fit.iter().map(|&v| if v != 0.0 { v } else { c }).collect()
}
