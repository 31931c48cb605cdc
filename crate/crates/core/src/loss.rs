//! Mean Absolute Directional Loss.
//!
//! Each forecast is scored by the realized return it would have captured:
//! a correct direction earns `-|R|`, a wrong one costs `+|R|`, and a flat call
//! (zero prediction or zero return) scores zero. Lower is better and a
//! negative mean means following the forecasts was profitable.
//!
//! The exact form is piecewise constant in the prediction, so its gradient is
//! zero almost everywhere. Training uses [`madl_surrogate`], which replaces
//! `sign(R·R̂)` with `tanh(β·R·R̂)`; selection and reporting use [`madl_exact`].

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Smoothing of the surrogate. Larger `sharpness` tracks the exact loss more closely.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateConfig {
    pub sharpness: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self { sharpness: 100.0 }
    }
}

impl SurrogateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sharpness.is_finite() && self.sharpness > 0.0 {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "surrogate sharpness must be finite and positive, got {}",
                self.sharpness
            )))
        }
    }
}

fn check_pairs(observed: &[f64], predicted_len: usize) -> Result<()> {
    if observed.is_empty() {
        return Err(Error::Usage("MADL needs at least one forecast".into()));
    }
    if observed.len() != predicted_len {
        return Err(Error::Usage(format!(
            "{} observed returns but {} predictions",
            observed.len(),
            predicted_len
        )));
    }
    if observed.iter().any(|r| !r.is_finite()) {
        return Err(Error::Numeric("observed returns must be finite".into()));
    }
    Ok(())
}

/// `sign` with `sign(0) = 0`.
fn signum0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `(1/N) Σ -sign(R_i·R̂_i)·|R_i|`.
pub fn madl_exact(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pairs(observed, predicted.len())?;
    if predicted.iter().any(|p| !p.is_finite()) {
        return Err(Error::Numeric("predictions must be finite".into()));
    }
    let total: f64 = observed
        .iter()
        .zip(predicted)
        .map(|(r, p)| -signum0(r * p) * r.abs())
        .sum();
    Ok(total / observed.len() as f64)
}

/// Differentiable `(1/N) Σ -tanh(β·R_i·R̂_i)·|R_i|` with respect to `predicted`.
///
/// `predicted` must be a tensor with one entry per observed return.
pub fn madl_surrogate(
    tape: &mut Tape,
    observed: &[f64],
    predicted: Var,
    cfg: &SurrogateConfig,
) -> Result<Var> {
    cfg.validate()?;
    check_pairs(observed, tape.value(predicted).len())?;
    let shape = tape.shape(predicted).to_vec();
    let beta_r = Tensor::new(
        shape.clone(),
        observed.iter().map(|r| cfg.sharpness * r).collect(),
    )?;
    let neg_abs = Tensor::new(shape, observed.iter().map(|r| -r.abs()).collect())?;
    let beta_r = tape.constant(beta_r);
    let neg_abs = tape.constant(neg_abs);
    let z = tape.mul(predicted, beta_r)?;
    let s = tape.tanh(z)?;
    let terms = tape.mul(s, neg_abs)?;
    tape.mean(terms)
}
