//! Error measures for the Monte-Carlo sweeps.

use crate::error::{Error, Result};
use crate::gaussian::ComplexScalar;

/// Fraction of positions where the decisions differ from the truth.
pub fn ser(decided: &[f64], truth: &[f64]) -> Result<f64> {
    if decided.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            found: decided.len(),
        });
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    let errors = decided.iter().zip(truth).filter(|(a, b)| a != b).count();
    Ok(errors as f64 / truth.len() as f64)
}

/// Mean of `|estimate - truth|^2` over the components.
pub fn mse(estimate: &[ComplexScalar], truth: &[ComplexScalar]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            found: estimate.len(),
        });
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    Ok(estimate
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        / truth.len() as f64)
}
