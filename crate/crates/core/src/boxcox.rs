//! Shifted Box-Cox power transformation.

use crate::error::{Result, StmError};

/// Below this magnitude λ is treated as exactly zero (log branch).
pub const LAMBDA_ZERO_EPS: f64 = 1e-8;

/// Shift constant `c0`; the transform applies to `y` with `y + c0 > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedBoxCox {
    pub c0: f64,
}

impl ShiftedBoxCox {
    pub fn new(c0: f64) -> Self {
        ShiftedBoxCox { c0 }
    }

    pub fn transform(&self, y: f64, lambda: f64) -> Result<f64> {
        transform(y, lambda, self.c0)
    }

    pub fn inverse(&self, z: f64, lambda: f64) -> Result<f64> {
        inverse_transform(z, lambda, self.c0)
    }
}

/// Box-Cox transform of an already shifted, already logged value:
/// `log_shifted = log(y + c0)`.
#[inline]
pub fn transform_log(log_shifted: f64, lambda: f64) -> f64 {
    if lambda.abs() < LAMBDA_ZERO_EPS {
        log_shifted
    } else {
        (lambda * log_shifted).exp_m1() / lambda
    }
}

pub fn transform(y: f64, lambda: f64, c0: f64) -> Result<f64> {
    let shifted = y + c0;
    if !(shifted > 0.0) {
        return Err(StmError::Domain(format!(
            "Box-Cox needs y + c0 > 0, got y = {y}, c0 = {c0}"
        )));
    }
    Ok(transform_log(shifted.ln(), lambda))
}

pub fn inverse_transform(z: f64, lambda: f64, c0: f64) -> Result<f64> {
    if lambda.abs() < LAMBDA_ZERO_EPS {
        return Ok(z.exp() - c0);
    }
    let base = lambda * z + 1.0;
    if !(base > 0.0) {
        return Err(StmError::Domain(format!(
            "inverse Box-Cox needs lambda * z + 1 > 0, got lambda = {lambda}, z = {z}"
        )));
    }
    Ok(((lambda * z).ln_1p() / lambda).exp() - c0)
}

/// `Σ_i (λ - 1) log(y_i + c0)`.
pub fn log_jacobian(ys: &[f64], lambda: f64, c0: f64) -> Result<f64> {
    let mut sum = 0.0;
    for &y in ys {
        let shifted = y + c0;
        if !(shifted > 0.0) {
            return Err(StmError::Domain(format!(
                "Jacobian needs y + c0 > 0, got y = {y}, c0 = {c0}"
            )));
        }
        sum += shifted.ln();
    }
    Ok((lambda - 1.0) * sum)
}

/// `c0 = max(0, eps - min y)`.
pub fn default_shift(ys: impl IntoIterator<Item = f64>, eps: f64) -> f64 {
    let min = ys.into_iter().fold(f64::INFINITY, f64::min);
    if min.is_finite() {
        (eps - min).max(0.0)
    } else {
        0.0
    }
}
