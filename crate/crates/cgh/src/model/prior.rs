//! Per-bit Bernoulli prior on hash codes.

use ndarray::Array1;

use crate::error::{CghError, Result};
use crate::model::codes::BinaryCode;

#[derive(Debug, Clone, PartialEq)]
pub struct PriorParams {
    rho: Array1<f64>,
}

impl PriorParams {
    /// Every component must lie strictly inside (0,1).
    pub fn new(rho: Array1<f64>) -> Result<Self> {
        if rho.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(CghError::DomainError);
        }
        Ok(PriorParams { rho })
    }

    pub fn uniform(r: usize, rho: f64) -> Result<Self> {
        PriorParams::new(Array1::from_elem(r, rho))
    }

    pub fn rho(&self) -> &Array1<f64> {
        &self.rho
    }

    pub fn r(&self) -> usize {
        self.rho.len()
    }
}

/// Log prior of a code: sum_k b_k ln rho_k + (1 - b_k) ln(1 - rho_k).
pub fn log_prior(code: &BinaryCode, prior: &PriorParams) -> Result<f64> {
    if code.r() != prior.r() {
        return Err(CghError::LengthMismatch {
            left: code.r(),
            right: prior.r(),
        });
    }
    let mut total = 0.0;
    for (k, &rho) in prior.rho().iter().enumerate() {
        total += if code.bit(k) { rho.ln() } else { (1.0 - rho).ln() };
    }
    Ok(total)
}
