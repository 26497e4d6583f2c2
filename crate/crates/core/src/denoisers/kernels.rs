use crate::{Error, Result};

/// Componentwise `sign(r)·max(|r| − lambda, 0)`.
pub fn soft_threshold(r: &[f64], lambda: f64) -> Vec<f64> {
    r.iter()
        .map(|&v| {
            if v > lambda {
                v - lambda
            } else if v < -lambda {
                v + lambda
            } else {
                0.0
            }
        })
        .collect()
}

/// Exact normalized divergence of [`soft_threshold`]: the fraction of
/// entries with `|r_i| > lambda`.
pub fn analytic_divergence_soft(r: &[f64], lambda: f64) -> f64 {
    if r.is_empty() {
        return 0.0;
    }
    r.iter().filter(|v| v.abs() > lambda).count() as f64 / r.len() as f64
}

/// Elementary LET kernels: soft-thresholds at `knots[k]·sigma`.
pub fn let_kernel_bank(r: &[f64], sigma: f64, knots: &[f64]) -> Result<Vec<Vec<f64>>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidNoiseLevel(sigma));
    }
    Ok(knots.iter().map(|k| soft_threshold(r, k * sigma)).collect())
}

/// Analytic normalized divergences of the kernels from [`let_kernel_bank`].
pub fn let_kernel_divergences(r: &[f64], sigma: f64, knots: &[f64]) -> Vec<f64> {
    knots
        .iter()
        .map(|k| analytic_divergence_soft(r, k * sigma))
        .collect()
}

/// Per-entry derivatives of the kernels from [`let_kernel_bank`]:
/// `1` where `|r_i| > knots[k]·sigma`, else `0`.
pub fn let_kernel_slopes(r: &[f64], sigma: f64, knots: &[f64]) -> Vec<Vec<f64>> {
    knots
        .iter()
        .map(|k| {
            let lambda = k * sigma;
            r.iter()
                .map(|v| if v.abs() > lambda { 1.0 } else { 0.0 })
                .collect()
        })
        .collect()
}
