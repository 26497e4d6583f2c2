//! Scalar state evolution for D-AMP and D-OAMP.
//!
//! The recursion alternates `τ_t² = Φ(v_t²)` with the denoiser MSE map
//! `v_{t+1}² = (1/N) E‖D(x₀ + τ_t e) − x₀‖²`, starting from
//! `v_0² = ‖x₀‖²/N`. The expectation is a sample average over Gaussian
//! draws whose seeds are derived per draw, so results do not depend on
//! evaluation order.

use crate::rng::{derive, gaussian_vec, rng_from};
use crate::Result;

/// Effective-noise map `Φ` relating the signal error `v²` to the noise
/// variance `τ²` of the pseudo-observation `r_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiKind {
    /// `(n/m)·v² + σ²`.
    Damp,
    /// OAMP with the trace-normalized LMMSE filter on i.i.d. Gaussian `A`.
    GaussianLmmse,
    /// OAMP on the randomized partial orthogonal operator.
    PartialOrthogonal,
}

impl PhiKind {
    pub fn eval(self, v2: f64, sigma2: f64, m: usize, n: usize) -> f64 {
        match self {
            PhiKind::Damp => phi_damp(v2, sigma2, m, n),
            PhiKind::GaussianLmmse => phi_gaussian_lmmse(v2, sigma2, m, n),
            PhiKind::PartialOrthogonal => phi_partial_orthogonal(v2, sigma2, m, n),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PhiKind::Damp => "damp",
            PhiKind::GaussianLmmse => "gaussian-lmmse",
            PhiKind::PartialOrthogonal => "partial-orthogonal",
        }
    }
}

/// `τ² = v²/δ + σ²` with undersampling ratio `δ = m/n`.
pub fn phi_damp(v2: f64, sigma2: f64, m: usize, n: usize) -> f64 {
    n as f64 / m as f64 * v2 + sigma2
}

/// `(σ² + c v² + sqrt((σ² + c v²)² + 4σ²v²)) / 2` with `c = (n − m)/m`.
pub fn phi_gaussian_lmmse(v2: f64, sigma2: f64, m: usize, n: usize) -> f64 {
    let c = (n - m) as f64 / m as f64;
    let a = sigma2 + c * v2;
    (a + (a * a + 4.0 * sigma2 * v2).sqrt()) / 2.0
}

/// `((n − m)/m)·v² + σ²`.
pub fn phi_partial_orthogonal(v2: f64, sigma2: f64, m: usize, n: usize) -> f64 {
    (n - m) as f64 / m as f64 * v2 + sigma2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MseMapConfig {
    pub samples: usize,
    pub seed: u64,
}

impl Default for MseMapConfig {
    fn default() -> Self {
        Self {
            samples: 8,
            seed: 0,
        }
    }
}

/// Sample average of `(1/n)‖D(x₀ + τe, τ) − x₀‖²` over `cfg.samples` draws.
///
/// Draw `i` uses the stream seeded by `cfg.seed ^ i`.
pub fn mse_map<F>(mut denoise: F, x0: &[f64], tau2: f64, cfg: MseMapConfig) -> Result<f64>
where
    F: FnMut(&[f64], f64) -> Result<Vec<f64>>,
{
    let n = x0.len();
    let tau = tau2.max(0.0).sqrt();
    let samples = cfg.samples.max(1);
    let mut total = 0.0;
    for i in 0..samples {
        let e = gaussian_vec(&mut rng_from(cfg.seed ^ i as u64), n);
        let r: Vec<f64> = x0.iter().zip(&e).map(|(x, e)| x + tau * e).collect();
        let d = denoise(&r, tau)?;
        total += d.iter().zip(x0).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64;
    }
    Ok(total / samples as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeRecord {
    pub t: usize,
    /// Predicted per-entry MSE of the iterate `x̂_t`.
    pub v2: f64,
    /// `Φ(v_t²)`, the predicted noise variance of `r_t`.
    pub tau2: f64,
    /// Predicted MSE of the output denoiser applied at `r_t`.
    pub predicted_output_mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeTrace {
    /// Records `t = 0..=iters`.
    pub per_iteration: Vec<SeRecord>,
    pub phi_kind: PhiKind,
}

impl SeTrace {
    pub fn v2(&self) -> Vec<f64> {
        self.per_iteration.iter().map(|r| r.v2).collect()
    }
}

/// Runs `iters` steps of state evolution from `v_0² = ‖x₀‖²/n`.
///
/// `denoise` receives `(r, τ)`. When `output_denoise` is given its MSE at
/// every `τ_t²` is recorded as the prediction for the final estimate.
#[allow(clippy::too_many_arguments)]
pub fn run_se<F, G>(
    x0: &[f64],
    mut denoise: F,
    phi_kind: PhiKind,
    m: usize,
    sigma2: f64,
    iters: usize,
    cfg: MseMapConfig,
    mut output_denoise: Option<G>,
) -> Result<SeTrace>
where
    F: FnMut(&[f64], f64) -> Result<Vec<f64>>,
    G: FnMut(&[f64], f64) -> Result<Vec<f64>>,
{
    let n = x0.len();
    let mut v2 = x0.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let mut per_iteration = Vec::with_capacity(iters + 1);
    for t in 0..=iters {
        let tau2 = phi_kind.eval(v2, sigma2, m, n);
        let step_cfg = MseMapConfig {
            samples: cfg.samples,
            seed: derive(cfg.seed, t as u64),
        };
        let predicted_output_mse = match output_denoise.as_mut() {
            Some(out) => Some(mse_map(out, x0, tau2, step_cfg)?),
            None => None,
        };
        per_iteration.push(SeRecord {
            t,
            v2,
            tau2,
            predicted_output_mse,
        });
        if t < iters {
            v2 = mse_map(&mut denoise, x0, tau2, step_cfg)?;
        }
    }
    Ok(SeTrace {
        per_iteration,
        phi_kind,
    })
}
