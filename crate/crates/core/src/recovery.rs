//! D-AMP and D-OAMP iterations.
//!
//! Both loops start from `x̂_0 = 0`, `z_0 = y`. D-AMP keeps an Onsager
//! correction in the residual and uses a plain denoiser; D-OAMP drops the
//! correction, filters the residual with the trace-normalized `W_t` and
//! uses a divergence-free denoiser, emitting `D^out` at the last step.

use crate::denoisers::{base_denoise, df_denoise, DenoiserSpec};
use crate::operators::{OperatorKind, SensingOperator};
use crate::rng::derive;
use crate::state_evolution::PhiKind;
use crate::{Error, Result};

/// Floor applied to every variance estimate.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// A run is flagged divergent once its tracked variance exceeds this
/// multiple of the initial value.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Damp,
    Doamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaEstimator {
    /// `‖z‖²/m`.
    MeanSquare,
    /// `(median|z_i| / 0.6745)²`.
    Median,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryConfig {
    pub algorithm: Algorithm,
    pub max_iters: usize,
    /// Relative change of the tracked variance that stops the loop; 0 disables.
    pub stop_rel_tol: f64,
    /// Noise estimator for D-AMP.
    pub sigma_estimator: SigmaEstimator,
    /// Measurement noise variance; required by D-OAMP.
    pub sigma2_known: Option<f64>,
    /// D-AMP only: keep the Onsager term (disable for ablations).
    pub onsager: bool,
    /// D-OAMP only: override the `Φ` map implied by the operator kind.
    pub phi: Option<PhiKind>,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Doamp,
            max_iters: 30,
            stop_rel_tol: 1e-4,
            sigma_estimator: SigmaEstimator::Median,
            sigma2_known: None,
            onsager: true,
            phi: None,
        }
    }
}

impl RecoveryConfig {
    pub fn damp() -> Self {
        Self {
            algorithm: Algorithm::Damp,
            ..Self::default()
        }
    }

    pub fn doamp(sigma2: f64) -> Self {
        Self {
            algorithm: Algorithm::Doamp,
            sigma2_known: Some(sigma2),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub t: usize,
    /// Noise-level estimate used by the denoiser at iteration `t`.
    pub sigma_hat2: f64,
    /// Estimated per-entry MSE of `x̂_t`. For D-AMP this is derived from
    /// `σ̂_t²` as `(m/n)(σ̂_t² − σ²)`.
    pub v_hat2: f64,
    /// `‖z_t‖²`, before the denoising step.
    pub residual_norm2: f64,
    /// NMSE of the iterate `x̂_{t+1}` produced by this iteration.
    pub nmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryTrace {
    pub per_iteration: Vec<IterationRecord>,
    pub x_final: Vec<f64>,
    pub converged_at: Option<usize>,
    pub diverged: bool,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn nmse_against(x: &[f64], truth: Option<&[f64]>) -> Option<f64> {
    let x0 = truth?;
    let e0 = norm2(x0);
    if e0 == 0.0 {
        return None;
    }
    Some(x.iter().zip(x0).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / e0)
}

/// `‖z‖²/m`.
pub fn estimate_sigma_mean_square(z: &[f64]) -> f64 {
    if z.is_empty() {
        return 0.0;
    }
    norm2(z) / z.len() as f64
}

/// Squared MAD scale estimate `(median|z_i| / 0.6745)²`.
pub fn estimate_sigma_median(z: &[f64]) -> f64 {
    if z.is_empty() {
        return 0.0;
    }
    let mut a: Vec<f64> = z.iter().map(|v| v.abs()).collect();
    let mid = a.len() / 2;
    let (lower, upper, _) = a.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    let med = if z.len() % 2 == 1 {
        upper
    } else {
        let lower_max = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower_max + upper)
    };
    (med / 0.6745).powi(2)
}

/// `max((‖z‖² − m σ²) / trace(AᵀA), 1e-12)`.
pub fn estimate_v_oamp(z_norm2: f64, m: usize, sigma2: f64, trace_gram: f64) -> Result<f64> {
    if !(trace_gram > 0.0) {
        return Err(Error::InvalidOperatorStats(trace_gram));
    }
    Ok(((z_norm2 - m as f64 * sigma2) / trace_gram).max(VARIANCE_FLOOR))
}

/// Multiplier of `z_t` in the D-AMP residual update: `(n/m)·div`.
pub fn onsager_coefficient(div_norm: f64, m: usize, n: usize) -> f64 {
    n as f64 / m as f64 * div_norm
}

/// `Φ` implied by the operator kind for D-OAMP.
pub fn default_phi(kind: OperatorKind) -> PhiKind {
    match kind {
        OperatorKind::DenseGaussian => PhiKind::GaussianLmmse,
        OperatorKind::PartialDct => PhiKind::PartialOrthogonal,
    }
}

fn check_inputs(
    op: &SensingOperator,
    y: &[f64],
    x0: Option<&[f64]>,
    cfg: &RecoveryConfig,
) -> Result<()> {
    if y.len() != op.m() {
        return Err(Error::InvalidDimensions(format!(
            "measurements have length {}, operator expects {}",
            y.len(),
            op.m()
        )));
    }
    if let Some(x0) = x0 {
        if x0.len() != op.n() {
            return Err(Error::InvalidDimensions(format!(
                "ground truth has length {}, operator expects {}",
                x0.len(),
                op.n()
            )));
        }
    }
    if cfg.max_iters == 0 {
        return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
    }
    Ok(())
}

fn diverging(value: f64, initial: f64) -> bool {
    !value.is_finite() || (initial > 0.0 && value > DIVERGENCE_FACTOR * initial)
}

fn settled(current: f64, previous: f64, tol: f64) -> bool {
    tol > 0.0 && (current - previous).abs() <= tol * previous
}

/// Denoising-based AMP.
pub fn run_damp(
    op: &SensingOperator,
    y: &[f64],
    spec: &DenoiserSpec,
    cfg: &RecoveryConfig,
    seed: u64,
    x0_truth: Option<&[f64]>,
) -> Result<RecoveryTrace> {
    check_inputs(op, y, x0_truth, cfg)?;
    spec.validate()?;
    let (m, n) = (op.m(), op.n());
    let sigma2 = cfg.sigma2_known.unwrap_or(0.0);

    let mut x_hat = vec![0.0; n];
    let mut z = y.to_vec();
    let mut records = Vec::with_capacity(cfg.max_iters);
    let mut converged_at = None;
    let mut diverged = false;
    let mut initial = None;
    let mut previous: Option<f64> = None;

    for t in 0..cfg.max_iters {
        let raw = match cfg.sigma_estimator {
            SigmaEstimator::MeanSquare => estimate_sigma_mean_square(&z),
            SigmaEstimator::Median => estimate_sigma_median(&z),
        };
        let sigma_hat2 = raw.max(VARIANCE_FLOOR);
        let init = *initial.get_or_insert(sigma_hat2);
        if diverging(sigma_hat2, init) {
            diverged = true;
            break;
        }
        if let Some(prev) = previous {
            if settled(sigma_hat2, prev, cfg.stop_rel_tol) {
                converged_at = Some(t);
                break;
            }
        }
        previous = Some(sigma_hat2);

        let residual_norm2 = norm2(&z);
        let at_z = op.adjoint(&z)?;
        let r: Vec<f64> = x_hat.iter().zip(&at_z).map(|(x, a)| x + a).collect();
        let est = base_denoise(spec, &r, sigma_hat2.sqrt(), derive(seed, t as u64))?;

        let ax = op.forward(&est.output)?;
        let c = if cfg.onsager {
            onsager_coefficient(est.divergence, m, n)
        } else {
            0.0
        };
        z = y
            .iter()
            .zip(&ax)
            .zip(&z)
            .map(|((yi, ai), zi)| yi - ai + c * zi)
            .collect();
        x_hat = est.output;

        records.push(IterationRecord {
            t,
            sigma_hat2,
            v_hat2: (m as f64 / n as f64 * (sigma_hat2 - sigma2)).max(VARIANCE_FLOOR),
            residual_norm2,
            nmse: nmse_against(&x_hat, x0_truth),
        });
        if x_hat.iter().any(|v| !v.is_finite()) {
            diverged = true;
            break;
        }
    }

    Ok(RecoveryTrace {
        per_iteration: records,
        x_final: x_hat,
        converged_at,
        diverged,
    })
}

/// Denoising-based orthogonal AMP.
pub fn run_doamp(
    op: &SensingOperator,
    y: &[f64],
    spec: &DenoiserSpec,
    cfg: &RecoveryConfig,
    seed: u64,
    x0_truth: Option<&[f64]>,
) -> Result<RecoveryTrace> {
    check_inputs(op, y, x0_truth, cfg)?;
    spec.validate()?;
    let sigma2 = cfg.sigma2_known.ok_or(Error::MissingNoiseLevel)?;
    if !(sigma2 >= 0.0) {
        return Err(Error::InvalidNoiseLevel(sigma2));
    }
    let (m, n) = (op.m(), op.n());
    let phi = cfg.phi.unwrap_or_else(|| default_phi(op.kind()));
    let trace_gram = op.trace_gram();

    let mut x_hat = vec![0.0; n];
    let mut x_out = vec![0.0; n];
    let mut z = y.to_vec();
    let mut records = Vec::with_capacity(cfg.max_iters);
    let mut converged_at = None;
    let mut diverged = false;
    let mut initial = None;
    let mut previous: Option<f64> = None;

    for t in 0..cfg.max_iters {
        let residual_norm2 = norm2(&z);
        let v_hat2 = estimate_v_oamp(residual_norm2, m, sigma2, trace_gram)?;
        let init = *initial.get_or_insert(v_hat2);
        if diverging(v_hat2, init) {
            diverged = true;
            break;
        }
        if let Some(prev) = previous {
            if settled(v_hat2, prev, cfg.stop_rel_tol) {
                converged_at = Some(t);
                break;
            }
        }
        previous = Some(v_hat2);

        let wz = op.oamp_filter(&z, v_hat2, sigma2)?;
        let r: Vec<f64> = x_hat.iter().zip(&wz).map(|(x, w)| x + w).collect();
        let sigma_hat2 = phi.eval(v_hat2, sigma2, m, n).max(VARIANCE_FLOOR);

        if r.iter().all(|&v| v == 0.0) {
            // every denoiser maps 0 to 0; the divergence-free direction is undefined there
            x_hat = vec![0.0; n];
            x_out = vec![0.0; n];
        } else {
            let res = df_denoise(spec, &r, sigma_hat2.sqrt(), derive(seed, t as u64))?;
            x_hat = res.x_df;
            x_out = res.x_out;
        }
        let ax = op.forward(&x_hat)?;
        z = y.iter().zip(&ax).map(|(yi, ai)| yi - ai).collect();

        records.push(IterationRecord {
            t,
            sigma_hat2,
            v_hat2,
            residual_norm2,
            nmse: nmse_against(&x_hat, x0_truth),
        });
        if x_hat.iter().any(|v| !v.is_finite()) {
            diverged = true;
            break;
        }
    }

    Ok(RecoveryTrace {
        per_iteration: records,
        x_final: x_out,
        converged_at,
        diverged,
    })
}

/// Dispatches on `cfg.algorithm`.
pub fn run(
    op: &SensingOperator,
    y: &[f64],
    spec: &DenoiserSpec,
    cfg: &RecoveryConfig,
    seed: u64,
    x0_truth: Option<&[f64]>,
) -> Result<RecoveryTrace> {
    match cfg.algorithm {
        Algorithm::Damp => run_damp(op, y, spec, cfg, seed, x0_truth),
        Algorithm::Doamp => run_doamp(op, y, spec, cfg, seed, x0_truth),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_vec, rng_from};

    #[test]
    fn mean_square_estimator() {
        assert_eq!(estimate_sigma_mean_square(&[0.0; 5]), 0.0);
        assert_eq!(estimate_sigma_mean_square(&[3.0, 4.0]), 12.5);
        let z: Vec<f64> = gaussian_vec(&mut rng_from(1), 100_000)
            .into_iter()
            .map(|v| 2.0 * v)
            .collect();
        assert!((estimate_sigma_mean_square(&z) - 4.0).abs() < 0.1);
    }

    #[test]
    fn median_estimator() {
        assert!((estimate_sigma_median(&[0.6745, -0.6745, 0.6745]) - 1.0).abs() < 1e-15);
        assert!((estimate_sigma_median(&[0.1, -0.6745, 0.6745, 5.0]) - 1.0).abs() < 1e-15);
        let z = gaussian_vec(&mut rng_from(2), 100_000);
        assert!((estimate_sigma_median(&z) - 1.0).abs() < 0.05);
    }

    #[test]
    fn median_estimator_resists_contamination() {
        let mut z = gaussian_vec(&mut rng_from(3), 100_000);
        for (i, v) in z.iter_mut().enumerate().filter(|(i, _)| i % 20 == 0) {
            *v = if i % 40 == 0 { 100.0 } else { -100.0 };
        }
        let med = estimate_sigma_median(&z);
        let ms = estimate_sigma_mean_square(&z);
        assert!((med - 1.0).abs() <= 0.15, "{med}");
        assert!(ms > 100.0, "{ms}");
    }

    #[test]
    fn v_estimate() {
        assert_eq!(estimate_v_oamp(10.0, 2, 1.0, 4.0).unwrap(), 2.0);
        assert_eq!(estimate_v_oamp(1.0, 2, 1.0, 4.0).unwrap(), VARIANCE_FLOOR);
        assert!(matches!(
            estimate_v_oamp(1.0, 2, 1.0, 0.0),
            Err(Error::InvalidOperatorStats(_))
        ));
    }

    #[test]
    fn onsager_examples() {
        assert_eq!(onsager_coefficient(0.0, 3, 9), 0.0);
        assert_eq!(onsager_coefficient(1.0, 7, 7), 1.0);
        assert_eq!(onsager_coefficient(0.25, 2, 8), 1.0);
    }

    #[test]
    fn zero_measurements_are_a_fixed_point() {
        let op = SensingOperator::partial_dct(16, 32, 1).unwrap();
        let y = vec![0.0; 16];
        for spec in [
            DenoiserSpec::soft(1.0),
            DenoiserSpec::let_bank(vec![1.0, 2.0, 3.0]),
        ] {
            let tr = run_damp(&op, &y, &spec, &RecoveryConfig::damp(), 0, None).unwrap();
            assert!(tr.x_final.iter().all(|&v| v == 0.0));
            assert!(tr.per_iteration.iter().all(|r| r.residual_norm2 == 0.0));
            let tr = run_doamp(&op, &y, &spec, &RecoveryConfig::doamp(0.0), 0, None).unwrap();
            assert!(tr.x_final.iter().all(|&v| v == 0.0));
            assert!(!tr.diverged);
        }
    }

    #[test]
    fn doamp_requires_noise_level() {
        let op = SensingOperator::partial_dct(4, 8, 1).unwrap();
        let cfg = RecoveryConfig {
            sigma2_known: None,
            ..RecoveryConfig::default()
        };
        assert!(matches!(
            run_doamp(&op, &[1.0; 4], &DenoiserSpec::soft(1.0), &cfg, 0, None),
            Err(Error::MissingNoiseLevel)
        ));
        assert!(matches!(
            run_damp(
                &op,
                &[1.0; 3],
                &DenoiserSpec::soft(1.0),
                &RecoveryConfig::damp(),
                0,
                None
            ),
            Err(Error::InvalidDimensions(_))
        ));
    }
}
