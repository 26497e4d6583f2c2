//! Experiment orchestration: inputs, measurement synthesis, recovery and
//! state-evolution runs, CSV output.
//!
//! Seeds are split by domain: the ground-truth signal comes from
//! `derive(seed, SIGNAL)`; each trial owns a seed from which the operator,
//! the noise and the denoiser streams are derived independently.

mod metrics;
mod pgm;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::denoisers::{base_denoise, df_denoise, DenoiserSpec};
use crate::operators::SensingOperator;
use crate::recovery::{
    self, Algorithm, RecoveryConfig, RecoveryTrace, SigmaEstimator, VARIANCE_FLOOR,
};
use crate::rng::{derive, domain, gaussian_vec, rng_from};
use crate::state_evolution::{run_se, MseMapConfig, PhiKind, SeTrace};
use crate::{Error, Result};

pub use metrics::{gen_bernoulli_gaussian, nmse, psnr, to_db};
pub use pgm::{encode_pgm, load_pgm, parse_pgm, save_pgm, ImageBuffer, MAXVAL};

pub const TRACE_HEADER: &str = "t,sigma_hat2,v_hat2,residual_norm2,nmse";
pub const SE_HEADER: &str = "t,v2,tau2,predicted_output_mse";
pub const COMPARE_HEADER: &str = "t,sim_nmse,se_nmse";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Gaussian,
    PartialDct,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SignalSource {
    /// Grayscale image, vectorized row-major, pixel scale `[0, 255]`.
    Pgm(PathBuf),
    /// Raw little-endian `f64` vector as written by [`write_raw_vector`].
    Raw(PathBuf),
    Synthetic {
        n: usize,
        sparsity: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseLevel {
    Variance(f64),
    /// Measurement SNR in dB; `σ² = ‖x₀‖² / (M·10^(snr/10))`.
    SnrDb(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub matrix: MatrixKind,
    /// Measurement rate `M/N` in `(0, 1]`; `M = round(rate·N)`.
    pub rate: f64,
    pub algorithm: Algorithm,
    pub denoiser: DenoiserSpec,
    pub iters: usize,
    pub noise: NoiseLevel,
    pub seed: u64,
    pub input: SignalSource,
    pub sigma_estimator: SigmaEstimator,
    pub stop_rel_tol: f64,
    pub trace_path: Option<PathBuf>,
    pub image_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(input: SignalSource) -> Self {
        Self {
            matrix: MatrixKind::PartialDct,
            rate: 0.5,
            algorithm: Algorithm::Doamp,
            denoiser: DenoiserSpec::let_bank(crate::denoisers::DEFAULT_LET_KNOTS.to_vec()),
            iters: 30,
            noise: NoiseLevel::Variance(0.0),
            seed: 0,
            input,
            sigma_estimator: SigmaEstimator::Median,
            stop_rel_tol: RecoveryConfig::default().stop_rel_tol,
            trace_path: None,
            image_path: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "rate must lie in (0, 1], got {}",
                self.rate
            )));
        }
        if self.iters == 0 {
            return Err(Error::InvalidConfig("iters must be at least 1".into()));
        }
        match self.noise {
            NoiseLevel::Variance(v) if !(v >= 0.0) => {
                return Err(Error::InvalidConfig(format!(
                    "sigma2 must be >= 0, got {v}"
                )))
            }
            NoiseLevel::SnrDb(s) if !s.is_finite() => {
                return Err(Error::InvalidConfig(format!("invalid SNR {s}")))
            }
            _ => {}
        }
        self.denoiser.validate()
    }

    pub fn measurements_for(&self, n: usize) -> usize {
        ((self.rate * n as f64).round() as usize).clamp(1, n)
    }

    fn recovery_config(&self, sigma2: f64) -> RecoveryConfig {
        RecoveryConfig {
            algorithm: self.algorithm,
            max_iters: self.iters,
            stop_rel_tol: self.stop_rel_tol,
            sigma_estimator: self.sigma_estimator,
            sigma2_known: Some(sigma2),
            ..RecoveryConfig::default()
        }
    }

    /// `Φ` used by state evolution for this configuration.
    pub fn phi_kind(&self) -> PhiKind {
        match (self.algorithm, self.matrix) {
            (Algorithm::Damp, _) => PhiKind::Damp,
            (Algorithm::Doamp, MatrixKind::Gaussian) => PhiKind::GaussianLmmse,
            (Algorithm::Doamp, MatrixKind::PartialDct) => PhiKind::PartialOrthogonal,
        }
    }
}

/// Ground truth plus optional image geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub x0: Vec<f64>,
    pub dims: Option<(usize, usize)>,
}

pub fn load_ground_truth(cfg: &ExperimentConfig) -> Result<GroundTruth> {
    match &cfg.input {
        SignalSource::Pgm(path) => {
            let img = load_pgm(path)?;
            Ok(GroundTruth {
                dims: Some((img.width, img.height)),
                x0: img.pixels,
            })
        }
        SignalSource::Raw(path) => Ok(GroundTruth {
            x0: read_raw_vector(path)?,
            dims: None,
        }),
        SignalSource::Synthetic { n, sparsity } => Ok(GroundTruth {
            x0: gen_bernoulli_gaussian(*n, *sparsity, derive(cfg.seed, domain::SIGNAL))?,
            dims: None,
        }),
    }
}

pub fn make_operator(kind: MatrixKind, m: usize, n: usize, seed: u64) -> Result<SensingOperator> {
    match kind {
        MatrixKind::Gaussian => SensingOperator::gaussian(m, n, seed),
        MatrixKind::PartialDct => SensingOperator::partial_dct(m, n, seed),
    }
}

/// Resolves the noise variance against the ground truth.
pub fn resolve_sigma2(noise: NoiseLevel, x0: &[f64], m: usize) -> f64 {
    match noise {
        NoiseLevel::Variance(v) => v,
        NoiseLevel::SnrDb(db) => {
            let energy: f64 = x0.iter().map(|v| v * v).sum();
            energy / (m as f64 * 10f64.powf(db / 10.0))
        }
    }
}

/// `y = A x₀ + w`, `w ~ N(0, σ²I)` drawn from `noise_seed`. Returns `(y, w)`.
pub fn synthesize_measurements(
    op: &SensingOperator,
    x0: &[f64],
    sigma2: f64,
    noise_seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let sigma = sigma2.max(0.0).sqrt();
    let w: Vec<f64> = gaussian_vec(&mut rng_from(noise_seed), op.m())
        .into_iter()
        .map(|e| sigma * e)
        .collect();
    let y = op.forward(x0)?.iter().zip(&w).map(|(a, b)| a + b).collect();
    Ok((y, w))
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub trace: RecoveryTrace,
    pub truth: GroundTruth,
    pub sigma2: f64,
    pub m: usize,
    pub final_nmse: Option<f64>,
    pub final_psnr: Option<f64>,
}

fn run_trial(
    cfg: &ExperimentConfig,
    truth: &GroundTruth,
    sigma2: f64,
    trial_seed: u64,
) -> Result<RecoveryTrace> {
    let n = truth.x0.len();
    let m = cfg.measurements_for(n);
    let op = make_operator(cfg.matrix, m, n, derive(trial_seed, domain::OPERATOR))?;
    let (y, _) =
        synthesize_measurements(&op, &truth.x0, sigma2, derive(trial_seed, domain::NOISE))?;
    let mut spec = cfg.denoiser.clone();
    spec.image_dims = spec.image_dims.or(truth.dims);
    recovery::run(
        &op,
        &y,
        &spec,
        &cfg.recovery_config(sigma2),
        derive(trial_seed, domain::DENOISER),
        Some(&truth.x0),
    )
}

/// Runs one seeded recovery, writing the trace CSV and reconstructed image
/// when paths are configured.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let truth = load_ground_truth(cfg)?;
    let n = truth.x0.len();
    if n == 0 {
        return Err(Error::InvalidConfig("empty input signal".into()));
    }
    let m = cfg.measurements_for(n);
    let sigma2 = resolve_sigma2(cfg.noise, &truth.x0, m);
    let trace = run_trial(cfg, &truth, sigma2, cfg.seed)?;

    if let Some(path) = &cfg.trace_path {
        write_output(path, &trace_csv(&trace))?;
    }
    if let Some(path) = &cfg.image_path {
        let (w, h) = truth
            .dims
            .ok_or_else(|| Error::InvalidConfig("an output image needs an image input".into()))?;
        save_pgm(&ImageBuffer::new(w, h, trace.x_final.clone())?, path)?;
    }
    let final_nmse = nmse(&trace.x_final, &truth.x0).ok();
    let final_psnr = truth.dims.map(|_| psnr(&trace.x_final, &truth.x0, MAXVAL));
    Ok(ExperimentOutcome {
        trace,
        truth,
        sigma2,
        m,
        final_nmse,
        final_psnr,
    })
}

/// State evolution for the configured algorithm, `cfg.iters` steps.
pub fn run_se_experiment(cfg: &ExperimentConfig, samples: usize) -> Result<(SeTrace, GroundTruth)> {
    cfg.validate()?;
    let truth = load_ground_truth(cfg)?;
    let n = truth.x0.len();
    let m = cfg.measurements_for(n);
    let sigma2 = resolve_sigma2(cfg.noise, &truth.x0, m);
    let mut spec = cfg.denoiser.clone();
    spec.image_dims = spec.image_dims.or(truth.dims);
    let seed = derive(cfg.seed, domain::DENOISER);
    let mse_cfg = MseMapConfig { samples, seed };
    let floor = VARIANCE_FLOOR.sqrt();

    let se = match cfg.algorithm {
        Algorithm::Damp => run_se(
            &truth.x0,
            |r: &[f64], tau: f64| Ok(base_denoise(&spec, r, tau.max(floor), seed)?.output),
            PhiKind::Damp,
            m,
            sigma2,
            cfg.iters,
            mse_cfg,
            None::<fn(&[f64], f64) -> Result<Vec<f64>>>,
        )?,
        Algorithm::Doamp => run_se(
            &truth.x0,
            |r: &[f64], tau: f64| Ok(df_denoise(&spec, r, tau.max(floor), seed)?.x_df),
            cfg.phi_kind(),
            m,
            sigma2,
            cfg.iters,
            mse_cfg,
            Some(|r: &[f64], tau: f64| Ok(df_denoise(&spec, r, tau.max(floor), seed)?.x_out)),
        )?,
    };
    if let Some(path) = &cfg.trace_path {
        write_output(path, &se_csv(&se))?;
    }
    Ok((se, truth))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub t: usize,
    /// Mean over trials of the NMSE of `x̂_{t+1}`.
    pub sim_nmse: f64,
    /// `v_{t+1}² · n / ‖x₀‖²`.
    pub se_nmse: f64,
    pub trial_nmse: Vec<f64>,
}

impl CompareRow {
    pub fn gap_db(&self) -> f64 {
        (to_db(self.sim_nmse) - to_db(self.se_nmse)).abs()
    }
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub rows: Vec<CompareRow>,
    pub se: SeTrace,
    pub any_diverged: bool,
}

/// Seeded recoveries against one state-evolution prediction.
///
/// The ground truth is shared; every trial draws its own operator and noise.
/// Early stopping is disabled so all trials report `cfg.iters` rows.
pub fn compare_se(cfg: &ExperimentConfig, trials: usize, samples: usize) -> Result<CompareOutcome> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    let se_cfg = ExperimentConfig {
        trace_path: None,
        image_path: None,
        ..cfg.clone()
    };
    let (se, truth) = run_se_experiment(&se_cfg, samples)?;
    let n = truth.x0.len();
    let m = cfg.measurements_for(n);
    let sigma2 = resolve_sigma2(cfg.noise, &truth.x0, m);
    let energy = truth.x0.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if energy == 0.0 {
        return Err(Error::ZeroReference);
    }
    let run_cfg = ExperimentConfig {
        stop_rel_tol: 0.0,
        ..se_cfg
    };

    let traces: Vec<RecoveryTrace> = (0..trials)
        .map(|k| run_trial(&run_cfg, &truth, sigma2, trial_seed(cfg.seed, k)))
        .collect::<Result<_>>()?;
    let any_diverged = traces.iter().any(|t| t.diverged);
    let rows_available = traces
        .iter()
        .map(|t| t.per_iteration.len())
        .min()
        .unwrap_or(0)
        .min(se.per_iteration.len().saturating_sub(1));

    let rows = (0..rows_available)
        .map(|t| {
            let trial_nmse: Vec<f64> = traces
                .iter()
                .map(|tr| tr.per_iteration[t].nmse.unwrap_or(f64::NAN))
                .collect();
            CompareRow {
                t,
                sim_nmse: trial_nmse.iter().sum::<f64>() / trials as f64,
                se_nmse: se.per_iteration[t + 1].v2 / energy,
                trial_nmse,
            }
        })
        .collect::<Vec<_>>();

    if let Some(path) = &cfg.trace_path {
        write_output(path, &compare_csv(&rows))?;
    }
    Ok(CompareOutcome {
        rows,
        se,
        any_diverged,
    })
}

pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    derive(derive(seed, domain::TRIAL), trial as u64)
}

fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

pub fn trace_csv(trace: &RecoveryTrace) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in &trace.per_iteration {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.t,
            fmt_f64(r.sigma_hat2),
            fmt_f64(r.v_hat2),
            fmt_f64(r.residual_norm2),
            r.nmse.map(fmt_f64).unwrap_or_default()
        );
    }
    out
}

pub fn se_csv(se: &SeTrace) -> String {
    let mut out = String::from(SE_HEADER);
    out.push('\n');
    for r in &se.per_iteration {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.t,
            fmt_f64(r.v2),
            fmt_f64(r.tau2),
            r.predicted_output_mse.map(fmt_f64).unwrap_or_default()
        );
    }
    out
}

pub fn compare_csv(rows: &[CompareRow]) -> String {
    let mut out = String::from(COMPARE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{}",
            r.t,
            fmt_f64(r.sim_nmse),
            fmt_f64(r.se_nmse)
        );
    }
    out
}

fn write_output(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents)?;
    Ok(())
}

pub fn write_raw_vector(path: impl AsRef<Path>, values: &[f64]) -> Result<()> {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_raw_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::InvalidConfig(format!(
            "raw vector file has {} bytes, not a multiple of 8",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_rounding() {
        let mut cfg = ExperimentConfig::new(SignalSource::Synthetic {
            n: 10,
            sparsity: 0.1,
        });
        cfg.rate = 0.3;
        assert_eq!(cfg.measurements_for(16384), 4915);
        cfg.rate = 1.0;
        assert_eq!(cfg.measurements_for(7), 7);
        cfg.rate = 1e-6;
        assert_eq!(cfg.measurements_for(7), 1);
    }

    #[test]
    fn snr_resolution() {
        let x0 = vec![1.0; 100];
        assert!(
            (resolve_sigma2(NoiseLevel::SnrDb(20.0), &x0, 50) - 100.0 / (50.0 * 100.0)).abs()
                < 1e-15
        );
        assert_eq!(resolve_sigma2(NoiseLevel::Variance(0.3), &x0, 50), 0.3);
    }

    #[test]
    fn measurement_noise_level() {
        let op = SensingOperator::partial_dct(20_000, 40_000, 1).unwrap();
        let x0 = vec![0.0; 40_000];
        let (y, w) = synthesize_measurements(&op, &x0, 0.25, 9).unwrap();
        let emp = w.iter().map(|v| v * v).sum::<f64>() / 20_000.0;
        assert!((emp / 0.25 - 1.0).abs() <= 0.05);
        assert_eq!(y, w);
    }

    #[test]
    fn csv_schema() {
        let trace = RecoveryTrace {
            per_iteration: vec![crate::recovery::IterationRecord {
                t: 0,
                sigma_hat2: 0.5,
                v_hat2: 1e-12,
                residual_norm2: 3.0,
                nmse: None,
            }],
            x_final: vec![],
            converged_at: None,
            diverged: false,
        };
        assert_eq!(
            trace_csv(&trace),
            "t,sigma_hat2,v_hat2,residual_norm2,nmse\n0,5e-1,1e-12,3e0,\n"
        );
    }
}
