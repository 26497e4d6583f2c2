//! Denoisers and the machinery that turns them into divergence-free,
//! SURE-tuned estimators.
//!
//! Divergences are *normalized* throughout: `div D(r) = (1/n) Σ ∂D_i/∂r_i`.
//! Under that convention the construction `D̂(r) − div·r` annihilates the
//! identity, the SURE penalty is `2τ²·div`, and the D-AMP Onsager multiplier
//! is `(n/m)·div`.

mod divergence;
mod kernels;
pub mod plugin;
mod sure;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use crate::operators::DctPlan;
use crate::rng::{derive, domain};
use crate::{Error, Result};

pub use divergence::{default_mc_step, mc_divergence};
pub use kernels::{
    analytic_divergence_soft, let_kernel_bank, let_kernel_divergences, let_kernel_slopes,
    soft_threshold,
};
pub use plugin::{plugin_denoise, PluginRunner};
pub use sure::{
    degenerate_threshold, df_direction, optimal_combination, optimal_scalar, sure_estimate,
    sure_let, sure_let_kernels, SureLet,
};

pub const DEFAULT_LET_KNOTS: [f64; 3] = [1.0, 2.0, 3.0];

#[derive(Debug, Clone, PartialEq)]
pub enum DenoiserKind {
    /// Soft threshold at `multiple·σ̂`.
    SoftThreshold { multiple: f64 },
    /// Bank of soft thresholds at `knots[k]·σ̂`.
    LetBank { knots: Vec<f64> },
    /// External executable, see [`plugin`].
    Plugin { command: String },
}

/// Orthonormal basis in which the denoiser operates. Divergence and SURE
/// are invariant under an orthogonal change of basis, so the
/// divergence-free construction carries over unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Basis {
    /// Sample domain.
    #[default]
    Identity,
    /// Orthonormal DCT-II of the whole (flattened) vector.
    Dct,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserSpec {
    pub kind: DenoiserKind,
    pub basis: Basis,
    /// Monte-Carlo step; `None` selects [`default_mc_step`].
    pub mc_step: Option<f64>,
    pub mc_samples: usize,
    pub plugin_timeout: Duration,
    /// `(width, height)` forwarded to plugins.
    pub image_dims: Option<(usize, usize)>,
}

impl DenoiserSpec {
    fn with_kind(kind: DenoiserKind) -> Self {
        Self {
            kind,
            basis: Basis::Identity,
            mc_step: None,
            mc_samples: 1,
            plugin_timeout: plugin::DEFAULT_TIMEOUT,
            image_dims: None,
        }
    }

    pub fn soft(multiple: f64) -> Self {
        Self::with_kind(DenoiserKind::SoftThreshold { multiple })
    }

    pub fn let_bank(knots: Vec<f64>) -> Self {
        Self::with_kind(DenoiserKind::LetBank { knots })
    }

    pub fn plugin(command: impl Into<String>) -> Self {
        Self::with_kind(DenoiserKind::Plugin {
            command: command.into(),
        })
    }

    pub fn with_basis(mut self, basis: Basis) -> Self {
        self.basis = basis;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            DenoiserKind::SoftThreshold { multiple } => {
                if !(*multiple > 0.0) || !multiple.is_finite() {
                    return Err(Error::InvalidSpec(format!(
                        "threshold multiple must be positive, got {multiple}"
                    )));
                }
            }
            DenoiserKind::LetBank { knots } => {
                if knots.is_empty() {
                    return Err(Error::InvalidSpec(
                        "LET bank needs at least one knot".into(),
                    ));
                }
                if !knots.iter().all(|k| *k > 0.0 && k.is_finite())
                    || knots.windows(2).any(|w| w[1] <= w[0])
                {
                    return Err(Error::InvalidSpec(format!(
                        "LET knots must be positive and strictly increasing, got {knots:?}"
                    )));
                }
            }
            DenoiserKind::Plugin { command } => {
                if command.trim().is_empty() {
                    return Err(Error::InvalidSpec("empty plugin command".into()));
                }
                if self.basis != Basis::Identity {
                    return Err(Error::InvalidSpec(
                        "plugins run in the sample domain only".into(),
                    ));
                }
            }
        }
        if let Some(step) = self.mc_step {
            if !(step > 0.0) {
                return Err(Error::InvalidStep(step));
            }
        }
        if self.mc_samples == 0 {
            return Err(Error::InvalidSpec("mc_samples must be at least 1".into()));
        }
        Ok(())
    }

    fn runner(&self, command: &str) -> PluginRunner {
        PluginRunner::new(command)
            .timeout(self.plugin_timeout)
            .image_dims(self.image_dims)
    }
}

/// Parses `soft[:mult]`, `let[:k1,k2,...]` or `plugin:CMD`.
impl FromStr for DenoiserSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let bad_number = |v: &str| Error::InvalidSpec(format!("not a number: `{v}`"));
        let spec = match (head, arg) {
            ("soft", None) => Self::soft(1.0),
            ("soft", Some(a)) => Self::soft(a.trim().parse().map_err(|_| bad_number(a))?),
            ("let", None) => Self::let_bank(DEFAULT_LET_KNOTS.to_vec()),
            ("let", Some(a)) => Self::let_bank(
                a.split(',')
                    .map(|k| k.trim().parse().map_err(|_| bad_number(k)))
                    .collect::<Result<_>>()?,
            ),
            ("plugin", Some(cmd)) => Self::plugin(cmd),
            _ => {
                return Err(Error::InvalidSpec(format!(
                    "unknown denoiser `{s}` (expected soft[:mult], let[:k1,k2,...] or plugin:CMD)"
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for DenoiserSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            DenoiserKind::SoftThreshold { multiple } => write!(f, "soft:{multiple}"),
            DenoiserKind::LetBank { knots } => {
                let ks: Vec<String> = knots.iter().map(|k| k.to_string()).collect();
                write!(f, "let:{}", ks.join(","))
            }
            DenoiserKind::Plugin { command } => write!(f, "plugin:{command}"),
        }
    }
}

/// A plain (not divergence-free) denoiser output with its divergence.
#[derive(Debug, Clone)]
pub struct BaseEstimate {
    pub output: Vec<f64>,
    pub divergence: f64,
}

/// The estimator used as `D_t` by D-AMP.
///
/// Soft threshold and plugins return their own output. The LET bank returns
/// the SURE-optimal combination of its kernels, see [`sure_let_kernels`].
pub fn base_denoise(
    spec: &DenoiserSpec,
    r: &[f64],
    sigma_hat: f64,
    seed: u64,
) -> Result<BaseEstimate> {
    check_sigma(sigma_hat)?;
    match spec.basis {
        Basis::Identity => base_denoise_samples(spec, r, sigma_hat, seed),
        Basis::Dct => {
            let plan = DctPlan::new(r.len());
            let mut coeffs = r.to_vec();
            plan.forward(&mut coeffs);
            let mut est = base_denoise_samples(spec, &coeffs, sigma_hat, seed)?;
            plan.inverse(&mut est.output);
            Ok(est)
        }
    }
}

fn base_denoise_samples(
    spec: &DenoiserSpec,
    r: &[f64],
    sigma_hat: f64,
    seed: u64,
) -> Result<BaseEstimate> {
    match &spec.kind {
        DenoiserKind::SoftThreshold { multiple } => {
            let lambda = multiple * sigma_hat;
            Ok(BaseEstimate {
                output: soft_threshold(r, lambda),
                divergence: analytic_divergence_soft(r, lambda),
            })
        }
        DenoiserKind::LetBank { knots } => {
            let bank = let_kernel_bank(r, sigma_hat, knots)?;
            let slopes = let_kernel_slopes(r, sigma_hat, knots);
            let combo = sure_let_kernels(r, &bank, &slopes, sigma_hat * sigma_hat);
            Ok(BaseEstimate {
                output: combo.output,
                divergence: combo.divergence,
            })
        }
        DenoiserKind::Plugin { command } => {
            let runner = spec.runner(command);
            let output = runner.run(r, sigma_hat)?;
            let divergence = plugin_divergence(spec, &runner, r, sigma_hat, seed)?;
            Ok(BaseEstimate { output, divergence })
        }
    }
}

fn plugin_divergence(
    spec: &DenoiserSpec,
    runner: &PluginRunner,
    r: &[f64],
    sigma_hat: f64,
    seed: u64,
) -> Result<f64> {
    let step = spec.mc_step.unwrap_or_else(|| default_mc_step(r));
    mc_divergence(
        |v| runner.run(v, sigma_hat),
        r,
        step,
        spec.mc_samples,
        derive(seed, domain::DENOISER),
    )
}

fn check_sigma(sigma_hat: f64) -> Result<()> {
    if !(sigma_hat > 0.0) || !sigma_hat.is_finite() {
        return Err(Error::InvalidNoiseLevel(sigma_hat));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct DfDenoiseResult {
    /// Divergence-free estimate used inside the D-OAMP loop.
    pub x_df: Vec<f64>,
    /// Unconstrained output estimate `D^out(r)`.
    pub x_out: Vec<f64>,
    /// Normalized divergence of the base denoiser at `r` (the combined
    /// estimator for the LET bank).
    pub divergence_base: f64,
    /// SURE-optimal weights of the divergence-free directions.
    pub coefficients: Vec<f64>,
    /// SURE of `x_df`.
    pub sure_value: f64,
}

/// Divergence-free denoising with SURE-optimal scaling.
///
/// Each elementary denoiser `D̂_k` contributes `G_k = D̂_k(r) − div_k·r`;
/// the estimate is `Σ C_k G_k` with `C` minimizing SURE.
pub fn df_denoise(
    spec: &DenoiserSpec,
    r: &[f64],
    sigma_hat: f64,
    seed: u64,
) -> Result<DfDenoiseResult> {
    check_sigma(sigma_hat)?;
    match spec.basis {
        Basis::Identity => df_denoise_samples(spec, r, sigma_hat, seed),
        Basis::Dct => {
            let plan = DctPlan::new(r.len());
            let mut coeffs = r.to_vec();
            plan.forward(&mut coeffs);
            let mut res = df_denoise_samples(spec, &coeffs, sigma_hat, seed)?;
            plan.inverse(&mut res.x_df);
            plan.inverse(&mut res.x_out);
            Ok(res)
        }
    }
}

fn df_denoise_samples(
    spec: &DenoiserSpec,
    r: &[f64],
    sigma_hat: f64,
    seed: u64,
) -> Result<DfDenoiseResult> {
    let tau2 = sigma_hat * sigma_hat;
    let (directions, x_out, divergence_base) = match &spec.kind {
        DenoiserKind::SoftThreshold { multiple } => {
            let lambda = multiple * sigma_hat;
            let out = soft_threshold(r, lambda);
            let div = analytic_divergence_soft(r, lambda);
            (vec![df_direction(&out, r, div)], out, div)
        }
        DenoiserKind::LetBank { knots } => {
            let bank = let_kernel_bank(r, sigma_hat, knots)?;
            let divs = let_kernel_divergences(r, sigma_hat, knots);
            let directions = bank
                .iter()
                .zip(&divs)
                .map(|(k, &d)| df_direction(k, r, d))
                .collect();
            let slopes = let_kernel_slopes(r, sigma_hat, knots);
            let combo = sure_let(r, &bank, &slopes, tau2);
            (directions, combo.output, combo.divergence)
        }
        DenoiserKind::Plugin { command } => {
            let runner = spec.runner(command);
            let out = runner.run(r, sigma_hat)?;
            let div = plugin_divergence(spec, &runner, r, sigma_hat, seed)?;
            (vec![df_direction(&out, r, div)], out, div)
        }
    };

    let coefficients = if directions.len() == 1 {
        vec![optimal_scalar(r, &directions[0])?]
    } else {
        optimal_combination(r, &directions)?
    };
    let mut x_df = vec![0.0; r.len()];
    for (g, c) in directions.iter().zip(&coefficients) {
        for (x, gi) in x_df.iter_mut().zip(g) {
            *x += c * gi;
        }
    }
    let sure_value = sure_estimate(&x_df, r, tau2, 0.0);
    Ok(DfDenoiseResult {
        x_df,
        x_out,
        divergence_base,
        coefficients,
        sure_value,
    })
}
