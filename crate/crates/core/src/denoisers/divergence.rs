use crate::rng::{gaussian_vec, rng_from};
use crate::{Error, Result};

/// Default Monte-Carlo step: `‖r‖∞ / 1000`, floored at `1e-6`.
pub fn default_mc_step(r: &[f64]) -> f64 {
    let inf = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    (inf / 1000.0).max(1e-6)
}

/// Monte-Carlo estimate of the normalized divergence of a black-box map:
///
/// `(1/S) Σ_s (1/n) e_sᵀ (f(r + δ e_s) − f(r)) / δ`, `e_s ~ N(0, I)`.
pub fn mc_divergence<F>(
    mut denoise: F,
    r: &[f64],
    step: f64,
    samples: usize,
    seed: u64,
) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidStep(step));
    }
    if samples == 0 {
        return Err(Error::InvalidSpec("mc_samples must be at least 1".into()));
    }
    let n = r.len();
    if n == 0 {
        return Ok(0.0);
    }
    let base = denoise(r)?;
    let mut rng = rng_from(seed);
    let mut total = 0.0;
    for _ in 0..samples {
        let e = gaussian_vec(&mut rng, n);
        let perturbed: Vec<f64> = r.iter().zip(&e).map(|(ri, ei)| ri + step * ei).collect();
        let out = denoise(&perturbed)?;
        if out.len() != n {
            return Err(Error::InvalidDimensions(format!(
                "denoiser returned {} values for {n} inputs",
                out.len()
            )));
        }
        total += e
            .iter()
            .zip(out.iter().zip(&base))
            .map(|(ei, (o, b))| ei * (o - b))
            .sum::<f64>()
            / step;
    }
    Ok(total / (samples as f64 * n as f64))
}
