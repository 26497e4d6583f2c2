use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::rng::rng_from;
use crate::{Error, Result};

/// `‖x̂ − x₀‖² / ‖x₀‖²`.
pub fn nmse(x_hat: &[f64], x0: &[f64]) -> Result<f64> {
    let e0: f64 = x0.iter().map(|v| v * v).sum();
    if e0 == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(x_hat
        .iter()
        .zip(x0)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / e0)
}

/// `10·log10(maxval² / MSE)` in dB; `+∞` for a perfect reconstruction.
pub fn psnr(x_hat: &[f64], x0: &[f64], maxval: f64) -> f64 {
    let mse = x_hat
        .iter()
        .zip(x0)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / x0.len() as f64;
    if mse == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (maxval * maxval / mse).log10()
}

pub fn to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// Sparse vector whose entries are nonzero with probability `sparsity`,
/// nonzeros i.i.d. standard Gaussian.
pub fn gen_bernoulli_gaussian(n: usize, sparsity: f64, seed: u64) -> Result<Vec<f64>> {
    if !(sparsity > 0.0 && sparsity < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "sparsity must lie in (0, 1), got {sparsity}"
        )));
    }
    let mut rng = rng_from(seed);
    Ok((0..n)
        .map(|_| {
            let active = rng.random_bool(sparsity);
            let g: f64 = StandardNormal.sample(&mut rng);
            if active {
                g
            } else {
                0.0
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nmse_examples() {
        let x0 = [1.0, -2.0, 3.0];
        assert_eq!(nmse(&x0, &x0).unwrap(), 0.0);
        assert_eq!(nmse(&[0.0; 3], &x0).unwrap(), 1.0);
        let twice: Vec<f64> = x0.iter().map(|v| 2.0 * v).collect();
        assert_eq!(nmse(&twice, &x0).unwrap(), 1.0);
        assert!(matches!(nmse(&x0, &[0.0; 3]), Err(Error::ZeroReference)));
    }

    #[test]
    fn psnr_examples() {
        let x0 = [10.0, 20.0];
        assert!(psnr(&[265.0, 275.0], &x0, 255.0).abs() < 1e-12);
        assert!((psnr(&[11.0, 21.0], &x0, 255.0) - 48.1308).abs() < 1e-4);
        let half = psnr(&[10.0 + 0.5f64.sqrt(), 20.0 + 0.5f64.sqrt()], &x0, 255.0);
        assert!((half - 48.1308 - 3.0103).abs() < 1e-4);
        assert_eq!(psnr(&x0, &x0, 255.0), f64::INFINITY);
    }

    #[test]
    fn bernoulli_gaussian_statistics() {
        let x = gen_bernoulli_gaussian(100, 1e-9, 1).unwrap();
        assert!(x.iter().filter(|v| **v != 0.0).count() <= 1);
        let n = 100_000;
        let x = gen_bernoulli_gaussian(n, 0.1, 2).unwrap();
        let nnz = x.iter().filter(|v| **v != 0.0).count();
        assert!((9000..=11000).contains(&nnz));
        let energy = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
        assert!((energy - 0.1).abs() <= 0.01);
        assert_eq!(x, gen_bernoulli_gaussian(n, 0.1, 2).unwrap());
        assert!(gen_bernoulli_gaussian(10, 1.0, 0).is_err());
    }
}
