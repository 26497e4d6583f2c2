use doamp_core::operators::SensingOperator;
use doamp_core::rng::{gaussian_vec, rng_from};
use proptest::prelude::*;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn build(gaussian: bool, m: usize, n: usize, seed: u64) -> SensingOperator {
    if gaussian {
        SensingOperator::gaussian(m, n, seed).unwrap()
    } else {
        SensingOperator::partial_dct(m, n, seed).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn adjoint_identity(gaussian in any::<bool>(), n in 2usize..200, frac in 0.05f64..1.0, seed in any::<u64>()) {
        let m = ((n as f64 * frac).round() as usize).clamp(1, n);
        let op = build(gaussian, m, n, seed);
        let x = gaussian_vec(&mut rng_from(seed ^ 1), n);
        let z = gaussian_vec(&mut rng_from(seed ^ 2), m);
        let lhs = dot(&op.forward(&x).unwrap(), &z);
        let rhs = dot(&x, &op.adjoint(&z).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn partial_dct_rows_are_scaled_orthonormal(n in 2usize..160, frac in 0.05f64..1.0, seed in any::<u64>()) {
        let m = ((n as f64 * frac).round() as usize).clamp(1, n);
        let op = SensingOperator::partial_dct(m, n, seed).unwrap();
        // AAᵀ = (N/M)·I, so ‖Aᵀz‖² = (N/M)‖z‖²
        let z = gaussian_vec(&mut rng_from(seed), m);
        let back = op.adjoint(&z).unwrap();
        let ratio = dot(&back, &back) / dot(&z, &z);
        prop_assert!((ratio - n as f64 / m as f64).abs() <= 1e-9 * ratio);
        prop_assert!((op.trace_gram() - n as f64).abs() <= 1e-9 * n as f64);
    }

    #[test]
    fn forward_is_linear(gaussian in any::<bool>(), n in 2usize..120, seed in any::<u64>(), a in -3.0f64..3.0) {
        let m = n / 2 + 1;
        let op = build(gaussian, m.min(n), n, seed);
        let x = gaussian_vec(&mut rng_from(seed ^ 3), n);
        let y = gaussian_vec(&mut rng_from(seed ^ 4), n);
        let combo: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + v).collect();
        let lhs = op.forward(&combo).unwrap();
        let fx = op.forward(&x).unwrap();
        let fy = op.forward(&y).unwrap();
        for ((l, u), v) in lhs.iter().zip(&fx).zip(&fy) {
            prop_assert!((l - (a * u + v)).abs() <= 1e-9 * (1.0 + l.abs()));
        }
    }
}
