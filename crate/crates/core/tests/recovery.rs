use doamp_core::denoisers::{df_denoise, DenoiserSpec};
use doamp_core::harness::{gen_bernoulli_gaussian, nmse, to_db};
use doamp_core::operators::SensingOperator;
use doamp_core::recovery::{
    estimate_v_oamp, run, run_damp, run_doamp, RecoveryConfig, RecoveryTrace,
};
use doamp_core::rng::{gaussian_vec, rng_from};
use doamp_core::state_evolution::{run_se, MseMapConfig, PhiKind};

fn sparse_instance(
    m: usize,
    n: usize,
    k: usize,
    seed: u64,
) -> (SensingOperator, Vec<f64>, Vec<f64>) {
    let op = SensingOperator::gaussian(m, n, seed).unwrap();
    let mut rng = rng_from(seed + 1);
    let g = gaussian_vec(&mut rng, n);
    let mut x0 = vec![0.0; n];
    // fixed support spread over the signal
    for j in 0..k {
        let i = (j * n) / k + (seed as usize % (n / k));
        x0[i] = g[i].signum() * (1.0 + g[i].abs());
    }
    let y = op.forward(&x0).unwrap();
    (op, x0, y)
}

/// Iterative soft-thresholding with continuation, run to convergence.
fn ista(op: &SensingOperator, y: &[f64], iters: usize) -> Vec<f64> {
    let a = op.materialize();
    let lipschitz = (a.transpose() * &a).symmetric_eigenvalues().max();
    let step = 1.0 / lipschitz;
    let mut x = vec![0.0; op.n()];
    let mut lambda = 0.1;
    for it in 0..iters {
        if it % 500 == 499 {
            lambda *= 0.3;
        }
        let ax = op.forward(&x).unwrap();
        let resid: Vec<f64> = y.iter().zip(&ax).map(|(a, b)| a - b).collect();
        let g = op.adjoint(&resid).unwrap();
        for (xi, gi) in x.iter_mut().zip(&g) {
            let v = *xi + step * gi;
            let t = step * lambda;
            *xi = v.signum() * (v.abs() - t).max(0.0);
        }
    }
    x
}

fn damp_soft(op: &SensingOperator, y: &[f64], x0: &[f64], onsager: bool) -> RecoveryTrace {
    let cfg = RecoveryConfig {
        max_iters: 30,
        stop_rel_tol: 0.0,
        sigma2_known: Some(0.0),
        onsager,
        ..RecoveryConfig::damp()
    };
    run_damp(op, y, &DenoiserSpec::soft(1.0), &cfg, 3, Some(x0)).unwrap()
}

#[test]
fn damp_recovers_sparse_gaussian_instance() {
    let (op, x0, y) = sparse_instance(128, 256, 13, 5);
    let oracle = ista(&op, &y, 4000);
    let oracle_db = to_db(nmse(&oracle, &x0).unwrap());
    assert!(
        oracle_db <= -30.0,
        "instance not recoverable by l1: {oracle_db}"
    );

    let trace = damp_soft(&op, &y, &x0, true);
    let got = to_db(nmse(&trace.x_final, &x0).unwrap());
    assert!(got <= -30.0, "D-AMP NMSE {got} dB");
    assert!(!trace.diverged);
}

#[test]
fn removing_onsager_term_costs_more_than_5_db() {
    let (op, x0, y) = sparse_instance(128, 256, 13, 5);
    let with = to_db(nmse(&damp_soft(&op, &y, &x0, true).x_final, &x0).unwrap());
    let without = to_db(nmse(&damp_soft(&op, &y, &x0, false).x_final, &x0).unwrap());
    assert!(without - with > 5.0, "with {with} dB, without {without} dB");
}

fn assert_traces_close(a: &RecoveryTrace, b: &RecoveryTrace, tol: f64) {
    assert_eq!(a.per_iteration.len(), b.per_iteration.len());
    let rel = |x: f64, y: f64| (x - y).abs() / x.abs().max(y.abs()).max(1e-300);
    for (ra, rb) in a.per_iteration.iter().zip(&b.per_iteration) {
        assert!(rel(ra.sigma_hat2, rb.sigma_hat2) <= tol, "{ra:?} vs {rb:?}");
        assert!(rel(ra.v_hat2, rb.v_hat2) <= tol, "{ra:?} vs {rb:?}");
        assert!(
            rel(ra.residual_norm2, rb.residual_norm2) <= tol,
            "{ra:?} vs {rb:?}"
        );
        assert!(
            rel(ra.nmse.unwrap(), rb.nmse.unwrap()) <= tol,
            "{ra:?} vs {rb:?}"
        );
    }
    for (xa, xb) in a.x_final.iter().zip(&b.x_final) {
        assert!((xa - xb).abs() <= tol * (1.0 + xa.abs()));
    }
}

#[test]
fn fast_and_dense_operators_give_the_same_traces() {
    let n = 64;
    let x0 = gen_bernoulli_gaussian(n, 0.15, 7).unwrap();
    let fast = SensingOperator::partial_dct(32, n, 8).unwrap();
    let dense = fast.to_dense();
    let sigma2: f64 = 1e-4;
    let noise = gaussian_vec(&mut rng_from(9), 32);
    let y: Vec<f64> = fast
        .forward(&x0)
        .unwrap()
        .iter()
        .zip(&noise)
        .map(|(a, w)| a + sigma2.sqrt() * w)
        .collect();

    for spec in [
        DenoiserSpec::soft(1.0),
        DenoiserSpec::let_bank(vec![1.0, 2.0, 3.0]),
    ] {
        let damp = RecoveryConfig {
            max_iters: 10,
            stop_rel_tol: 0.0,
            sigma2_known: Some(sigma2),
            ..RecoveryConfig::damp()
        };
        let a = run(&fast, &y, &spec, &damp, 1, Some(&x0)).unwrap();
        let b = run(&dense, &y, &spec, &damp, 1, Some(&x0)).unwrap();
        assert_traces_close(&a, &b, 1e-8);

        // same state-evolution map on both sides
        let doamp = RecoveryConfig {
            max_iters: 10,
            stop_rel_tol: 0.0,
            phi: Some(PhiKind::PartialOrthogonal),
            ..RecoveryConfig::doamp(sigma2)
        };
        let a = run(&fast, &y, &spec, &doamp, 1, Some(&x0)).unwrap();
        let b = run(&dense, &y, &spec, &doamp, 1, Some(&x0)).unwrap();
        assert_traces_close(&a, &b, 1e-8);
    }
}

#[test]
fn runs_are_deterministic() {
    let (op, x0, y) = sparse_instance(64, 128, 8, 2);
    let spec = DenoiserSpec::let_bank(vec![1.0, 2.0, 3.0]);
    for cfg in [RecoveryConfig::damp(), RecoveryConfig::doamp(0.0)] {
        let a = run(&op, &y, &spec, &cfg, 4, Some(&x0)).unwrap();
        let b = run(&op, &y, &spec, &cfg, 4, Some(&x0)).unwrap();
        assert_eq!(a.per_iteration, b.per_iteration);
        assert_eq!(a.x_final, b.x_final);
    }
}

#[test]
fn zero_measurements_give_zero_output_for_both_algorithms() {
    let op = SensingOperator::partial_dct(32, 64, 1).unwrap();
    let y = vec![0.0; 32];
    let spec = DenoiserSpec::soft(1.0);
    let a = run_damp(&op, &y, &spec, &RecoveryConfig::damp(), 0, None).unwrap();
    assert!(a.x_final.iter().all(|&v| v == 0.0));
    assert!(a.per_iteration.iter().all(|r| r.residual_norm2 == 0.0));
    let b = run_doamp(&op, &y, &spec, &RecoveryConfig::doamp(0.0), 0, None).unwrap();
    assert!(b.x_final.iter().all(|&v| v == 0.0));
}

#[test]
fn doamp_variance_estimate_tracks_state_evolution() {
    let (n, m, seeds) = (8192, 4096, 10u64);
    let iters = 11;
    let x0 = gen_bernoulli_gaussian(n, 0.1, 100).unwrap();
    let energy = x0.iter().map(|v| v * v).sum::<f64>();
    let sigma2 = energy / (m as f64 * 1e5);
    let spec = DenoiserSpec::let_bank(vec![1.0, 2.0, 3.0]);

    let mut mean_v = vec![0.0; iters];
    for s in 0..seeds {
        let op = SensingOperator::partial_dct(m, n, 200 + s).unwrap();
        let w = gaussian_vec(&mut rng_from(300 + s), m);
        let y: Vec<f64> = op
            .forward(&x0)
            .unwrap()
            .iter()
            .zip(&w)
            .map(|(a, e)| a + sigma2.sqrt() * e)
            .collect();
        let cfg = RecoveryConfig {
            max_iters: iters,
            stop_rel_tol: 0.0,
            ..RecoveryConfig::doamp(sigma2)
        };
        let trace = run_doamp(&op, &y, &spec, &cfg, 400 + s, Some(&x0)).unwrap();
        assert_eq!(trace.per_iteration.len(), iters);
        for (acc, rec) in mean_v.iter_mut().zip(&trace.per_iteration) {
            *acc += rec.v_hat2 / seeds as f64;
        }
    }

    let se = run_se(
        &x0,
        |r: &[f64], tau: f64| Ok(df_denoise(&spec, r, tau.max(1e-6), 0)?.x_df),
        PhiKind::PartialOrthogonal,
        m,
        sigma2,
        iters,
        MseMapConfig {
            samples: 8,
            seed: 1,
        },
        None::<fn(&[f64], f64) -> doamp_core::Result<Vec<f64>>>,
    )
    .unwrap();
    for t in 0..iters {
        let gap = (to_db(mean_v[t]) - to_db(se.per_iteration[t].v2)).abs();
        assert!(
            gap <= 1.0,
            "t = {t}: simulated {} vs SE {}",
            mean_v[t],
            se.per_iteration[t].v2
        );
    }
}

#[test]
fn noiseless_v_estimate_matches_signal_energy() {
    let n = 8192;
    let x0 = gen_bernoulli_gaussian(n, 0.1, 21).unwrap();
    let op = SensingOperator::partial_dct(n / 2, n, 22).unwrap();
    let z = op.forward(&x0).unwrap();
    let z_norm2: f64 = z.iter().map(|v| v * v).sum();
    let v = estimate_v_oamp(z_norm2, op.m(), 0.0, op.trace_gram()).unwrap();
    let truth = x0.iter().map(|v| v * v).sum::<f64>() / n as f64;
    assert!((v - truth).abs() <= 0.1 * truth, "{v} vs {truth}");
}
