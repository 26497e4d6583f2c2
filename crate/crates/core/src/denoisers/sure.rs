//! Divergence-free construction and SURE-based coefficient selection.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Threshold below which a direction (or family of directions) is treated
/// as vanishing.
pub fn degenerate_threshold(n: usize) -> f64 {
    1e-12 * n as f64
}

/// `G = D̂(r) − div·r`, the divergence-free direction of a base denoiser.
pub fn df_direction(base_out: &[f64], r: &[f64], div_norm: f64) -> Vec<f64> {
    base_out
        .iter()
        .zip(r)
        .map(|(d, ri)| d - div_norm * ri)
        .collect()
}

/// Stein's unbiased risk estimate with normalized divergence:
/// `(1/n)‖d − r‖² + 2·tau2·div − tau2`.
pub fn sure_estimate(d_out: &[f64], r: &[f64], tau2: f64, div_norm: f64) -> f64 {
    let n = r.len() as f64;
    let fit: f64 = d_out.iter().zip(r).map(|(d, ri)| (d - ri).powi(2)).sum();
    fit / n + 2.0 * tau2 * div_norm - tau2
}

/// SURE-minimizing scale for a divergence-free direction: `rᵀg / ‖g‖²`.
pub fn optimal_scalar(r: &[f64], g: &[f64]) -> Result<f64> {
    let gg = dot(g, g);
    if !(gg > degenerate_threshold(r.len())) {
        return Err(Error::DegenerateDirection(gg));
    }
    Ok(dot(r, g) / gg)
}

/// Jointly SURE-optimal weights `C = (M + λI)⁻¹ b` for divergence-free
/// directions, `M_ij = g_iᵀg_j`, `b_k = g_kᵀr`, `λ = 1e-9·trace(M)/K`.
pub fn optimal_combination(r: &[f64], g_list: &[Vec<f64>]) -> Result<Vec<f64>> {
    if g_list.is_empty() {
        return Err(Error::InvalidSpec("need at least one direction".into()));
    }
    if let [g] = g_list {
        // a single direction cannot be collinear; no ridge needed
        return Ok(vec![optimal_scalar(r, g)?]);
    }
    let k = g_list.len();
    let gram = DMatrix::from_fn(k, k, |i, j| dot(&g_list[i], &g_list[j]));
    let b = DVector::from_iterator(k, g_list.iter().map(|g| dot(g, r)));
    let tr = gram.trace();
    if !(tr > degenerate_threshold(r.len())) {
        return Err(Error::DegenerateDirection(tr));
    }
    Ok(ridge_solve(gram, b).as_slice().to_vec())
}

fn ridge_solve(gram: DMatrix<f64>, b: DVector<f64>) -> DVector<f64> {
    let k = b.len();
    ridge_solve_many(gram, DMatrix::from_column_slice(k, 1, b.as_slice()))
        .column(0)
        .into_owned()
}

fn ridge_solve_many(mut gram: DMatrix<f64>, rhs: DMatrix<f64>) -> DMatrix<f64> {
    let k = gram.nrows();
    let ridge = 1e-9 * gram.trace() / k as f64;
    for i in 0..k {
        gram[(i, i)] += ridge;
    }
    match gram.clone().cholesky() {
        Some(chol) => chol.solve(&rhs),
        None => {
            let cols = rhs.ncols();
            gram.lu()
                .solve(&rhs)
                .unwrap_or_else(|| DMatrix::zeros(k, cols))
        }
    }
}

/// Output of [`sure_let`].
#[derive(Debug, Clone)]
pub struct SureLet {
    pub output: Vec<f64>,
    /// Exact normalized divergence of the fitted map, including the
    /// dependence of the coefficients on `r`.
    pub divergence: f64,
    /// One weight per family member, in input order.
    pub coefficients: Vec<f64>,
}

/// SURE-optimal (not divergence-free) combination of `{r, kernels}`.
///
/// `kernel_slopes[k][i]` is `∂kernel_k(r)_i / ∂r_i`. Minimizes
/// `(1/n)‖Σ a_j f_j − r‖² + 2τ² Σ a_j div_j` where `f_0 = r` with slope 1,
/// by solving `(FᵀF + λI) a = Fᵀr − nτ²·div`. A vanishing family (all
/// inputs zero) yields the zero estimate.
pub fn sure_let(r: &[f64], kernels: &[Vec<f64>], kernel_slopes: &[Vec<f64>], tau2: f64) -> SureLet {
    let ones = vec![1.0; r.len()];
    let mut family: Vec<&[f64]> = vec![r];
    family.extend(kernels.iter().map(|k| k.as_slice()));
    let mut slopes: Vec<&[f64]> = vec![&ones];
    slopes.extend(kernel_slopes.iter().map(|s| s.as_slice()));
    combine(r, &family, &slopes, tau2)
}

/// Same as [`sure_let`] but over the kernels alone, without the identity
/// term.
pub fn sure_let_kernels(
    r: &[f64],
    kernels: &[Vec<f64>],
    kernel_slopes: &[Vec<f64>],
    tau2: f64,
) -> SureLet {
    let family: Vec<&[f64]> = kernels.iter().map(|k| k.as_slice()).collect();
    let slopes: Vec<&[f64]> = kernel_slopes.iter().map(|s| s.as_slice()).collect();
    combine(r, &family, &slopes, tau2)
}

fn combine(r: &[f64], family: &[&[f64]], slopes: &[&[f64]], tau2: f64) -> SureLet {
    let n = r.len();
    let k = family.len();
    let gram = DMatrix::from_fn(k, k, |i, j| dot(family[i], family[j]));
    if !(gram.trace() > degenerate_threshold(n)) {
        return SureLet {
            output: vec![0.0; n],
            divergence: 0.0,
            coefficients: vec![0.0; k],
        };
    }
    let divs: Vec<f64> = slopes
        .iter()
        .map(|s| s.iter().sum::<f64>() / n as f64)
        .collect();
    let mut rhs = DMatrix::identity(k, k + 1);
    for j in 0..k {
        rhs[(j, 0)] = dot(family[j], r) - n as f64 * tau2 * divs[j];
        for l in 0..k {
            rhs[(j, l + 1)] = if j == l { 1.0 } else { 0.0 };
        }
    }
    let sol = ridge_solve_many(gram, rhs);
    let a = sol.column(0).into_owned();
    let inv = sol.columns(1, k).into_owned();

    let mut output = vec![0.0; n];
    for (f, aj) in family.iter().zip(a.iter()) {
        for (o, v) in output.iter_mut().zip(f.iter()) {
            *o += aj * v;
        }
    }

    // ∂o_i/∂r_i = sᵢᵀa + (r_i − o_i)·fᵢᵀM⁻¹sᵢ + (1 − sᵢᵀa)·fᵢᵀM⁻¹fᵢ
    let mut total = 0.0;
    let mut fi = DVector::zeros(k);
    let mut si = DVector::zeros(k);
    for i in 0..n {
        for j in 0..k {
            fi[j] = family[j][i];
            si[j] = slopes[j][i];
        }
        let sa = si.dot(&a);
        let mf = &inv * &fi;
        total += sa + (r[i] - output[i]) * mf.dot(&si) + (1.0 - sa) * mf.dot(&fi);
    }
    SureLet {
        output,
        divergence: total / n as f64,
        coefficients: a.as_slice().to_vec(),
    }
}
