//! Orthonormal DCT-II / DCT-III pair.
//!
//! The direct O(N²) evaluation is the reference; [`DctPlan`] wraps a fast
//! planner-backed transform rescaled to the same orthonormal convention.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};

/// Orthonormal DCT-II by direct cosine-sum evaluation.
pub fn dct_direct(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let nf = n as f64;
    (0..n)
        .map(|k| {
            let s: f64 = x
                .iter()
                .enumerate()
                .map(|(i, &xi)| xi * (PI * (i as f64 + 0.5) * k as f64 / nf).cos())
                .sum();
            s * basis_scale(k, n)
        })
        .collect()
}

/// Inverse of [`dct_direct`] (orthonormal DCT-III).
pub fn idct_direct(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    if n == 0 {
        return Vec::new();
    }
    let nf = n as f64;
    (0..n)
        .map(|i| {
            c.iter()
                .enumerate()
                .map(|(k, &ck)| {
                    ck * basis_scale(k, n) * (PI * (i as f64 + 0.5) * k as f64 / nf).cos()
                })
                .sum()
        })
        .collect()
}

fn basis_scale(k: usize, n: usize) -> f64 {
    if k == 0 {
        (1.0 / n as f64).sqrt()
    } else {
        (2.0 / n as f64).sqrt()
    }
}

/// Planned fast transform of a fixed length.
#[derive(Clone)]
pub struct DctPlan {
    len: usize,
    inner: Arc<dyn TransformType2And3<f64>>,
}

impl fmt::Debug for DctPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DctPlan").field("len", &self.len).finish()
    }
}

impl DctPlan {
    pub fn new(len: usize) -> Self {
        let inner = DctPlanner::new().plan_dct2(len);
        Self { len, inner }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In-place orthonormal DCT-II.
    pub fn forward(&self, buf: &mut [f64]) {
        assert_eq!(buf.len(), self.len);
        if self.len == 0 {
            return;
        }
        // rustdct's DCT-II is the unscaled cosine sum
        self.inner.process_dct2(buf);
        buf[0] *= basis_scale(0, self.len);
        let s = basis_scale(1, self.len);
        for v in &mut buf[1..] {
            *v *= s;
        }
    }

    /// In-place orthonormal DCT-III (inverse of [`DctPlan::forward`]).
    pub fn inverse(&self, buf: &mut [f64]) {
        assert_eq!(buf.len(), self.len);
        if self.len == 0 {
            return;
        }
        // rustdct's DCT-III computes X_0/2 + sum_k X_k cos(..)
        buf[0] *= 2.0 * basis_scale(0, self.len);
        let s = basis_scale(1, self.len);
        for v in &mut buf[1..] {
            *v *= s;
        }
        self.inner.process_dct3(buf);
    }
}

/// Orthonormal DCT-II of `x`.
pub fn dct_orthonormal(x: &[f64]) -> Vec<f64> {
    let mut out = x.to_vec();
    DctPlan::new(x.len()).forward(&mut out);
    out
}

/// Orthonormal inverse DCT (DCT-III) of `c`.
pub fn idct_orthonormal(c: &[f64]) -> Vec<f64> {
    let mut out = c.to_vec();
    DctPlan::new(c.len()).inverse(&mut out);
    out
}
