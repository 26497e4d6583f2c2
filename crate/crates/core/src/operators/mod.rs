//! Sensing operators `A` for the measurement model `y = A x + w`.
//!
//! Two kinds are supported: a dense matrix with i.i.d. `N(0, 1/M)` entries,
//! and the randomized partial orthogonal operator
//! `A = sqrt(N/M) · S · Fᵀ · Θ₁ · F · Θ₂` where `F` is the orthonormal DCT-II,
//! `Θ₁`, `Θ₂` are random ±1 diagonals and `S` keeps `M` of the `N` rows.
//! The partial-DCT kind is applied through fast transforms and never
//! materialized unless asked to.

mod dct;

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::rng::rng_from;
use crate::{Error, Result};

pub use dct::{dct_direct, dct_orthonormal, idct_direct, idct_orthonormal, DctPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    DenseGaussian,
    PartialDct,
}

#[derive(Debug, Clone)]
pub struct SensingOperator {
    m: usize,
    n: usize,
    repr: Repr,
}

#[derive(Debug, Clone)]
enum Repr {
    Dense(DenseOperator),
    PartialDct(PartialDct),
}

#[derive(Debug, Clone)]
struct DenseOperator {
    entries: DMatrix<f64>,
    // A·Aᵀ, computed on first use by the LMMSE filter
    gram: OnceLock<DMatrix<f64>>,
}

#[derive(Debug, Clone)]
struct PartialDct {
    row_select: Vec<usize>,
    signs_outer: Vec<f64>,
    signs_inner: Vec<f64>,
    scale: f64,
    plan: DctPlan,
}

fn check_dims(m: usize, n: usize) -> Result<()> {
    if m == 0 || n == 0 || m > n {
        return Err(Error::InvalidDimensions(format!(
            "need 1 <= m <= n, got m = {m}, n = {n}"
        )));
    }
    Ok(())
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::InvalidDimensions(format!(
            "{what} has length {got}, expected {want}"
        )));
    }
    Ok(())
}

impl SensingOperator {
    /// Dense operator with i.i.d. `N(0, 1/m)` entries, drawn row by row.
    pub fn gaussian(m: usize, n: usize, seed: u64) -> Result<Self> {
        check_dims(m, n)?;
        let mut rng = rng_from(seed);
        let normal = Normal::new(0.0, (1.0 / m as f64).sqrt()).expect("finite std");
        let data: Vec<f64> = (0..m * n).map(|_| normal.sample(&mut rng)).collect();
        Ok(Self::from_dense(DMatrix::from_row_slice(m, n, &data)))
    }

    /// Randomized partial orthogonal operator built from the orthonormal DCT.
    pub fn partial_dct(m: usize, n: usize, seed: u64) -> Result<Self> {
        check_dims(m, n)?;
        let mut rng = rng_from(seed);
        let mut row_select = rand::seq::index::sample(&mut rng, n, m).into_vec();
        row_select.sort_unstable();
        let signs = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
            (0..n)
                .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
                .collect()
        };
        let signs_outer = signs(&mut rng);
        let signs_inner = signs(&mut rng);
        Ok(Self {
            m,
            n,
            repr: Repr::PartialDct(PartialDct {
                row_select,
                signs_outer,
                signs_inner,
                scale: (n as f64 / m as f64).sqrt(),
                plan: DctPlan::new(n),
            }),
        })
    }

    /// Wraps an explicit matrix. The result behaves as the dense kind.
    pub fn from_dense(entries: DMatrix<f64>) -> Self {
        let (m, n) = entries.shape();
        Self {
            m,
            n,
            repr: Repr::Dense(DenseOperator {
                entries,
                gram: OnceLock::new(),
            }),
        }
    }

    pub fn kind(&self) -> OperatorKind {
        match self.repr {
            Repr::Dense(_) => OperatorKind::DenseGaussian,
            Repr::PartialDct(_) => OperatorKind::PartialDct,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dense_entries(&self) -> Option<&DMatrix<f64>> {
        match &self.repr {
            Repr::Dense(d) => Some(&d.entries),
            Repr::PartialDct(_) => None,
        }
    }

    pub fn row_select(&self) -> Option<&[usize]> {
        match &self.repr {
            Repr::PartialDct(p) => Some(&p.row_select),
            Repr::Dense(_) => None,
        }
    }

    /// Diagonal of `Θ₁` (applied between the two transforms).
    pub fn signs_outer(&self) -> Option<&[f64]> {
        match &self.repr {
            Repr::PartialDct(p) => Some(&p.signs_outer),
            Repr::Dense(_) => None,
        }
    }

    /// Diagonal of `Θ₂` (applied to the input first).
    pub fn signs_inner(&self) -> Option<&[f64]> {
        match &self.repr {
            Repr::PartialDct(p) => Some(&p.signs_inner),
            Repr::Dense(_) => None,
        }
    }

    /// `sqrt(N/M)` for the partial-DCT kind.
    pub fn scale(&self) -> Option<f64> {
        match &self.repr {
            Repr::PartialDct(p) => Some(p.scale),
            Repr::Dense(_) => None,
        }
    }

    /// `A·x`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("forward input", x.len(), self.n)?;
        Ok(match &self.repr {
            Repr::Dense(d) => {
                let out = &d.entries * DVector::from_column_slice(x);
                out.as_slice().to_vec()
            }
            Repr::PartialDct(p) => {
                let mut buf: Vec<f64> = x.iter().zip(&p.signs_inner).map(|(v, s)| v * s).collect();
                p.plan.forward(&mut buf);
                for (v, s) in buf.iter_mut().zip(&p.signs_outer) {
                    *v *= s;
                }
                p.plan.inverse(&mut buf);
                p.row_select.iter().map(|&i| p.scale * buf[i]).collect()
            }
        })
    }

    /// `Aᵀ·z`.
    pub fn adjoint(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len("adjoint input", z.len(), self.m)?;
        Ok(match &self.repr {
            Repr::Dense(d) => {
                let out = d.entries.tr_mul(&DVector::from_column_slice(z));
                out.as_slice().to_vec()
            }
            Repr::PartialDct(p) => {
                let mut buf = vec![0.0; self.n];
                for (&i, &v) in p.row_select.iter().zip(z) {
                    buf[i] = p.scale * v;
                }
                p.plan.forward(&mut buf);
                for (v, s) in buf.iter_mut().zip(&p.signs_outer) {
                    *v *= s;
                }
                p.plan.inverse(&mut buf);
                for (v, s) in buf.iter_mut().zip(&p.signs_inner) {
                    *v *= s;
                }
                buf
            }
        })
    }

    /// Explicit `M×N` matrix. Costs `N` forward applications for the
    /// partial-DCT kind; meant for small sizes and testing.
    pub fn materialize(&self) -> DMatrix<f64> {
        match &self.repr {
            Repr::Dense(d) => d.entries.clone(),
            Repr::PartialDct(_) => {
                let mut a = DMatrix::zeros(self.m, self.n);
                let mut e = vec![0.0; self.n];
                for j in 0..self.n {
                    e[j] = 1.0;
                    let col = self.forward(&e).expect("length checked");
                    a.column_mut(j).copy_from_slice(&col);
                    e[j] = 0.0;
                }
                a
            }
        }
    }

    /// Dense copy of this operator.
    pub fn to_dense(&self) -> Self {
        Self::from_dense(self.materialize())
    }

    /// `trace(AᵀA)`: exactly `N` for the partial-DCT kind, the sum of squared
    /// column norms otherwise.
    pub fn trace_gram(&self) -> f64 {
        match &self.repr {
            Repr::Dense(d) => d.entries.column_iter().map(|c| c.norm_squared()).sum(),
            Repr::PartialDct(_) => self.n as f64,
        }
    }

    /// Applies the trace-normalized OAMP linear filter `W_t` to `z`.
    ///
    /// `W_t = (N / trace(Ŵ_t A)) · Ŵ_t`. For the partial-DCT kind `Ŵ_t ∝ Aᵀ`
    /// and the result is `Aᵀz`. For the dense kind `Ŵ_t` is the LMMSE matrix
    /// `v2·Aᵀ(v2·AAᵀ + sigma2·I)⁻¹`, re-factorized on every call.
    pub fn oamp_filter(&self, z: &[f64], v2: f64, sigma2: f64) -> Result<Vec<f64>> {
        check_len("filter input", z.len(), self.m)?;
        if !(v2 >= 0.0 && sigma2 >= 0.0) {
            return Err(Error::InvalidNoiseLevel(v2.min(sigma2)));
        }
        let d = match &self.repr {
            Repr::PartialDct(_) => return self.adjoint(z),
            Repr::Dense(d) => d,
        };
        if v2 == 0.0 && sigma2 == 0.0 {
            return Err(Error::SingularSystem { v2, sigma2 });
        }
        let n = self.n as f64;
        let matched_filter = |z: &[f64]| -> Result<Vec<f64>> {
            let tg = self.trace_gram();
            if tg <= 0.0 {
                return Err(Error::InvalidOperatorStats(tg));
            }
            Ok(self.adjoint(z)?.into_iter().map(|v| v * n / tg).collect())
        };
        if v2 == 0.0 {
            // the sigma2/v2 -> infinity limit of the normalized LMMSE filter
            return matched_filter(z);
        }

        let gram = d.gram.get_or_init(|| &d.entries * d.entries.transpose());
        let ridge = sigma2 / v2;
        let mut system = gram.clone();
        for i in 0..self.m {
            system[(i, i)] += ridge;
        }
        let chol = system
            .cholesky()
            .ok_or(Error::SingularSystem { v2, sigma2 })?;
        let u = chol.solve(&DVector::from_column_slice(z));

        // trace((G + sI)⁻¹ G) = M − s·trace((G + sI)⁻¹) = M − s·‖L⁻¹‖²_F
        let trace_wa = if ridge > 0.0 {
            let l_inv = chol
                .l()
                .solve_lower_triangular(&DMatrix::identity(self.m, self.m))
                .ok_or(Error::SingularSystem { v2, sigma2 })?;
            self.m as f64 - ridge * l_inv.norm_squared()
        } else {
            self.m as f64
        };
        if !(trace_wa > 1e-12 * self.m as f64) {
            return matched_filter(z);
        }
        let wz = d.entries.tr_mul(&u);
        Ok(wz.iter().map(|v| v * n / trace_wa).collect())
    }
}

/// Convenience constructor matching the CLI vocabulary.
pub fn make_gaussian(m: usize, n: usize, seed: u64) -> Result<SensingOperator> {
    SensingOperator::gaussian(m, n, seed)
}

pub fn make_partial_dct(m: usize, n: usize, seed: u64) -> Result<SensingOperator> {
    SensingOperator::partial_dct(m, n, seed)
}
