//! Materialized wavelet bases `Ψ_t = Φ G_t Φᵀ` and `Ψ_{−t}`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::SparseSymMatrix;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

use super::filter::AdaptiveFilter;
use super::SpectralDecomposition;

pub const DEFAULT_DROP_THRESHOLD: f64 = 1e-7;

#[derive(Clone, Debug)]
pub struct WaveletPair<T> {
    pub psi: SparseSymMatrix<T>,
    pub psi_inv: SparseSymMatrix<T>,
    pub drop_threshold: T,
}

/// Dense `Φ diag(d) Φᵀ`.
pub fn spectral_operator<T: Scalar>(decomp: &SpectralDecomposition<T>, diag: &[T]) -> Result<Matrix<T>> {
    if diag.len() != decomp.q() {
        return Err(Error::Shape(format!(
            "{} diagonal entries for {} eigenpairs",
            diag.len(),
            decomp.q()
        )));
    }
    let mut scaled = decomp.phi.clone();
    for r in 0..scaled.rows() {
        for (v, &d) in scaled.row_mut(r).iter_mut().zip(diag) {
            *v *= d;
        }
    }
    scaled.matmul_tr(&decomp.phi)
}

fn sparse_operator<T: Scalar>(decomp: &SpectralDecomposition<T>, diag: &[T], drop: T) -> Result<SparseSymMatrix<T>> {
    let n = decomp.n();
    let phi = &decomp.phi;
    let rows: Vec<Vec<(usize, usize, T)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let scaled: Vec<T> = phi.row(i).iter().zip(diag).map(|(&p, &d)| p * d).collect();
            (i..n)
                .filter_map(|j| {
                    let v = crate::linalg::dot(&scaled, phi.row(j));
                    (!(v.abs() < drop)).then_some((i, j, v))
                })
                .collect()
        })
        .collect();
    SparseSymMatrix::from_upper(n, rows.into_iter().flatten(), drop)
}

/// Assembles `Ψ_t` and `Ψ_{−t}` and drops entries with `|v| < drop_threshold`.
pub fn build_wavelet_pair<T: Scalar>(
    decomp: &SpectralDecomposition<T>,
    filter: &AdaptiveFilter<T>,
    drop_threshold: T,
) -> Result<WaveletPair<T>> {
    if drop_threshold.is_nan() || drop_threshold < T::zero() {
        return Err(Error::Config(format!("drop threshold must be >= 0, got {drop_threshold}")));
    }
    if filter.q() != decomp.q() {
        return Err(Error::Shape("filter and decomposition sizes differ".into()));
    }
    Ok(WaveletPair {
        psi: sparse_operator(decomp, &filter.response, drop_threshold)?,
        psi_inv: sparse_operator(decomp, &filter.inverse_response, drop_threshold)?,
        drop_threshold,
    })
}
