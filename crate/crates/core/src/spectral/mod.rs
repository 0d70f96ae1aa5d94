//! Truncated eigendecomposition, Box-Cox stabilization, adaptive filter and
//! wavelet bases.

mod boxcox;
mod cache;
mod filter;
mod lanczos;
mod tridiag;
mod wavelet;

pub use boxcox::{boxcox, boxcox_fit, log_likelihood, BoxCoxResult, KAPPA_RANGE};
pub use cache::{read_cache, read_cache_file, write_cache, write_cache_file, CacheKey, SpectralCache, CACHE_TAG};
pub use filter::{band, exponent_base, multiplier, transfer, AdaptiveFilter, Band, ExponentMode, FilterOptions, InverseMode};
pub use lanczos::{default_tolerance, smallest_eigenpairs, EigenPairs, LanczosOptions};
pub use tridiag::tridiagonal_eigen;
pub use wavelet::{build_wavelet_pair, spectral_operator, WaveletPair, DEFAULT_DROP_THRESHOLD};

use crate::error::{Error, Result};
use crate::graph::BipartiteLaplacian;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Retained eigenpairs of the normalized Laplacian.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDecomposition<T> {
    /// Ascending eigenvalues.
    pub lambdas: Vec<T>,
    /// `1 + λ`.
    pub shifted: Vec<T>,
    /// `N × Q`, orthonormal columns.
    pub phi: Matrix<T>,
}

impl<T: Scalar> SpectralDecomposition<T> {
    pub fn new(lambdas: Vec<T>, phi: Matrix<T>) -> Result<Self> {
        if phi.cols() != lambdas.len() {
            return Err(Error::Shape(format!(
                "{} eigenvalues for {} eigenvectors",
                lambdas.len(),
                phi.cols()
            )));
        }
        let shifted = lambdas.iter().map(|&l| T::one() + l).collect();
        Ok(Self { lambdas, shifted, phi })
    }

    pub fn q(&self) -> usize {
        self.lambdas.len()
    }

    pub fn n(&self) -> usize {
        self.phi.rows()
    }

    /// `max |ΦᵀΦ − I|`.
    pub fn orthonormality_error(&self) -> T {
        let g = self.phi.tr_matmul(&self.phi).expect("square gram");
        g.max_abs_diff(&Matrix::identity(self.q()))
    }
}

/// Default number of retained eigenpairs: `min(N, max(64, ⌈0.02 N⌉))`.
pub fn default_q(n: usize) -> usize {
    n.min(64.max((n as f64 * 0.02).ceil() as usize))
}

/// `q` smallest eigenpairs of the Laplacian. `q` above `N` is an error;
/// callers that want clamping do it first.
pub fn eigensolve<T: Scalar>(lap: &BipartiteLaplacian<T>, q: usize, opts: &LanczosOptions) -> Result<SpectralDecomposition<T>> {
    let pairs = smallest_eigenpairs(lap, q, opts)?;
    SpectralDecomposition::new(pairs.values, pairs.vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{laplacian_of, IsolatedNodes};
    use crate::ingest::InteractionSet;

    #[test]
    fn two_node_graph_is_analytic() {
        let data = InteractionSet::from_index_pairs(1, 1, vec![(0, 0)]).unwrap();
        let lap = laplacian_of::<f64>(&data, IsolatedNodes::Error).unwrap();
        let d = eigensolve(&lap, 2, &LanczosOptions::default()).unwrap();
        assert!(d.lambdas[0].abs() < 1e-12 && (d.lambdas[1] - 2.0).abs() < 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((d.phi[(0, 0)].abs() - s).abs() < 1e-12);
        assert!((d.phi[(0, 0)] - d.phi[(1, 0)]).abs() < 1e-12);
        assert!((d.phi[(0, 1)] + d.phi[(1, 1)]).abs() < 1e-12);
        assert_eq!(d.shifted, d.lambdas.iter().map(|l| 1.0 + l).collect::<Vec<_>>());
    }

    #[test]
    fn complete_bipartite_k23() {
        let pairs = (0..2).flat_map(|u| (0..3).map(move |i| (u, i))).collect();
        let data = InteractionSet::from_index_pairs(2, 3, pairs).unwrap();
        let lap = laplacian_of::<f64>(&data, IsolatedNodes::Error).unwrap();
        let d = eigensolve(&lap, 5, &LanczosOptions::default()).unwrap();
        for (v, e) in d.lambdas.iter().zip([0.0, 1.0, 1.0, 1.0, 2.0]) {
            assert!((v - e).abs() < 1e-10, "{:?}", d.lambdas);
        }
        assert!(d.orthonormality_error() < 1e-10);
    }

    #[test]
    fn default_q_rule() {
        assert_eq!(default_q(10), 10);
        assert_eq!(default_q(500), 64);
        assert_eq!(default_q(9744), 195);
    }
}
