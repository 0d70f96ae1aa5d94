//! Bipartite adjacency and normalized Laplacian as sparse symmetric operators.

use std::io::Write;

use crate::error::{Error, Result};
use crate::ingest::InteractionSet;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// A symmetric linear operator accessed only through matrix–vector products.
pub trait SymOperator<T: Scalar>: Sync {
    fn dim(&self) -> usize;

    /// `y = A x`.
    fn apply(&self, x: &[T], y: &mut [T]);
}

/// Symmetric matrix in compressed-row form.
///
/// Built from upper-triangle coordinates; each off-diagonal value is written
/// to both `(i, j)` and `(j, i)` from the same source value, so the stored
/// matrix is exactly symmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSymMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> SparseSymMatrix<T> {
    /// Builds from `(i, j, v)` triplets with `i <= j`. Duplicate coordinates
    /// are summed; entries with `|v| < drop_threshold` are not stored.
    pub fn from_upper(n: usize, triplets: impl IntoIterator<Item = (usize, usize, T)>, drop_threshold: T) -> Result<Self> {
        let mut coo: Vec<(usize, usize, T)> = Vec::new();
        for (i, j, v) in triplets {
            if i > j || j >= n {
                return Err(Error::Shape(format!("triplet ({i}, {j}) is not upper-triangular in {n}x{n}")));
            }
            coo.push((i, j, v));
        }
        coo.sort_by_key(|e| (e.0, e.1));
        let mut merged: Vec<(usize, usize, T)> = Vec::with_capacity(coo.len());
        for (i, j, v) in coo {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        merged.retain(|&(_, _, v)| !(v.abs() < drop_threshold));

        let mut full: Vec<(usize, usize, T)> = Vec::with_capacity(2 * merged.len());
        for &(i, j, v) in &merged {
            full.push((i, j, v));
            if i != j {
                full.push((j, i, v));
            }
        }
        full.sort_by_key(|e| (e.0, e.1));

        let mut row_ptr = vec![0usize; n + 1];
        for &(i, _, _) in &full {
            row_ptr[i + 1] += 1;
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx: full.iter().map(|e| e.1).collect(),
            values: full.iter().map(|e| e.2).collect(),
        })
    }

    /// Sparse copy of a dense matrix, reading the upper triangle.
    pub fn from_dense_upper(m: &Matrix<T>, drop_threshold: T) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::Shape("sparse symmetric copy of a non-square matrix".into()));
        }
        let n = m.rows();
        let trip = (0..n)
            .flat_map(|i| (i..n).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, m[(i, j)]));
        Self::from_upper(n, trip, drop_threshold)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored entries, counting `(i, j)` and `(j, i)` separately.
    pub fn stored_entries(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[span.clone()].binary_search(&j) {
            Ok(p) => self.values[span.start + p],
            Err(_) => T::zero(),
        }
    }

    pub fn to_dense(&self) -> Matrix<T> {
        let mut d = Matrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[(i, j)] = v;
            }
        }
        d
    }

    /// Row sums.
    pub fn row_sums(&self) -> Vec<T> {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    /// `self · B` for a dense `B`.
    pub fn mul_dense(&self, b: &Matrix<T>) -> Result<Matrix<T>> {
        if b.rows() != self.n {
            return Err(Error::Shape(format!(
                "sparse {n}x{n} by dense {}x{}",
                b.rows(),
                b.cols(),
                n = self.n
            )));
        }
        let mut out = Matrix::zeros(self.n, b.cols());
        for i in 0..self.n {
            let dst = out.row_mut(i);
            for (j, v) in self.row(i) {
                for (o, &x) in dst.iter_mut().zip(b.row(j)) {
                    *o += v * x;
                }
            }
        }
        Ok(out)
    }

    /// Writes `i j value` lines (both triangles), e.g. for external checks.
    pub fn write_coordinates(&self, w: &mut impl Write) -> std::io::Result<()> {
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                writeln!(w, "{i} {j} {:?}", v.to_f64_lossless())?;
            }
        }
        Ok(())
    }
}

impl<T: Scalar> SymOperator<T> for SparseSymMatrix<T> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut s = T::zero();
            for (j, v) in self.row(i) {
                s += v * x[j];
            }
            *yi = s;
        }
    }
}

impl<T: Scalar> SymOperator<T> for Matrix<T> {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = crate::linalg::dot(self.row(i), x);
        }
    }
}

/// `[[0, R], [Rᵀ, 0]]` with user `u` at row `u` and item `i` at row `M + i`.
pub fn build_adjacency<T: Scalar>(data: &InteractionSet) -> Result<SparseSymMatrix<T>> {
    if data.nnz() == 0 {
        return Err(Error::EmptyDataset);
    }
    let m = data.num_users();
    SparseSymMatrix::from_upper(
        data.num_nodes(),
        data.pairs().iter().map(|&(u, i)| (u as usize, m + i as usize, T::one())),
        T::zero(),
    )
}

/// How [`build_laplacian_with`] treats nodes without edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum IsolatedNodes {
    /// Reject the graph.
    #[default]
    Error,
    /// Take `D^{-1/2}` as 0 for the node, leaving a unit diagonal entry and
    /// no off-diagonals (its eigenvector is the node indicator, eigenvalue 1).
    Decouple,
}

#[derive(Clone, Debug)]
pub struct BipartiteLaplacian<T> {
    pub num_users: usize,
    pub num_items: usize,
    pub laplacian: SparseSymMatrix<T>,
    pub degree: Vec<T>,
}

impl<T: Scalar> BipartiteLaplacian<T> {
    pub fn n(&self) -> usize {
        self.num_users + self.num_items
    }

    pub fn isolated_nodes(&self) -> usize {
        self.degree.iter().filter(|&&d| d == T::zero()).count()
    }
}

impl<T: Scalar> SymOperator<T> for BipartiteLaplacian<T> {
    fn dim(&self) -> usize {
        self.laplacian.n()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        self.laplacian.apply(x, y)
    }
}

/// `L = I − D^{-1/2} A D^{-1/2}`; every node must have an edge.
pub fn build_laplacian<T: Scalar>(a: &SparseSymMatrix<T>, num_users: usize) -> Result<BipartiteLaplacian<T>> {
    build_laplacian_with(a, num_users, IsolatedNodes::Error)
}

pub fn build_laplacian_with<T: Scalar>(
    a: &SparseSymMatrix<T>,
    num_users: usize,
    isolated: IsolatedNodes,
) -> Result<BipartiteLaplacian<T>> {
    let n = a.n();
    if num_users > n {
        return Err(Error::Shape(format!("{num_users} users in a {n}-node graph")));
    }
    let degree = a.row_sums();
    let mut inv_sqrt = Vec::with_capacity(n);
    for (node, &d) in degree.iter().enumerate() {
        if d > T::zero() {
            inv_sqrt.push(T::one() / d.sqrt());
        } else if isolated == IsolatedNodes::Decouple {
            inv_sqrt.push(T::zero());
        } else {
            return Err(Error::ZeroDegree { node });
        }
    }
    let mut trip = Vec::with_capacity(a.stored_entries() / 2 + n);
    for i in 0..n {
        trip.push((i, i, T::one()));
        for (j, v) in a.row(i) {
            if j > i {
                trip.push((i, j, -(inv_sqrt[i] * v * inv_sqrt[j])));
            } else if j == i {
                trip.push((i, i, -(inv_sqrt[i] * v * inv_sqrt[i])));
            }
        }
    }
    Ok(BipartiteLaplacian {
        num_users,
        num_items: n - num_users,
        laplacian: SparseSymMatrix::from_upper(n, trip, T::zero())?,
        degree,
    })
}

/// Adjacency and Laplacian of the graph of `data`.
pub fn laplacian_of<T: Scalar>(data: &InteractionSet, isolated: IsolatedNodes) -> Result<BipartiteLaplacian<T>> {
    let a = build_adjacency::<T>(data)?;
    build_laplacian_with(&a, data.num_users(), isolated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm;

    fn set(m: usize, k: usize, pairs: &[(u32, u32)]) -> InteractionSet {
        InteractionSet::from_index_pairs(m, k, pairs.to_vec()).unwrap()
    }

    #[test]
    fn smallest_bipartite_graph() {
        let a = build_adjacency::<f64>(&set(1, 1, &[(0, 0)])).unwrap();
        assert_eq!(a.to_dense(), Matrix::from_vec(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap());
        let l = build_laplacian(&a, 1).unwrap();
        assert_eq!(
            l.laplacian.to_dense(),
            Matrix::from_vec(2, 2, vec![1.0, -1.0, -1.0, 1.0]).unwrap()
        );
    }

    #[test]
    fn adjacency_shape_and_blocks() {
        // three users, four items
        let data = set(3, 4, &[(0, 0), (0, 2), (1, 1), (1, 2), (2, 2), (2, 3)]);
        let a = build_adjacency::<f64>(&data).unwrap();
        assert_eq!(a.n(), 7);
        assert_eq!(a.stored_entries(), 2 * data.nnz());
        let d = a.to_dense();
        for i in 0..7 {
            for j in 0..7 {
                assert_eq!(d[(i, j)], d[(j, i)]);
                let same_side = (i < 3) == (j < 3);
                if same_side {
                    assert_eq!(d[(i, j)], 0.0);
                }
            }
        }
        assert_eq!(d[(0, 3 + 2)], 1.0);
    }

    #[test]
    fn adjacency_is_order_invariant() {
        let a = set(3, 3, &[(0, 0), (1, 2), (2, 1), (0, 1)]);
        let b = set(3, 3, &[(2, 1), (0, 1), (1, 2), (0, 0)]);
        assert_eq!(build_adjacency::<f64>(&a).unwrap(), build_adjacency::<f64>(&b).unwrap());
    }

    #[test]
    fn star_user_off_diagonals() {
        let d = 5u32;
        let pairs: Vec<_> = (0..d).map(|i| (0u32, i)).collect();
        let l = laplacian_of::<f64>(&set(1, d as usize, &pairs), IsolatedNodes::Error).unwrap();
        let expected = -1.0 / (d as f64).sqrt();
        for i in 0..d as usize {
            assert!((l.laplacian.get(0, 1 + i) - expected).abs() < 1e-15);
            assert_eq!(l.laplacian.get(1 + i, 0), l.laplacian.get(0, 1 + i));
        }
        assert_eq!(l.laplacian.get(0, 0), 1.0);
    }

    #[test]
    fn zero_degree_node_is_named() {
        let data = set(2, 2, &[(0, 0), (1, 0)]);
        let a = build_adjacency::<f64>(&data).unwrap();
        match build_laplacian(&a, 2) {
            Err(Error::ZeroDegree { node }) => assert_eq!(node, 3),
            other => panic!("unexpected {other:?}"),
        }
        let l = build_laplacian_with(&a, 2, IsolatedNodes::Decouple).unwrap();
        assert_eq!(l.laplacian.get(3, 3), 1.0);
        assert_eq!(l.laplacian.row(3).count(), 1);
        assert_eq!(l.isolated_nodes(), 1);
    }

    #[test]
    fn sqrt_degree_vector_is_in_the_kernel() {
        let data = set(4, 5, &[(0, 0), (0, 1), (1, 1), (1, 2), (2, 3), (3, 4), (3, 0), (2, 2)]);
        let l = laplacian_of::<f64>(&data, IsolatedNodes::Error).unwrap();
        let v: Vec<f64> = l.degree.iter().map(|d| d.sqrt()).collect();
        let mut y = vec![0.0; v.len()];
        l.apply(&v, &mut y);
        assert!(norm(&y) <= 1e-10 * norm(&v));
    }

    #[test]
    fn coordinate_export() {
        let a = build_adjacency::<f64>(&set(1, 1, &[(0, 0)])).unwrap();
        let mut out = Vec::new();
        a.write_coordinates(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "0 1 1.0\n1 0 1.0\n");
    }
}
