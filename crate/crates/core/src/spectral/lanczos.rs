//! Smallest eigenpairs of a symmetric operator by Lanczos iteration.
//!
//! Each pass runs a Lanczos recurrence with full (twice-applied)
//! Gram–Schmidt reorthogonalization inside the orthogonal complement of the
//! pairs locked so far. Ritz pairs are locked in ascending order while their
//! true residual `‖A x − θ x‖` is within tolerance; the first unconverged
//! pair ends the pass. When the recurrence breaks down (an invariant
//! subspace was found) it continues from a fresh random vector orthogonal to
//! everything seen, which is how repeated eigenvalues are recovered. Once
//! enough pairs are locked, one more pass over the complement checks that no
//! smaller eigenvalue was skipped.
//!
//! Only matrix–vector products with the operator are used. The random start
//! vectors come from a seeded stream, so results are deterministic.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::SymOperator;
use crate::linalg::{dot, norm, Matrix};
use crate::rng::{rng_from_seed, Rng};
use crate::scalar::Scalar;

use super::tridiag::tridiagonal_eigen;

#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions {
    /// Residual tolerance for accepting a Ritz pair.
    pub tol: f64,
    pub seed: u64,
    /// Cap on Lanczos passes before giving up.
    pub max_passes: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            seed: 0,
            max_passes: 200,
        }
    }
}

/// Default residual tolerance for a scalar type.
pub fn default_tolerance<T: Scalar>() -> f64 {
    (T::epsilon().to_f64_lossless() * 1e3).max(1e-9)
}

#[derive(Clone, Debug)]
pub struct EigenPairs<T> {
    /// Ascending.
    pub values: Vec<T>,
    /// `n × q`, column `k` pairs with `values[k]`.
    pub vectors: Matrix<T>,
    pub residuals: Vec<T>,
}

struct Locked<T> {
    value: T,
    vector: Vec<T>,
    residual: T,
}

fn orthogonalize<T: Scalar>(w: &mut [T], against: &[&[T]]) {
    for _ in 0..2 {
        for v in against {
            let c = dot(v, w);
            for (wi, &vi) in w.iter_mut().zip(v.iter()) {
                *wi -= c * vi;
            }
        }
    }
}

fn random_orthogonal_unit<T: Scalar>(n: usize, against: &[&[T]], rng: &mut Rng) -> Option<Vec<T>> {
    for _ in 0..5 {
        let mut w: Vec<T> = (0..n).map(|_| T::of(StandardNormal.sample(rng))).collect();
        let before = norm(&w);
        orthogonalize(&mut w, against);
        let after = norm(&w);
        if after > before * T::of(1e-6) {
            for x in &mut w {
                *x /= after;
            }
            return Some(w);
        }
    }
    None
}

struct Krylov<T> {
    basis: Vec<Vec<T>>,
    alpha: Vec<T>,
    beta: Vec<T>,
}

fn lanczos_pass<T: Scalar, A: SymOperator<T> + ?Sized>(
    op: &A,
    locked: &[Locked<T>],
    steps: usize,
    rng: &mut Rng,
) -> Option<Krylov<T>> {
    let n = op.dim();
    let locked_refs: Vec<&[T]> = locked.iter().map(|l| l.vector.as_slice()).collect();
    let start = random_orthogonal_unit(n, &locked_refs, rng)?;
    let mut k = Krylov {
        basis: vec![start],
        alpha: Vec::with_capacity(steps),
        beta: Vec::with_capacity(steps),
    };
    let mut w = vec![T::zero(); n];
    let mut anorm = T::zero();
    for j in 0..steps {
        op.apply(&k.basis[j], &mut w);
        let a = dot(&k.basis[j], &w);
        k.alpha.push(a);
        for (wi, &vi) in w.iter_mut().zip(&k.basis[j]) {
            *wi -= a * vi;
        }
        if j > 0 {
            let b = k.beta[j - 1];
            for (wi, &vi) in w.iter_mut().zip(&k.basis[j - 1]) {
                *wi -= b * vi;
            }
        }
        {
            let mut against: Vec<&[T]> = locked_refs.clone();
            against.extend(k.basis.iter().map(Vec::as_slice));
            orthogonalize(&mut w, &against);
        }
        if j + 1 == steps {
            break;
        }
        let b = norm(&w);
        anorm = anorm.max(a.abs() + b);
        let breakdown = T::epsilon() * T::of(1e3) * anorm.max(T::min_positive_value());
        if b > breakdown {
            k.beta.push(b);
            k.basis.push(w.iter().map(|&x| x / b).collect());
        } else {
            let mut against: Vec<&[T]> = locked_refs.clone();
            against.extend(k.basis.iter().map(Vec::as_slice));
            match random_orthogonal_unit(n, &against, rng) {
                Some(u) => {
                    k.beta.push(T::zero());
                    k.basis.push(u);
                }
                None => break,
            }
        }
    }
    Some(k)
}

fn ritz_vector<T: Scalar>(basis: &[Vec<T>], coeffs: &Matrix<T>, col: usize) -> Vec<T> {
    let n = basis[0].len();
    let mut x = vec![T::zero(); n];
    for (j, b) in basis.iter().enumerate() {
        let c = coeffs[(j, col)];
        for (xi, &bi) in x.iter_mut().zip(b) {
            *xi += c * bi;
        }
    }
    let nx = norm(&x);
    for xi in &mut x {
        *xi /= nx;
    }
    x
}

fn residual<T: Scalar, A: SymOperator<T> + ?Sized>(op: &A, x: &[T], theta: T, scratch: &mut [T]) -> T {
    op.apply(x, scratch);
    let mut s = T::zero();
    for (&ax, &xi) in scratch.iter().zip(x) {
        let r = ax - theta * xi;
        s += r * r;
    }
    s.sqrt()
}

/// The `q` smallest eigenpairs of `op`.
pub fn smallest_eigenpairs<T: Scalar, A: SymOperator<T> + ?Sized>(
    op: &A,
    q: usize,
    opts: &LanczosOptions,
) -> Result<EigenPairs<T>> {
    let n = op.dim();
    if q == 0 || q > n {
        return Err(Error::Config(format!("requested {q} eigenpairs of a {n}x{n} operator")));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Config("eigensolver tolerance must be positive".into()));
    }
    let tol = T::of(opts.tol);
    let slack = tol * T::of(10.0);
    let mut rng = rng_from_seed(opts.seed);
    let mut locked: Vec<Locked<T>> = Vec::new();
    let mut scratch = vec![T::zero(); n];
    let mut hint = 0usize;
    let mut last_residuals: Vec<f64> = Vec::new();

    for _pass in 0..opts.max_passes {
        let avail = n - locked.len();
        if avail == 0 {
            break;
        }
        let verifying = locked.len() >= q;
        let wanted = q.saturating_sub(locked.len());
        let steps = avail.min((2 * wanted + 20).max(30).max(hint));
        let Some(k) = lanczos_pass(op, &locked, steps, &mut rng) else {
            // The complement is numerically empty.
            break;
        };
        let (theta, coeffs) = tridiagonal_eigen(&k.alpha, &k.beta)?;
        let bound = if verifying {
            locked.iter().map(|l| l.value).fold(T::neg_infinity(), T::max) - slack
        } else {
            T::infinity()
        };
        if verifying && theta[0] >= bound {
            break;
        }

        let mut fresh = Vec::new();
        last_residuals.clear();
        for (col, &th) in theta.iter().enumerate() {
            if !verifying && fresh.len() >= wanted {
                break;
            }
            if verifying && th >= bound {
                break;
            }
            let x = ritz_vector(&k.basis, &coeffs, col);
            let r = residual(op, &x, th, &mut scratch);
            last_residuals.push(r.to_f64_lossless());
            if r <= tol {
                fresh.push(Locked {
                    value: th,
                    vector: x,
                    residual: r,
                });
            } else {
                break;
            }
        }

        if fresh.is_empty() {
            if k.basis.len() >= avail {
                return Err(Error::NoConvergence {
                    iterations: _pass + 1,
                    residuals: last_residuals,
                });
            }
            hint = avail.min(2 * steps.max(hint));
            continue;
        }
        hint = 0;
        locked.extend(fresh);
        if locked.len() > q {
            locked.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap_or(std::cmp::Ordering::Equal));
            locked.truncate(q);
        }
    }

    if locked.len() < q {
        return Err(Error::NoConvergence {
            iterations: opts.max_passes,
            residuals: last_residuals,
        });
    }
    locked.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap_or(std::cmp::Ordering::Equal));
    let mut vectors = Matrix::zeros(n, q);
    for (c, l) in locked.iter().enumerate() {
        for (r, &v) in l.vector.iter().enumerate() {
            vectors[(r, c)] = v;
        }
    }
    Ok(EigenPairs {
        values: locked.iter().map(|l| l.value).collect(),
        residuals: locked.iter().map(|l| l.residual).collect(),
        vectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_operator_with_repeats() {
        let diag = [3.0f64, 1.0, 1.0, 0.5, 2.0, 1.0];
        let m = Matrix::from_fn(6, 6, |i, j| if i == j { diag[i] } else { 0.0 });
        let pairs = smallest_eigenpairs(&m, 6, &LanczosOptions::default()).unwrap();
        assert_eq!(pairs.values.len(), 6);
        let expected = [0.5, 1.0, 1.0, 1.0, 2.0, 3.0];
        for (v, e) in pairs.values.iter().zip(expected) {
            assert!((v - e).abs() < 1e-12, "{:?}", pairs.values);
        }
        let partial = smallest_eigenpairs(&m, 3, &LanczosOptions::default()).unwrap();
        for (v, e) in partial.values.iter().zip(&expected[..3]) {
            assert!((v - e).abs() < 1e-9, "{:?}", partial.values);
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let m = Matrix::<f64>::identity(3);
        assert!(smallest_eigenpairs(&m, 0, &LanczosOptions::default()).is_err());
        assert!(smallest_eigenpairs(&m, 4, &LanczosOptions::default()).is_err());
        let bad = LanczosOptions {
            tol: 0.0,
            ..Default::default()
        };
        assert!(smallest_eigenpairs(&m, 1, &bad).is_err());
    }

    #[test]
    fn same_seed_same_result() {
        let m = Matrix::from_fn(20, 20, |i, j| 1.0 / (1.0 + i as f64 + j as f64));
        let a = smallest_eigenpairs(&m, 5, &LanczosOptions::default()).unwrap();
        let b = smallest_eigenpairs(&m, 5, &LanczosOptions::default()).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.vectors, b.vectors);
    }
}
