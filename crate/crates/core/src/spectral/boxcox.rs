//! Box-Cox power transform with maximum-likelihood parameter selection.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Search interval for the transform parameter.
pub const KAPPA_RANGE: (f64, f64) = (-5.0, 5.0);
const COARSE_STEP: f64 = 0.01;
const REFINE_TOL: f64 = 1e-7;

/// `(x^κ − 1)/κ`, or `ln x` at `κ = 0`.
pub fn boxcox(x: f64, kappa: f64) -> f64 {
    if kappa == 0.0 {
        x.ln()
    } else {
        (kappa * x.ln()).exp_m1() / kappa
    }
}

/// Profile log-likelihood of `κ` under a normal model of the transformed
/// data: `−(n/2)·ln(σ²) + (κ − 1)·Σ ln x`, with `σ²` the variance (divisor
/// `n`) of the transformed values.
pub fn log_likelihood(data: &[f64], kappa: f64) -> f64 {
    let n = data.len() as f64;
    let log_sum: f64 = data.iter().map(|x| x.ln()).sum();
    let y: Vec<f64> = data.iter().map(|&x| boxcox(x, kappa)).collect();
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    -0.5 * n * var.ln() + (kappa - 1.0) * log_sum
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoxCoxResult<T> {
    pub kappa: T,
    pub transformed: Vec<T>,
    /// Sample mean of the transformed values.
    pub mean: T,
    /// Sample standard deviation (divisor `Q − 1`).
    pub std: T,
    /// Sum of the transformed values.
    pub sum: T,
    /// All inputs equal; `κ` was set to 1 instead of fitted.
    pub degenerate: bool,
}

impl<T: Scalar> BoxCoxResult<T> {
    /// Transforms `values` with a fixed `kappa`.
    pub fn with_kappa(values: &[T], kappa: f64, degenerate: bool) -> Self {
        let transformed: Vec<f64> = values.iter().map(|v| boxcox(v.to_f64_lossless(), kappa)).collect();
        let q = transformed.len() as f64;
        let sum: f64 = transformed.iter().sum();
        let mean = sum / q;
        let std = if transformed.len() > 1 {
            (transformed.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (q - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            kappa: T::of(kappa),
            transformed: transformed.into_iter().map(T::of).collect(),
            mean: T::of(mean),
            std: if degenerate { T::zero() } else { T::of(std) },
            sum: T::of(sum),
            degenerate,
        }
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Fits `κ` by maximizing [`log_likelihood`] over [`KAPPA_RANGE`]: a coarse
/// grid locates the best bracket, then golden-section search refines it.
pub fn boxcox_fit<T: Scalar>(values: &[T]) -> Result<BoxCoxResult<T>> {
    if values.len() < 2 {
        return Err(Error::Config(format!(
            "Box-Cox fit needs at least 2 values, got {}",
            values.len()
        )));
    }
    let data: Vec<f64> = values.iter().map(|v| v.to_f64_lossless()).collect();
    if let Some(bad) = data.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Config(format!("Box-Cox input must be positive and finite, got {bad}")));
    }
    let first = data[0];
    if data.iter().all(|&x| x == first) {
        log::warn!("Box-Cox input is constant; using kappa = 1");
        return Ok(BoxCoxResult::with_kappa(values, 1.0, true));
    }

    let llf = |k: f64| {
        let v = log_likelihood(&data, k);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let (lo, hi) = KAPPA_RANGE;
    let steps = ((hi - lo) / COARSE_STEP).round() as usize;
    let grid = |s: usize| lo + s as f64 * COARSE_STEP;
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for s in 0..=steps {
        let v = llf(grid(s));
        if v > best_val {
            best_val = v;
            best = s;
        }
    }
    let a = grid(best.saturating_sub(1));
    let b = grid((best + 1).min(steps));
    let refined = golden_max(llf, a, b, REFINE_TOL);
    let kappa = if llf(refined) >= best_val { refined } else { grid(best) };
    Ok(BoxCoxResult::with_kappa(values, kappa, false))
}
