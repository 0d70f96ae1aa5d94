//! Adaptive low-pass transfer function over Box-Cox transformed frequencies.
//!
//! With `x` the transformed value of a shifted eigenvalue `λ̃`, mean `μ`,
//! sample deviation `σ` and sum `c` of all transformed values, the response
//! is `exp(−p · m)` where the multiplier `m` depends on the band of `x`:
//!
//! | band                  | multiplier        |
//! |-----------------------|-------------------|
//! | `x < μ`               | `1 + 2t/c`        |
//! | `μ ≤ x < μ + σ`       | `1 + 3t/c + σ`    |
//! | `μ + σ ≤ x < μ + 2σ`  | `1 + 4t/c + σ`    |
//! | `x ≥ μ + 2σ`          | `1 + 5t/c + σ`    |
//!
//! Band edges belong to the upper band. The base `p` is `λ̃^κ` in
//! [`ExponentMode::Power`] and `x` itself in [`ExponentMode::BoxCox`].

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::boxcox::BoxCoxResult;
use super::SpectralDecomposition;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ExponentMode {
    /// `p = λ̃^κ` (at `κ = 0` this is 1).
    #[default]
    Power,
    /// `p = (λ̃^κ − 1)/κ`, the transformed value.
    BoxCox,
}

/// How the inverse-scale response `g_{−t}` is formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum InverseMode {
    /// `g_{−t} = 1 / g_t`, so `Ψ_t Ψ_{−t}` is the projector onto the retained
    /// eigenspace.
    #[default]
    Reciprocal,
    /// `t` replaced by `−t` inside the band multipliers.
    NegatedScale,
}

impl ExponentMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Power => "power",
            Self::BoxCox => "boxcox",
        }
    }
}

impl std::str::FromStr for ExponentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power" => Ok(Self::Power),
            "boxcox" => Ok(Self::BoxCox),
            _ => Err(Error::Config(format!("exponent mode must be `power` or `boxcox`, got {s:?}"))),
        }
    }
}

impl InverseMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Reciprocal => "reciprocal",
            Self::NegatedScale => "negated",
        }
    }
}

impl std::str::FromStr for InverseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reciprocal" => Ok(Self::Reciprocal),
            "negated" => Ok(Self::NegatedScale),
            _ => Err(Error::Config(format!(
                "inverse mode must be `reciprocal` or `negated`, got {s:?}"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Band {
    BelowMean,
    WithinOne,
    WithinTwo,
    Beyond,
}

pub fn band<T: Scalar>(bc: &BoxCoxResult<T>, transformed: T) -> Band {
    if transformed < bc.mean {
        Band::BelowMean
    } else if transformed < bc.mean + bc.std {
        Band::WithinOne
    } else if transformed < bc.mean + bc.std + bc.std {
        Band::WithinTwo
    } else {
        Band::Beyond
    }
}

/// Band multiplier `m` for scale `t` (any sign).
pub fn multiplier<T: Scalar>(bc: &BoxCoxResult<T>, transformed: T, t: T) -> T {
    let r = t / bc.sum;
    let one = T::one();
    match band(bc, transformed) {
        Band::BelowMean => one + T::of(2.0) * r,
        Band::WithinOne => one + T::of(3.0) * r + bc.std,
        Band::WithinTwo => one + T::of(4.0) * r + bc.std,
        Band::Beyond => one + T::of(5.0) * r + bc.std,
    }
}

pub fn exponent_base<T: Scalar>(bc: &BoxCoxResult<T>, shifted: T, transformed: T, mode: ExponentMode) -> T {
    match mode {
        ExponentMode::Power if bc.kappa == T::zero() => T::one(),
        ExponentMode::Power => shifted.powf(bc.kappa),
        ExponentMode::BoxCox => transformed,
    }
}

/// `g_t` at one frequency.
pub fn transfer<T: Scalar>(bc: &BoxCoxResult<T>, shifted: T, transformed: T, t: T, mode: ExponentMode) -> T {
    (-(exponent_base(bc, shifted, transformed, mode) * multiplier(bc, transformed, t))).exp()
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FilterOptions {
    pub exponent_mode: ExponentMode,
    pub inverse_mode: InverseMode,
}

/// Diagonal responses `G_t` and `G_{−t}` over the retained frequencies.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptiveFilter<T> {
    pub t: T,
    pub response: Vec<T>,
    pub inverse_response: Vec<T>,
    pub options: FilterOptions,
}

impl<T: Scalar> AdaptiveFilter<T> {
    pub fn new(decomp: &SpectralDecomposition<T>, bc: &BoxCoxResult<T>, t: T, options: FilterOptions) -> Result<Self> {
        if !(t >= T::zero()) || !t.is_finite() {
            return Err(Error::Config(format!("wavelet scale t must be finite and >= 0, got {t}")));
        }
        if bc.transformed.len() != decomp.q() {
            return Err(Error::Shape(format!(
                "{} transformed values for {} eigenpairs",
                bc.transformed.len(),
                decomp.q()
            )));
        }
        if !(bc.sum > T::zero()) {
            return Err(Error::DegenerateSpectrum(format!(
                "sum of transformed eigenvalues is {}; the filter needs it positive",
                bc.sum
            )));
        }
        let mode = options.exponent_mode;
        let mut response = Vec::with_capacity(decomp.q());
        let mut inverse_response = Vec::with_capacity(decomp.q());
        for (&shifted, &x) in decomp.shifted.iter().zip(&bc.transformed) {
            let g = transfer(bc, shifted, x, t, mode);
            response.push(g);
            inverse_response.push(match options.inverse_mode {
                InverseMode::Reciprocal => (exponent_base(bc, shifted, x, mode) * multiplier(bc, x, t)).exp(),
                InverseMode::NegatedScale => transfer(bc, shifted, x, -t, mode),
            });
        }
        if response.iter().chain(&inverse_response).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("filter response".into()));
        }
        Ok(Self {
            t,
            response,
            inverse_response,
            options,
        })
    }

    pub fn q(&self) -> usize {
        self.response.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bc(mean: f64, std: f64, sum: f64, kappa: f64) -> BoxCoxResult<f64> {
        BoxCoxResult {
            kappa,
            transformed: vec![],
            mean,
            std,
            sum,
            degenerate: false,
        }
    }

    #[test]
    fn substitution_examples() {
        let b = bc(2.0, 0.5, 4.0, 1.0);
        // λ̃ = 1 so λ̃^κ = 1 and the transformed value 0 lies below the mean
        let g0 = transfer(&b, 1.0, 0.0, 0.0, ExponentMode::Power);
        assert!((g0 - (-1f64).exp()).abs() < 1e-15);
        let g = transfer(&b, 1.0, 0.0, b.sum / 2.0, ExponentMode::Power);
        assert!((g - (-2f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn band_edges_go_up() {
        let b = bc(1.0, 0.5, 3.0, 1.0);
        assert_eq!(band(&b, 0.999), Band::BelowMean);
        assert_eq!(band(&b, 1.0), Band::WithinOne);
        assert_eq!(band(&b, 1.5), Band::WithinTwo);
        assert_eq!(band(&b, 2.0), Band::Beyond);
        let flat = bc(1.0, 0.0, 3.0, 1.0);
        assert_eq!(band(&flat, 1.0), Band::Beyond);
    }

    #[test]
    fn multipliers_strictly_increase_across_bands() {
        let b = bc(1.0, 0.5, 3.0, 1.0);
        let t = 0.7;
        let ms: Vec<f64> = [0.5, 1.2, 1.7, 2.5].iter().map(|&x| multiplier(&b, x, t)).collect();
        assert!(ms.windows(2).all(|w| w[0] < w[1]), "{ms:?}");
        // equal exponent base, so g strictly decreases band to band
        let gs: Vec<f64> = ms.iter().map(|m| (-1.3 * m).exp()).collect();
        assert!(gs.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn zero_kappa_uses_unit_base() {
        let b = bc(0.5, 0.2, 2.0, 0.0);
        assert_eq!(exponent_base(&b, 2.7, 0.99, ExponentMode::Power), 1.0);
        assert_eq!(exponent_base(&b, 2.7, 0.99, ExponentMode::BoxCox), 0.99);
    }
}
