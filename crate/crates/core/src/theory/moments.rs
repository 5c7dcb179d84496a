//! Gaussian expectations of the attractor nonlinearities.
//!
//! Each weight entry is modeled as `w ~ N(w_o - m, s^2)` where `m` is the
//! mean of the weight error and `s^2` its variance. With `x = w_o - m`,
//!
//! ```text
//! E[sign w] = erf(x / sqrt(2 s^2))
//! E|w|      = x erf(x / sqrt(2 s^2)) + sqrt(2/pi) s exp(-x^2 / (2 s^2))
//! ```
//!
//! and both collapse to `sign(x)` and `|x|` when `s = 0`.

use libm::erf;

use crate::algorithms::{sign, Attractor};

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

/// `E[sign(w)]` for `w ~ N(true_coef - mean_err, variance)`.
pub fn expected_sign(true_coef: f64, mean_err: f64, variance: f64) -> f64 {
    let x = true_coef - mean_err;
    let variance = variance.max(0.0);
    if variance == 0.0 {
        return sign(x);
    }
    erf(x / (2.0 * variance).sqrt())
}

/// `E|w|` (folded normal mean) for `w ~ N(true_coef - mean_err, variance)`.
pub fn expected_abs(true_coef: f64, mean_err: f64, variance: f64) -> f64 {
    let x = true_coef - mean_err;
    let variance = variance.max(0.0);
    if variance == 0.0 {
        return x.abs();
    }
    let s = variance.sqrt();
    x * erf(x / (2.0 * variance).sqrt()) + SQRT_2_OVER_PI * s * (-x * x / (2.0 * variance)).exp()
}

/// Per-coefficient expectations needed by the moment recursions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttractorMoments {
    /// `E[w]`
    pub mean_weight: f64,
    /// `E[g(w)]`
    pub g: f64,
    /// `E[g(w)^2]`
    pub g_squared: f64,
    /// `E[w g(w)]`
    pub w_times_g: f64,
}

/// Expectations of `g(w)` for one coefficient.
///
/// The reweighted attractor uses the slow-fluctuation approximation: the
/// random denominator `1 + eps |w|` is replaced by `1 + eps E|w|`.
/// `E[sign(w)^2]` is one whenever `w` has nonzero variance and `sign(E w)^2`
/// when it is deterministic.
pub fn attractor_moments(kind: Attractor, eps: f64, true_coef: f64, mean_err: f64, variance: f64) -> AttractorMoments {
    let mean_weight = true_coef - mean_err;
    let sign_squared = if variance > 0.0 { 1.0 } else { sign(mean_weight).powi(2) };
    match kind {
        Attractor::None => AttractorMoments {
            mean_weight,
            g: 0.0,
            g_squared: 0.0,
            w_times_g: 0.0,
        },
        Attractor::Za => AttractorMoments {
            mean_weight,
            g: expected_sign(true_coef, mean_err, variance),
            g_squared: sign_squared,
            w_times_g: expected_abs(true_coef, mean_err, variance),
        },
        Attractor::Rza => {
            let abs = expected_abs(true_coef, mean_err, variance);
            let denom = 1.0 + eps * abs;
            AttractorMoments {
                mean_weight,
                g: expected_sign(true_coef, mean_err, variance) / denom,
                g_squared: sign_squared / (denom * denom),
                w_times_g: abs / denom,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_and_symmetric_cases() {
        assert_eq!(expected_sign(0.7, 0.7, 1.0), 0.0);
        assert_eq!(expected_sign(0.3, 0.0, 0.0), 1.0);
        assert_eq!(expected_sign(0.0, 0.0, 0.0), 0.0);
        assert!((expected_abs(0.0, 0.0, 1.0) - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert_eq!(expected_abs(0.0, 0.4, 0.0), 0.4);
    }

    #[test]
    fn continuous_at_zero_variance() {
        for x in [-2.0, -0.3, 0.05, 1.0] {
            assert!((expected_sign(x, 0.0, 1e-14) - expected_sign(x, 0.0, 0.0)).abs() < 1e-12);
            assert!((expected_abs(x, 0.0, 1e-14) - expected_abs(x, 0.0, 0.0)).abs() < 1e-6);
        }
    }

    #[test]
    fn rza_limits() {
        // sigma -> 0 with w = 1: 1 / (1 + 1)
        let m = attractor_moments(Attractor::Rza, 1.0, 1.0, 0.0, 0.0);
        assert_eq!(m.g, 0.5);
        assert_eq!(m.g_squared, 0.25);
        assert_eq!(m.w_times_g, 0.5);
        let za = attractor_moments(Attractor::Za, 0.0, 0.2, -0.1, 0.3);
        let rza = attractor_moments(Attractor::Rza, 0.0, 0.2, -0.1, 0.3);
        assert_eq!(za, rza);
    }
}
