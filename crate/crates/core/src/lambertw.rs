//! Principal branch of the Lambert W function on the nonnegative reals.
//!
//! Only `W₀(z)` for `z ≥ 0` is provided; that is the only part of the domain
//! the power allocation ever evaluates.

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambertResult {
    pub w: f64,
    /// `|w·eʷ − z|` at the returned `w`.
    pub residual: f64,
    pub iterations: usize,
}

/// Solve `w·eʷ = z` for `w ≥ 0` by Halley iteration started at `ln(1 + z)`.
///
/// The starting point always lies at or above the root for `z ≥ 0`, and
/// Halley's step is monotone from there, so the iteration cannot run off.
pub fn lambert_w0(z: f64) -> Result<LambertResult> {
    if z.is_nan() || z < 0.0 {
        return Err(Error::invalid("z", format!("lambert_w0 needs z >= 0, got {z}")));
    }
    if z.is_infinite() {
        return Err(Error::invalid("z", "lambert_w0 needs a finite argument"));
    }
    if z == 0.0 {
        return Ok(LambertResult {
            w: 0.0,
            residual: 0.0,
            iterations: 0,
        });
    }

    let tolerance = 1e-12 * z.max(1.0);
    let mut w = z.ln_1p();
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let ew = w.exp();
        let f = w * ew - z;
        let wp1 = w + 1.0;
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        let next = w - step;
        let done = step.abs() <= 4.0 * f64::EPSILON * next.abs().max(f64::MIN_POSITIVE);
        w = next;
        if done {
            break;
        }
    }

    let residual = (w * w.exp() - z).abs();
    if !(residual <= tolerance) {
        return Err(Error::LambertNoConvergence {
            z,
            iterations,
            residual,
        });
    }
    Ok(LambertResult {
        w,
        residual,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    /// Independent oracle: bisection on `w·eʷ − z` over `[0, max(1, ln(1+z)) + 1]`.
    fn bisect_w0(z: f64) -> f64 {
        let mut lo = 0.0_f64;
        let mut hi = z.ln_1p().max(1.0) + 1.0;
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid * mid.exp() > z {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn zero_maps_to_zero() {
        let r = lambert_w0(0.0).unwrap();
        assert_eq!(r.w, 0.0);
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn e_maps_to_one() {
        assert!((lambert_w0(E).unwrap().w - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn omega_constant() {
        // Frozen from bisect_w0(1.0).
        let omega = 0.567_143_290_409_783_8;
        assert!((bisect_w0(1.0) - omega).abs() < 1e-12);
        assert!((lambert_w0(1.0).unwrap().w - omega).abs() < 1e-12);
    }

    #[test]
    fn large_argument_residual() {
        let r = lambert_w0(1e6).unwrap();
        assert!(r.residual <= 1e-6, "residual {}", r.residual);
        assert!(r.iterations <= MAX_ITERATIONS);
    }

    #[test]
    fn rejects_negative_and_nan() {
        assert!(lambert_w0(-1e-3).is_err());
        assert!(lambert_w0(f64::NAN).is_err());
        assert!(lambert_w0(f64::INFINITY).is_err());
    }

    #[test]
    fn matches_bisection_on_small_domain() {
        for i in 0..=2000 {
            let z = 100.0 * i as f64 / 2000.0;
            let w = lambert_w0(z).unwrap().w;
            let oracle = bisect_w0(z);
            assert!((w - oracle).abs() <= 1e-10, "z={z} w={w} oracle={oracle}");
        }
    }

    #[test]
    fn tiny_arguments() {
        for z in [1e-300, 1e-200, 1e-30, 1e-12, 1e-6] {
            let r = lambert_w0(z).unwrap();
            assert!(r.w > 0.0);
            assert!(r.residual <= 1e-12 * z.max(1.0));
            assert!((r.w - z).abs() <= 2.0 * z * z);
        }
    }

    #[test]
    fn log_spaced_residual_and_monotone() {
        let mut prev = 0.0;
        for i in 0..10_000 {
            let z = 10f64.powf(-12.0 + 21.0 * i as f64 / 9_999.0);
            let r = lambert_w0(z).unwrap();
            assert!(r.residual <= 1e-9 * z.max(1.0));
            assert!(r.w > prev);
            prev = r.w;
        }
    }
}
