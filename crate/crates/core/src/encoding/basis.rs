//! Uniform B-spline bases B⁰, B¹, B² centred at the origin with unit knot spacing.

use crate::error::{Error, Result};

/// Highest supported polynomial degree.
pub const MAX_DEGREE: usize = 2;

/// Half-width of the support of `B^degree`.
pub fn support_radius(degree: usize) -> f64 {
    (degree as f64 + 1.0) * 0.5
}

/// Value and first derivative of `B^degree` at `t`.
///
/// `B⁰` has derivative zero everywhere. At the kinks of `B¹` (t ∈ {-1, 0, 1})
/// the derivative is the left limit.
pub fn bspline_basis(t: f64, degree: usize) -> Result<(f64, f64)> {
    if degree > MAX_DEGREE {
        return Err(Error::invalid(format!(
            "B-spline degree {degree} not supported (expected 0, 1 or 2)"
        )));
    }
    let (v, d, _) = basis_with_second(t, degree);
    Ok((v, d))
}

/// Value, first and second derivative. `degree` must already be validated.
#[inline]
pub(crate) fn basis_with_second(t: f64, degree: usize) -> (f64, f64, f64) {
    match degree {
        0 => {
            if t.abs() < 0.5 {
                (1.0, 0.0, 0.0)
            } else {
                (0.0, 0.0, 0.0)
            }
        }
        1 => {
            // Left-limit convention: intervals are (-1, 0] and (0, 1].
            if t > -1.0 && t <= 0.0 {
                (1.0 + t, 1.0, 0.0)
            } else if t > 0.0 && t <= 1.0 {
                (1.0 - t, -1.0, 0.0)
            } else {
                (0.0, 0.0, 0.0)
            }
        }
        2 => {
            let a = t.abs();
            if a <= 0.5 {
                (0.75 - t * t, -2.0 * t, -2.0)
            } else if a < 1.5 {
                let r = 1.5 - a;
                (0.5 * r * r, -r * t.signum(), 1.0)
            } else {
                (0.0, 0.0, 0.0)
            }
        }
        _ => unreachable!("degree validated at construction"),
    }
}
