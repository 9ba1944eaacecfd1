use serde::{Deserialize, Serialize};

use super::BasisError;

/// The supported radial basis families.
///
/// `Wendland` is the compactly supported polynomial
/// `(1-r)₊⁶ (35r² + 18r + 3) / 3` evaluated at `r = ‖z-ξ‖ / support`; it is
/// identically zero for `r ≥ 1` and continuously differentiable at both the
/// origin and the cutoff. `Gaussian` is `exp(-‖z-ξ‖² / (2 l²))` with global
/// support, separable across dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum BasisFamily {
    Wendland { support: f64 },
    Gaussian { length_scale: f64 },
}

impl BasisFamily {
    pub fn is_compact(&self) -> bool {
        matches!(self, BasisFamily::Wendland { .. })
    }

    /// Basis value at point `z` for a center `c`, both of dimension P.
    pub(crate) fn value_at(&self, z: &[f64], c: &[f64]) -> f64 {
        match *self {
            BasisFamily::Wendland { support } => {
                let r = sq_dist(z, c).sqrt() / support;
                wendland_unchecked(r)
            }
            BasisFamily::Gaussian { length_scale } => {
                (-sq_dist(z, c) / (2.0 * length_scale * length_scale)).exp()
            }
        }
    }

    /// Gradient of the basis value with respect to `z`, written into `out`.
    ///
    /// For the Wendland family the gradient at `z = c` is the zero vector;
    /// the radial derivative vanishes at the origin so the limit is
    /// well-defined even though `‖z-c‖` itself is not smooth there.
    pub(crate) fn gradient_at(&self, z: &[f64], c: &[f64], out: &mut [f64]) {
        match *self {
            BasisFamily::Wendland { support } => {
                let d = sq_dist(z, c).sqrt();
                let r = d / support;
                if d == 0.0 || r >= 1.0 {
                    out.fill(0.0);
                    return;
                }
                // dβ/dz = w'(r) * (z-c) / (support * ‖z-c‖)
                let scale = wendland_derivative_unchecked(r) / (support * d);
                for ((o, zi), ci) in out.iter_mut().zip(z).zip(c) {
                    *o = scale * (zi - ci);
                }
            }
            BasisFamily::Gaussian { length_scale } => {
                let v = self.value_at(z, c);
                let inv = 1.0 / (length_scale * length_scale);
                for ((o, zi), ci) in out.iter_mut().zip(z).zip(c) {
                    *o = -v * inv * (zi - ci);
                }
            }
        }
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

#[inline]
pub(crate) fn wendland_unchecked(r: f64) -> f64 {
    if r >= 1.0 {
        return 0.0;
    }
    let t = 1.0 - r;
    let t2 = t * t;
    let t6 = t2 * t2 * t2;
    t6 * (35.0 * r * r + 18.0 * r + 3.0) / 3.0
}

#[inline]
pub(crate) fn wendland_derivative_unchecked(r: f64) -> f64 {
    if r >= 1.0 {
        return 0.0;
    }
    let t = 1.0 - r;
    let t2 = t * t;
    let t5 = t2 * t2 * t;
    -56.0 * r * (5.0 * r + 1.0) * t5 / 3.0
}

/// Wendland basis value at an already scaled radius `r = ‖z-ξ‖/α`.
///
/// Returns `(1-r)₊⁶ (35r² + 18r + 3) / 3`, which lies in `[0, 1]` and is
/// exactly zero for `r ≥ 1`.
pub fn wendland_value(r_scaled: f64) -> Result<f64, BasisError> {
    if r_scaled < 0.0 || r_scaled.is_nan() {
        return Err(BasisError::NegativeRadius(r_scaled));
    }
    Ok(wendland_unchecked(r_scaled))
}

/// Derivative of [`wendland_value`] with respect to the scaled radius.
///
/// Equal to `-56 r (5r + 1) (1-r)⁵ / 3` on `[0, 1)` and zero outside the
/// support; continuous at both `r = 0` and `r = 1`.
pub fn wendland_derivative(r_scaled: f64) -> Result<f64, BasisError> {
    if r_scaled < 0.0 || r_scaled.is_nan() {
        return Err(BasisError::NegativeRadius(r_scaled));
    }
    Ok(wendland_derivative_unchecked(r_scaled))
}

/// Gaussian basis value `exp(-‖x-center‖² / (2 l²))`.
pub fn gaussian_value(x: &[f64], center: &[f64], length_scale: f64) -> Result<f64, BasisError> {
    if x.len() != center.len() {
        return Err(BasisError::DimensionMismatch {
            expected: x.len(),
            got: center.len(),
        });
    }
    Ok((-sq_dist(x, center) / (2.0 * length_scale * length_scale)).exp())
}
