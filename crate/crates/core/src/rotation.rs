//! Rotation of degree-2 coefficient vectors.
//!
//! A rotation `R` acts on a represented function by `g(R w) = f(w)`; in
//! coefficient space this is a 9x9 orthogonal, degree-block-diagonal
//! matrix. General rotations are assembled from five sparse factors
//!
//! ```text
//! M(alpha, beta, gamma) = Z(gamma) * Xm * Z(beta) * Xp * Z(alpha)
//! ```
//!
//! where `Z` is the closed-form rotation about +z and `Xp`/`Xm` are the
//! constant +-90 degree rotations about +x. The corresponding 3x3 rotation
//! is `Rz(gamma) * Ry(beta) * Rz(alpha)` acting on column vectors; the
//! equivalence is pinned by the pointwise tests below, not by convention.

use crate::error::{Error, Result};
use crate::geom::Mat3;
use crate::sh::{Direction, Sh9, COEFF_COUNT};

const SQRT3_OVER_2: f64 = 0.866_025_403_784_438_6;

/// Applies the sparse z-rotation by `alpha` to a coefficient vector.
/// Degree blocks mix only within themselves: slots (1,3) and (5,7) rotate
/// by `alpha`, (4,8) by `2 alpha`; slots 0, 2, 6 are fixed.
pub(crate) fn apply_z(alpha: f64, c: &[f64; COEFF_COUNT]) -> [f64; COEFF_COUNT] {
    let (s, co) = alpha.sin_cos();
    let (s2, c2) = (2.0 * alpha).sin_cos();
    [
        c[0],
        co * c[1] + s * c[3],
        c[2],
        -s * c[1] + co * c[3],
        c2 * c[4] + s2 * c[8],
        co * c[5] + s * c[7],
        c[6],
        -s * c[5] + co * c[7],
        -s2 * c[4] + c2 * c[8],
    ]
}

/// Derivative of [`apply_z`] with respect to `alpha`; used by the analytic
/// shading gradients.
pub(crate) fn apply_z_derivative(alpha: f64, c: &[f64; COEFF_COUNT]) -> [f64; COEFF_COUNT] {
    let (s, co) = alpha.sin_cos();
    let (s2, c2) = (2.0 * alpha).sin_cos();
    [
        0.0,
        -s * c[1] + co * c[3],
        0.0,
        -co * c[1] - s * c[3],
        2.0 * (-s2 * c[4] + c2 * c[8]),
        -s * c[5] + co * c[7],
        0.0,
        -co * c[5] - s * c[7],
        2.0 * (-c2 * c[4] - s2 * c[8]),
    ]
}

/// Constant rotation by +90 degrees about +x.
pub(crate) fn apply_x_plus(c: &[f64; COEFF_COUNT]) -> [f64; COEFF_COUNT] {
    [
        c[0],
        -c[2],
        c[1],
        c[3],
        -c[7],
        -c[5],
        -0.5 * c[6] - SQRT3_OVER_2 * c[8],
        c[4],
        -SQRT3_OVER_2 * c[6] + 0.5 * c[8],
    ]
}

/// Constant rotation by -90 degrees about +x (transpose of [`apply_x_plus`]).
pub(crate) fn apply_x_minus(c: &[f64; COEFF_COUNT]) -> [f64; COEFF_COUNT] {
    [
        c[0],
        c[2],
        -c[1],
        c[3],
        c[7],
        -c[5],
        -0.5 * c[6] - SQRT3_OVER_2 * c[8],
        -c[4],
        -SQRT3_OVER_2 * c[6] + 0.5 * c[8],
    ]
}

/// A 9x9 coefficient-space rotation matrix, row-major: applying it
/// computes `out[i] = sum_j m[i][j] c[j]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShRotation {
    m: [[f64; COEFF_COUNT]; COEFF_COUNT],
}

impl ShRotation {
    pub fn identity() -> ShRotation {
        let mut m = [[0.0; COEFF_COUNT]; COEFF_COUNT];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        ShRotation { m }
    }

    /// Builds the matrix whose action on any vector equals `f`, by
    /// applying `f` to each standard basis vector.
    fn from_apply(f: impl Fn(&[f64; COEFF_COUNT]) -> [f64; COEFF_COUNT]) -> ShRotation {
        let mut m = [[0.0; COEFF_COUNT]; COEFF_COUNT];
        for j in 0..COEFF_COUNT {
            let mut e = [0.0; COEFF_COUNT];
            e[j] = 1.0;
            let col = f(&e);
            for (i, row) in m.iter_mut().enumerate() {
                row[j] = col[i];
            }
        }
        ShRotation { m }
    }

    pub fn entry(&self, row: usize, col: usize) -> Result<f64> {
        if row >= COEFF_COUNT || col >= COEFF_COUNT {
            return Err(Error::Argument(format!(
                "rotation entry ({row}, {col}) out of range 0..{COEFF_COUNT}"
            )));
        }
        Ok(self.m[row][col])
    }

    pub fn apply(&self, c: &Sh9) -> Sh9 {
        let mut out = [0.0; COEFF_COUNT];
        for (slot, row) in out.iter_mut().zip(&self.m) {
            *slot = row.iter().zip(&c.0).map(|(a, b)| a * b).sum();
        }
        Sh9(out)
    }

    /// Matrix product `self * rhs` (apply `rhs` first).
    pub fn compose(&self, rhs: &ShRotation) -> ShRotation {
        let mut m = [[0.0; COEFF_COUNT]; COEFF_COUNT];
        for (out_row, lhs_row) in m.iter_mut().zip(&self.m) {
            for (&a, rhs_row) in lhs_row.iter().zip(&rhs.m) {
                if a == 0.0 {
                    continue;
                }
                for (dst, &b) in out_row.iter_mut().zip(rhs_row) {
                    *dst += a * b;
                }
            }
        }
        ShRotation { m }
    }

    /// Transpose; for a rotation this is the inverse.
    pub fn transposed(&self) -> ShRotation {
        let mut m = [[0.0; COEFF_COUNT]; COEFF_COUNT];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, value) in row.iter_mut().enumerate() {
                *value = self.m[j][i];
            }
        }
        ShRotation { m }
    }
}

fn require_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!("{name} angle must be finite, got {value}")))
    }
}

/// Coefficient-space rotation about +z by `alpha` radians.
pub fn z_rotation(alpha: f64) -> Result<ShRotation> {
    require_finite("z-rotation", alpha)?;
    Ok(ShRotation::from_apply(|c| apply_z(alpha, c)))
}

/// Coefficient-space rotation by +90 degrees about +x.
pub fn x_plus_90() -> ShRotation {
    ShRotation::from_apply(apply_x_plus)
}

/// Coefficient-space rotation by -90 degrees about +x.
pub fn x_minus_90() -> ShRotation {
    ShRotation::from_apply(apply_x_minus)
}

/// General rotation from ZYZ Euler angles; equivalent to the 3x3 rotation
/// `Rz(gamma) * Ry(beta) * Rz(alpha)`.
pub fn zyz_rotation(alpha: f64, beta: f64, gamma: f64) -> Result<ShRotation> {
    require_finite("alpha", alpha)?;
    require_finite("beta", beta)?;
    require_finite("gamma", gamma)?;
    if beta == 0.0 {
        // Pure azimuth: skip the x-conjugation so the result is exact
        // (in particular, all-zero angles give the bitwise identity).
        return Ok(ShRotation::from_apply(|c| apply_z(alpha + gamma, c)));
    }
    Ok(ShRotation::from_apply(|c| {
        apply_z(gamma, &apply_x_minus(&apply_z(beta, &apply_x_plus(&apply_z(alpha, c)))))
    }))
}

/// Rotates a coefficient vector. Thin wrapper over [`ShRotation::apply`]
/// for symmetry with the constructors above.
pub fn rotate_coeffs(rotation: &ShRotation, c: &Sh9) -> Sh9 {
    rotation.apply(c)
}

/// Polar/azimuth angles `(beta, azimuth)` of the rotation that carries +z
/// onto `n`: `R = Rz(azimuth) * Ry(beta)`. Exactly at the poles `atan2`
/// yields azimuth 0, and the azimuth's influence on any rotated vector
/// shrinks like `beta`, so the pair is stable everywhere — snapping the
/// azimuth near the poles would instead create a small discontinuity that
/// breaks finite-difference checks of the shading gradients.
pub(crate) fn align_z_angles(n: Direction) -> (f64, f64) {
    let beta = n.z().clamp(-1.0, 1.0).acos();
    (beta, n.y().atan2(n.x()))
}

/// Rotates an axially symmetric (zonal) coefficient vector so its symmetry
/// axis moves from +z to `n`. Works for any coefficient vector, but the
/// result is independent of the free azimuthal angle only when the input is
/// zonal (slots 0, 2, 6).
pub fn rotate_to_normal(zonal: &Sh9, n: Direction) -> Sh9 {
    let (beta, azimuth) = align_z_angles(n);
    // Z(alpha = 0) is the identity, so the five-factor chain shortens to
    // four sparse applications; no 9x9 matrix is built.
    let t = apply_x_plus(&zonal.0);
    let t = apply_z(beta, &t);
    let t = apply_x_minus(&t);
    Sh9(apply_z(azimuth, &t))
}

/// Extracts ZYZ angles from a 3x3 rotation matrix such that
/// `Rz(gamma) * Ry(beta) * Rz(alpha)` reproduces it. Near the gimbal poles
/// `alpha` is fixed to 0.
pub fn zyz_angles(r: &Mat3) -> (f64, f64, f64) {
    let m = &r.0;
    let beta = m[2][2].clamp(-1.0, 1.0).acos();
    let sin_beta = (1.0 - m[2][2] * m[2][2]).max(0.0).sqrt();
    if sin_beta > 1e-9 {
        let gamma = m[1][2].atan2(m[0][2]);
        let alpha = m[2][1].atan2(-m[2][0]);
        (alpha, beta, gamma)
    } else if m[2][2] > 0.0 {
        // beta ~ 0: R = Rz(gamma + alpha).
        (0.0, beta, m[1][0].atan2(m[0][0]))
    } else {
        // beta ~ pi: R = Rz(gamma) * diag(-1, 1, -1) * Rz(alpha).
        (0.0, beta, (-m[0][1]).atan2(m[1][1]))
    }
}
