//! Illumination recovery and conditioning.
//!
//! Shading, for this module, means the cosine-convolved light
//! `S(n) = ∫ L(ω) max(ω·n, 0) dω` as a function of the surface normal —
//! no albedo and no 1/π. Convolving with the zonal clamped cosine scales
//! each band by a constant ([`cosine_transfer`]), so shading lives in the
//! same nine-coefficient basis as the light itself.
//!
//! [`recover_illumination`] inverts the convolution by matching `S(n)`
//! against candidate lighting at thousands of sampled normals and solving
//! the resulting least-squares system through its 9×9 normal equations.
//! Band-limited shading always makes that system consistent, so the
//! reported residual is a health check on the solve rather than a model
//! misfit: anything above roundoff noise signals trouble.
//!
//! The remaining operations condition a recovered light before use:
//! pointwise non-negativity clamping, intensity normalization against a
//! rendered scene, and rigid rotation for augmentation.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::products::TriplingTensor;
use crate::render::{cosine_lobe, render_pixel, IlluminationRgb, IntrinsicsMap};
use crate::rotation::zyz_rotation;
use crate::sh::{basis, QuadratureSet, Sh9, COEFF_COUNT};

/// Direction count used by [`recover_illumination`] when callers have no
/// reason to choose: dense enough that the sampled normal equations match
/// the continuous ones to ~1e-7.
pub const DEFAULT_RECOVERY_SAMPLES: usize = 64_000;

/// Pivot threshold relative to the largest normal-equation entry; below
/// it the system is reported as rank-deficient.
const PIVOT_TOLERANCE: f64 = 1e-10;

/// Range of sensible [`scale_intensity`] targets for normalized datasets.
const INTENSITY_TARGET_RANGE: std::ops::RangeInclusive<f64> = 0.8..=1.0;

/// Per-coefficient gain of the clamped-cosine convolution: shading
/// coefficient `i` is `cosine_transfer()[i]` times light coefficient `i`.
/// The three bands are scaled by π, 2π/3 and π/4.
pub fn cosine_transfer() -> [f64; COEFF_COUNT] {
    // A zonal kernel with band coefficients z_l convolves an SH function
    // by scaling band l with sqrt(4π / (2l+1)) · z_l.
    let lobe = cosine_lobe();
    let band = [
        (4.0 * PI).sqrt() * lobe[0],
        (4.0 * PI / 3.0).sqrt() * lobe[2],
        (4.0 * PI / 5.0).sqrt() * lobe[6],
    ];
    std::array::from_fn(|i| match i {
        0 => band[0],
        1..=3 => band[1],
        _ => band[2],
    })
}

/// Applies the clamped-cosine convolution to a light, producing the
/// coefficients of the shading function over normals.
pub fn forward_shading(light: &Sh9) -> Sh9 {
    let transfer = cosine_transfer();
    Sh9(std::array::from_fn(|i| transfer[i] * light[i]))
}

/// Output of [`recover_illumination`].
#[derive(Clone, Copy, Debug)]
pub struct Recovery {
    /// Least-squares estimate of the incident light.
    pub light: Sh9,
    /// Root-mean-square misfit of the sampled equations at the solution.
    pub rms_residual: f64,
}

/// Recovers the incident light whose cosine-convolved shading best matches
/// `shading` over `sample_count` lattice normals, in the least-squares
/// sense.
///
/// Needs at least [`COEFF_COUNT`] directions; use
/// [`DEFAULT_RECOVERY_SAMPLES`] unless the call is in a hot loop.
pub fn recover_illumination(shading: &Sh9, sample_count: usize) -> Result<Recovery> {
    if !shading.is_finite() {
        return Err(Error::Argument("shading coefficients must be finite".into()));
    }
    if sample_count < COEFF_COUNT {
        return Err(Error::Argument(format!(
            "recovery needs at least {COEFF_COUNT} directions, got {sample_count}"
        )));
    }
    let quad = QuadratureSet::fibonacci(sample_count)?;
    let transfer = cosine_transfer();

    // Normal equations of the row-per-normal system A·x = b with
    // A[r][j] = transfer[j]·Y_j(n_r) and b[r] = S(n_r).
    let mut gram = [[0.0; COEFF_COUNT]; COEFF_COUNT];
    let mut rhs = [0.0; COEFF_COUNT];
    for &dir in quad.directions() {
        let y = basis(dir);
        let row: [f64; COEFF_COUNT] = std::array::from_fn(|j| transfer[j] * y[j]);
        let b: f64 = y.iter().zip(&shading.0).map(|(yi, si)| yi * si).sum();
        for (gram_row, &ri) in gram.iter_mut().zip(&row) {
            for (cell, &rj) in gram_row.iter_mut().zip(&row) {
                *cell += ri * rj;
            }
        }
        for (h, &ri) in rhs.iter_mut().zip(&row) {
            *h += ri * b;
        }
    }
    let light = Sh9(solve_normal_equations(&gram, &rhs)?);

    // Second pass for the residual, evaluated equation by equation rather
    // than via ‖b‖² − xᵀAᵀb, which cancels catastrophically near zero.
    // Each equation's misfit is y · (transfer∘light − shading).
    let defect: [f64; COEFF_COUNT] = std::array::from_fn(|j| transfer[j] * light[j] - shading[j]);
    let mut sum_sq = 0.0;
    for &dir in quad.directions() {
        let y = basis(dir);
        let misfit: f64 = y.iter().zip(&defect).map(|(yi, di)| yi * di).sum();
        sum_sq += misfit * misfit;
    }
    let rms_residual = (sum_sq / quad.len() as f64).sqrt();
    Ok(Recovery { light, rms_residual })
}

/// Solves the 9×9 system `gram · x = rhs` by LU with partial pivoting.
fn solve_normal_equations(
    gram: &[[f64; COEFF_COUNT]; COEFF_COUNT],
    rhs: &[f64; COEFF_COUNT],
) -> Result<[f64; COEFF_COUNT]> {
    let scale = gram.iter().flatten().fold(0.0_f64, |acc, &v| acc.max(v.abs()));
    if !scale.is_finite() || scale == 0.0 {
        return Err(Error::Numerical("normal equations are zero or non-finite".into()));
    }
    let mut a = *gram;
    let mut x = *rhs;
    for col in 0..COEFF_COUNT {
        let pivot_row = (col..COEFF_COUNT)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .expect("non-empty pivot range");
        let pivot = a[pivot_row][col];
        if pivot.abs() < PIVOT_TOLERANCE * scale {
            return Err(Error::Numerical(format!(
                "rank-deficient normal equations: pivot {:.3e} in column {col} \
                 against matrix scale {:.3e}; the sampled directions do not \
                 span the nine-coefficient basis",
                pivot.abs(),
                scale,
            )));
        }
        a.swap(col, pivot_row);
        x.swap(col, pivot_row);
        let pivot_values = a[col];
        for row in (col + 1)..COEFF_COUNT {
            let factor = a[row][col] / pivot;
            if factor == 0.0 {
                continue;
            }
            a[row][col] = 0.0;
            for (dst, &src) in a[row][col + 1..].iter_mut().zip(&pivot_values[col + 1..]) {
                *dst -= factor * src;
            }
            x[row] -= factor * x[col];
        }
    }
    for col in (0..COEFF_COUNT).rev() {
        for k in (col + 1)..COEFF_COUNT {
            x[col] -= a[col][k] * x[k];
        }
        x[col] /= a[col][col];
    }
    Ok(x)
}

/// Re-projects `light` with negative pointwise values clamped to zero.
///
/// For a light that is already non-negative everywhere this is the
/// identity up to the lattice's reprojection error. A clipped function
/// re-acquires shallow negative lobes through band-limiting ringing, so
/// repeating the clamp still moves the coefficients — but by an order of
/// magnitude less each round. Clamping only ever adds a non-negative
/// function, so the constant coefficient never decreases beyond lattice
/// error.
pub fn clamp_nonnegative(light: &Sh9, sample_count: usize) -> Result<Sh9> {
    let quad = QuadratureSet::fibonacci(sample_count)?;
    Ok(quad.project(|dir| light.eval(dir).max(0.0)))
}

/// Scales a light so the brightest rendered foreground channel equals
/// `target`.
///
/// `target` must lie in [0.8, 1.0], the working range for normalized
/// datasets. Rendering is linear in the light, so re-rendering the scaled
/// light attains the target exactly up to rounding.
pub fn scale_intensity(
    light: &IlluminationRgb,
    map: &IntrinsicsMap,
    target: f64,
    tensor: &TriplingTensor,
) -> Result<IlluminationRgb> {
    if !INTENSITY_TARGET_RANGE.contains(&target) {
        return Err(Error::Argument(format!("intensity target {target} outside [0.8, 1.0]")));
    }
    let mut max_intensity = 0.0_f64;
    let mut foreground = 0usize;
    for pixel in &map.pixels {
        if pixel.masked {
            continue;
        }
        foreground += 1;
        for value in render_pixel(pixel, light, tensor) {
            max_intensity = max_intensity.max(value);
        }
    }
    if foreground == 0 {
        return Err(Error::Argument(
            "intrinsics map has no foreground pixels to normalize against".into(),
        ));
    }
    if max_intensity <= 0.0 {
        return Err(Error::Numerical(format!(
            "scene renders at peak intensity {max_intensity}; cannot scale to {target}"
        )));
    }
    let factor = target / max_intensity;
    Ok(IlluminationRgb { channels: std::array::from_fn(|c| light.channels[c].scaled(factor)) })
}

/// Rotates a light by z-y-z Euler angles — the augmentation entry point.
/// Rotating all three channels of an RGB light means calling this with
/// the same angles per channel (the rotation is channel-independent).
pub fn rotate_illumination(light: &Sh9, alpha: f64, beta: f64, gamma: f64) -> Result<Sh9> {
    Ok(zyz_rotation(alpha, beta, gamma)?.apply(light))
}
