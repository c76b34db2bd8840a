//! `wasm-bindgen` exports: thin adapters from JS-friendly flat arrays to
//! the host-side demo functions. Invalid input returns `undefined`
//! rather than trapping.

use shlight::{Sh9, COEFF_COUNT};
use wasm_bindgen::prelude::*;

use crate::{
    light_from_flat, light_to_flat, preset_light, recovery_round_trip, render_lobe_rgba,
    render_sphere_rgba,
};

/// RGBA pixels (row-major, top-left origin) of the demo sphere under a
/// 27-number light (red, green, blue coefficient vectors) rotated by ZYZ
/// angles.
#[wasm_bindgen]
pub fn sphere_image(
    size: u32,
    light: &[f64],
    alpha: f64,
    beta: f64,
    gamma: f64,
    ground_shadow: bool,
) -> Option<Vec<u8>> {
    let light = light_from_flat(light)?;
    render_sphere_rgba(size as usize, &light, alpha, beta, gamma, ground_shadow)
}

/// RGBA pixels of the signed values of one 9-number coefficient vector.
#[wasm_bindgen]
pub fn lobe_image(size: u32, coeffs: &[f64], alpha: f64, beta: f64, gamma: f64) -> Option<Vec<u8>> {
    if coeffs.len() != COEFF_COUNT || coeffs.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut sh = Sh9::ZERO;
    sh.0.copy_from_slice(coeffs);
    render_lobe_rgba(size as usize, &sh, alpha, beta, gamma)
}

/// The 27 light numbers of a named preset ("uniform", "studio",
/// "sunset").
#[wasm_bindgen]
pub fn preset(name: &str) -> Option<Vec<f64>> {
    preset_light(name).map(|light| light_to_flat(&light))
}

/// Pushes a 27-number light through its shading and recovers it.
/// Returns 58 numbers: recovered light (27), intermediate shading (27),
/// per-channel rms residuals (3), and the largest coefficient error (1).
#[wasm_bindgen]
pub fn round_trip(light: &[f64]) -> Option<Vec<f64>> {
    let light = light_from_flat(light)?;
    let trip = recovery_round_trip(&light)?;
    let mut out = light_to_flat(&trip.recovered);
    for channel in trip.shading {
        out.extend(channel.0);
    }
    out.extend(trip.rms_residual);
    out.push(trip.max_error);
    Some(out)
}
