//! Interactive browser demo; see `web/` for the page that drives it.
//!
//! Everything here is plain host-testable Rust producing RGBA pixel
//! buffers and coefficient vectors; the thin `wasm` module adapts it for
//! `wasm-bindgen`. Three operations are exposed: relighting a sphere
//! under a rotatable environment, exploring signed coefficient lobes,
//! and round-tripping a light through shading recovery.

use shlight::{
    forward_shading, quantize_display, recover_illumination, render_shading, zyz_rotation,
    Direction, IlluminationRgb, Sh9, TriplingTensor, COEFF_COUNT,
};

#[cfg(target_arch = "wasm32")]
mod wasm;

pub const DEFAULT_GAMMA: f64 = 2.2;

/// Direction count for the demo's recovery round trip: enough for
/// coefficient errors far below display precision while staying
/// interactive in the browser.
pub const RECOVERY_SAMPLES: usize = 16_000;

/// Surface color of the demo sphere.
const SPHERE_ALBEDO: [f64; 3] = [0.85, 0.82, 0.78];

/// Outward unit normal of the front hemisphere under orthographic
/// projection, or `None` where the pixel misses the unit disc. Row 0 is
/// the top of the image and +y points up.
fn pixel_normal(row: usize, col: usize, size: usize) -> Option<Direction> {
    let scale = 2.0 / size as f64;
    let x = (col as f64 + 0.5) * scale - 1.0;
    let y = 1.0 - (row as f64 + 0.5) * scale;
    let r2 = x * x + y * y;
    if r2 >= 1.0 {
        return None;
    }
    Some(Direction::new(x, y, (1.0 - r2).sqrt()).expect("disc point is unit"))
}

/// Unpacks 27 numbers (three coefficient vectors: red, green, blue) into
/// an RGB light. Returns `None` on any other length or non-finite value.
pub fn light_from_flat(values: &[f64]) -> Option<IlluminationRgb> {
    if values.len() != 3 * COEFF_COUNT || values.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let channel = |c: usize| {
        let mut sh = Sh9::ZERO;
        sh.0.copy_from_slice(&values[c * COEFF_COUNT..(c + 1) * COEFF_COUNT]);
        sh
    };
    Some(IlluminationRgb { channels: [channel(0), channel(1), channel(2)] })
}

pub fn light_to_flat(light: &IlluminationRgb) -> Vec<f64> {
    light.channels.iter().flat_map(|c| c.0).collect()
}

/// Named starting environments for the page's preset picker.
pub fn preset_light(name: &str) -> Option<IlluminationRgb> {
    let mut channels = [Sh9::ZERO; 3];
    match name {
        "uniform" => {
            channels = [Sh9::constant(1.0); 3];
        }
        // Warm key light from the upper right, cool fill from the left.
        "studio" => {
            let tints = [(1.0, 0.25), (0.9, 0.35), (0.75, 0.55)];
            for (channel, (key, fill)) in channels.iter_mut().zip(tints) {
                let mut sh = Sh9::constant(0.45);
                sh[3] = 0.5 * key - 0.3 * fill; // x: key right, fill left
                sh[2] = 0.45 * key; // z: both from the front hemisphere
                sh[1] = 0.35 * key; // y: key from above
                *channel = sh;
            }
        }
        // Deep blue sky above, orange glow at the horizon.
        "sunset" => {
            let skies = [0.25, 0.45, 0.95];
            let glows = [1.1, 0.55, 0.2];
            for (channel, (sky, glow)) in channels.iter_mut().zip(skies.into_iter().zip(glows)) {
                let mut sh = Sh9::constant(0.5 * sky + 0.35 * glow);
                sh[1] = 0.55 * sky - 0.25 * glow; // brighter sky upward
                sh[6] = -0.4 * glow; // horizon band
                *channel = sh;
            }
        }
        _ => return None,
    }
    Some(IlluminationRgb { channels })
}

/// Coefficients of the visibility left by an infinite ground plane below
/// the sphere (screen-space down, -y): exactly the upper half space
/// passes, which has a closed-form projection.
fn ground_visibility() -> Sh9 {
    let mut v = Sh9::ZERO;
    v[0] = std::f64::consts::PI.sqrt();
    v[1] = (3.0 * std::f64::consts::PI).sqrt() / 2.0;
    v
}

/// Renders the demo sphere under `light` rotated by ZYZ angles, as an
/// RGBA buffer (row-major from the top-left, transparent background).
///
/// With `ground_shadow` set, the sphere floats above an infinite dark
/// ground plane: every surface point then sees only the upper half
/// space, which multiplies into the shading as a constant visibility.
pub fn render_sphere_rgba(
    size: usize,
    light: &IlluminationRgb,
    alpha: f64,
    beta: f64,
    gamma: f64,
    ground_shadow: bool,
) -> Option<Vec<u8>> {
    let rotation = zyz_rotation(alpha, beta, gamma).ok()?;
    let rotated = IlluminationRgb { channels: light.channels.map(|c| rotation.apply(&c)) };
    let visibility = if ground_shadow { ground_visibility() } else { Sh9::constant(1.0) };
    let tensor = TriplingTensor::shared();

    let mut pixels = vec![0u8; size * size * 4];
    for row in 0..size {
        for col in 0..size {
            let Some(normal) = pixel_normal(row, col, size) else { continue };
            let shading = render_shading(normal, &visibility, &rotated, tensor);
            let offset = (row * size + col) * 4;
            for (slot, (s, albedo)) in shading.into_iter().zip(SPHERE_ALBEDO).enumerate() {
                pixels[offset + slot] = quantize_display(albedo * s, DEFAULT_GAMMA);
            }
            pixels[offset + 3] = 255;
        }
    }
    Some(pixels)
}

/// Renders the signed values of one coefficient vector over the front
/// hemisphere, rotated by ZYZ angles first so every lobe can be turned
/// into view: red where positive, blue where negative, white near zero,
/// normalized to the largest magnitude in view.
pub fn render_lobe_rgba(
    size: usize,
    coeffs: &Sh9,
    alpha: f64,
    beta: f64,
    gamma: f64,
) -> Option<Vec<u8>> {
    let rotated = zyz_rotation(alpha, beta, gamma).ok()?.apply(coeffs);

    let mut values = vec![0.0_f64; size * size];
    let mut peak = 0.0_f64;
    for row in 0..size {
        for col in 0..size {
            if let Some(dir) = pixel_normal(row, col, size) {
                let v = rotated.eval(dir);
                values[row * size + col] = v;
                peak = peak.max(v.abs());
            }
        }
    }
    if peak == 0.0 {
        peak = 1.0; // all-zero input: paint the disc white
    }

    let mut pixels = vec![0u8; size * size * 4];
    for row in 0..size {
        for col in 0..size {
            if pixel_normal(row, col, size).is_none() {
                continue;
            }
            let t = values[row * size + col] / peak; // in [-1, 1]
            let fade = (255.0 * (1.0 - t.abs()) + 0.5) as u8;
            let (r, g, b) = if t >= 0.0 { (255, fade, fade) } else { (fade, fade, 255) };
            let offset = (row * size + col) * 4;
            pixels[offset] = r;
            pixels[offset + 1] = g;
            pixels[offset + 2] = b;
            pixels[offset + 3] = 255;
        }
    }
    Some(pixels)
}

/// Result of pushing a light through its shading and recovering it.
pub struct RoundTrip {
    /// The intermediate cosine-convolved shading, per channel.
    pub shading: [Sh9; 3],
    pub recovered: IlluminationRgb,
    /// Root-mean-square misfit of the solved system, per channel.
    pub rms_residual: [f64; 3],
    /// Largest absolute coefficient error across all channels.
    pub max_error: f64,
}

/// Forward-shades `light` and recovers it again, reporting how much of
/// it survives the trip.
pub fn recovery_round_trip(light: &IlluminationRgb) -> Option<RoundTrip> {
    let mut shading = [Sh9::ZERO; 3];
    let mut recovered = IlluminationRgb { channels: [Sh9::ZERO; 3] };
    let mut rms_residual = [0.0; 3];
    let mut max_error = 0.0_f64;
    for (c, channel) in light.channels.iter().enumerate() {
        shading[c] = forward_shading(channel);
        let recovery = recover_illumination(&shading[c], RECOVERY_SAMPLES).ok()?;
        for (got, want) in recovery.light.0.iter().zip(&channel.0) {
            max_error = max_error.max((got - want).abs());
        }
        recovered.channels[c] = recovery.light;
        rms_residual[c] = recovery.rms_residual;
    }
    Some(RoundTrip { shading, recovered, rms_residual, max_error })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform() -> IlluminationRgb {
        preset_light("uniform").unwrap()
    }

    #[test]
    fn disc_covers_the_center_and_misses_corners() {
        assert!(pixel_normal(0, 0, 64).is_none());
        assert!(pixel_normal(63, 63, 64).is_none());
        let center = pixel_normal(32, 32, 64).unwrap();
        assert!(center.z() > 0.99);
    }

    #[test]
    fn flat_light_round_trips() {
        let light = preset_light("sunset").unwrap();
        let flat = light_to_flat(&light);
        assert_eq!(flat.len(), 27);
        let back = light_from_flat(&flat).unwrap();
        for (a, b) in back.channels.iter().zip(&light.channels) {
            assert_eq!(a.0, b.0);
        }
        assert!(light_from_flat(&flat[..26]).is_none());
        let mut bad = flat;
        bad[5] = f64::NAN;
        assert!(light_from_flat(&bad).is_none());
    }

    #[test]
    fn unknown_preset_is_rejected() {
        assert!(preset_light("nope").is_none());
        for name in ["uniform", "studio", "sunset"] {
            let light = preset_light(name).unwrap();
            assert!(light.channels.iter().all(|c| c.is_finite()));
        }
    }

    #[test]
    fn uniform_light_paints_the_sphere_its_albedo() {
        let size = 32;
        let pixels = render_sphere_rgba(size, &uniform(), 0.0, 0.0, 0.0, false).unwrap();
        let center = ((size / 2) * size + size / 2) * 4;
        for (c, albedo) in SPHERE_ALBEDO.iter().enumerate() {
            assert_eq!(pixels[center + c], quantize_display(*albedo, DEFAULT_GAMMA));
        }
        assert_eq!(pixels[center + 3], 255);
        // Corners stay transparent.
        assert_eq!(&pixels[0..4], &[0, 0, 0, 0]);
    }

    #[test]
    fn ground_shadow_darkens_the_underside() {
        let size = 64;
        let lit = render_sphere_rgba(size, &uniform(), 0.0, 0.0, 0.0, false).unwrap();
        let shadowed = render_sphere_rgba(size, &uniform(), 0.0, 0.0, 0.0, true).unwrap();
        // Bottom row of the disc: much darker with the ground plane.
        let bottom = ((size - 4) * size + size / 2) * 4;
        assert!(
            i32::from(shadowed[bottom]) + 40 < i32::from(lit[bottom]),
            "{} vs {}",
            shadowed[bottom],
            lit[bottom]
        );
        // Top of the disc barely changes.
        let top = (3 * size + size / 2) * 4;
        assert!(
            i32::from(lit[top]) - i32::from(shadowed[top]) < 25,
            "{} vs {}",
            shadowed[top],
            lit[top]
        );
    }

    #[test]
    fn tilting_a_zenith_light_moves_the_highlight_sideways() {
        let size = 64;
        // Light concentrated toward +z, tilted to +x by a y-rotation.
        let mut sh = Sh9::constant(0.4);
        sh[2] = 0.8;
        let light = IlluminationRgb::monochrome(sh);
        let tilted =
            render_sphere_rgba(size, &light, 0.0, std::f64::consts::FRAC_PI_2, 0.0, false).unwrap();
        let mut left = 0u64;
        let mut right = 0u64;
        for row in 0..size {
            for col in 0..size {
                let v = tilted[(row * size + col) * 4] as u64;
                if col < size / 2 {
                    left += v;
                } else {
                    right += v;
                }
            }
        }
        assert!(right > left + left / 4, "right {right} vs left {left}");
    }

    #[test]
    fn lobe_image_shows_signed_hemispheres() {
        let size = 32;
        // Pure y-linear harmonic: positive (red) above, negative (blue)
        // below.
        let mut sh = Sh9::ZERO;
        sh[1] = 1.0;
        let pixels = render_lobe_rgba(size, &sh, 0.0, 0.0, 0.0).unwrap();
        let upper = ((size / 4) * size + size / 2) * 4;
        let lower = ((3 * size / 4) * size + size / 2) * 4;
        assert!(pixels[upper] > pixels[upper + 2], "upper half not red");
        assert!(pixels[lower + 2] > pixels[lower], "lower half not blue");
        // The all-zero vector paints a plain white disc.
        let flat = render_lobe_rgba(size, &Sh9::ZERO, 0.0, 0.0, 0.0).unwrap();
        let center = ((size / 2) * size + size / 2) * 4;
        assert_eq!(&flat[center..center + 4], &[255, 255, 255, 255]);
    }

    #[test]
    fn recovery_round_trip_is_lossless_here() {
        let trip = recovery_round_trip(&preset_light("studio").unwrap()).unwrap();
        assert!(trip.max_error < 1e-8, "max error {}", trip.max_error);
        for rms in trip.rms_residual {
            assert!(rms < 1e-8, "residual {rms}");
        }
    }

    #[test]
    fn round_trip_reports_the_intermediate_shading() {
        // A uniform unit environment produces the constant shading
        // function pi (the full clamped-cosine integral).
        let trip = recovery_round_trip(&uniform()).unwrap();
        for channel in &trip.shading {
            assert!((channel[0] - Sh9::constant(std::f64::consts::PI)[0]).abs() < 1e-12);
            for i in 1..COEFF_COUNT {
                assert!(channel[i].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn non_finite_angles_are_refused() {
        assert!(render_sphere_rgba(16, &uniform(), f64::NAN, 0.0, 0.0, false).is_none());
        assert!(render_lobe_rgba(16, &Sh9::ZERO, 0.0, f64::INFINITY, 0.0).is_none());
    }
}
