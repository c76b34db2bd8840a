//! Lambertian forward shading under distant illumination with spherical
//! visibility, and its analytic derivatives.
//!
//! A pixel with albedo `rho`, unit normal `n`, and visibility coefficients
//! `v` lit by per-channel illumination coefficients `L` has outgoing
//! radiance
//!
//! ```text
//! I_c = (rho_c / pi) * sum_ijk L_ci v_j m(n)_k T[i][j][k]
//! ```
//!
//! where `m(n)` is the clamped-cosine kernel rotated so its axis lies
//! along `n`, and `T` is the tripling tensor. All quantities here are
//! degree <= 2, so the contraction is exact — no quadrature is involved in
//! the forward model.
//!
//! Derivatives with respect to albedo, illumination, and visibility are
//! linear reads of the same contraction. The derivative with respect to
//! the normal goes through the polar/azimuth angles of `m(n)`; because the
//! azimuth derivative degenerates at the poles, normals near +-z are
//! handled in a frame rotated 90 degrees about +x and the gradient is
//! rotated back, keeping the whole path free of special cases and
//! infallible for every unit normal.

use std::f64::consts::PI;

use crate::geom::{vec3, Vec3};
use crate::products::{product_coeffs, triple_product, TriplingTensor};
use crate::rotation::{
    align_z_angles, apply_x_minus, apply_x_plus, apply_z, apply_z_derivative, rotate_to_normal,
};
use crate::sh::{Direction, Sh9, COEFF_COUNT};

/// Linear-light color triple, red/green/blue.
pub type Rgb = [f64; 3];

/// Normals whose |z| exceeds this are differentiated in a frame rotated
/// 90 degrees about +x, where their polar angle is comfortably far from
/// the azimuth singularity. Either chart is accurate in the overlap.
const POLE_CHART_LIMIT: f64 = 0.7;

/// Coefficients of the clamped cosine `max(dir.z, 0)` band-limited to
/// degree 2. Zonal: only slots 0, 2, 6 are nonzero. The band-limited
/// function overshoots slightly — it evaluates to 17/16 at +z and 1/16
/// at -z rather than 1 and 0.
pub fn cosine_lobe() -> Sh9 {
    let mut c = Sh9::ZERO;
    c[0] = PI.sqrt() / 2.0;
    c[2] = (PI / 3.0).sqrt();
    c[6] = (5.0 * PI).sqrt() / 8.0;
    c
}

/// The clamped-cosine kernel aimed along `normal`: `m(n)` in the radiance
/// formula.
pub fn shading_kernel(normal: Direction) -> Sh9 {
    rotate_to_normal(&cosine_lobe(), normal)
}

/// Everything the renderer knows about one pixel of a decomposed scene.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelIntrinsics {
    pub albedo: Rgb,
    pub normal: Direction,
    pub visibility: Sh9,
    /// Background pixels render black and are excluded from losses.
    pub masked: bool,
}

impl PixelIntrinsics {
    /// A masked background pixel (the normal is a placeholder).
    pub fn background() -> PixelIntrinsics {
        PixelIntrinsics {
            albedo: [0.0; 3],
            normal: Direction::PLUS_Z,
            visibility: Sh9::ZERO,
            masked: true,
        }
    }

    /// An unmasked surface pixel.
    pub fn surface(albedo: Rgb, normal: Direction, visibility: Sh9) -> PixelIntrinsics {
        PixelIntrinsics { albedo, normal, visibility, masked: false }
    }
}

/// Per-pixel intrinsics for a whole image, row-major from the top-left.
#[derive(Clone, Debug)]
pub struct IntrinsicsMap {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<PixelIntrinsics>,
}

impl IntrinsicsMap {
    /// A map of the given size with every pixel masked.
    pub fn filled_background(width: usize, height: usize) -> IntrinsicsMap {
        IntrinsicsMap { width, height, pixels: vec![PixelIntrinsics::background(); width * height] }
    }

    fn offset(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    pub fn pixel(&self, x: usize, y: usize) -> &PixelIntrinsics {
        &self.pixels[self.offset(x, y)]
    }

    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut PixelIntrinsics {
        let i = self.offset(x, y);
        &mut self.pixels[i]
    }
}

/// Distant illumination, one coefficient vector per color channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IlluminationRgb {
    pub channels: [Sh9; 3],
}

impl IlluminationRgb {
    pub const ZERO: IlluminationRgb = IlluminationRgb { channels: [Sh9::ZERO; 3] };

    /// The same coefficients in all three channels.
    pub fn monochrome(l: Sh9) -> IlluminationRgb {
        IlluminationRgb { channels: [l; 3] }
    }

    pub fn is_finite(&self) -> bool {
        self.channels.iter().all(Sh9::is_finite)
    }
}

/// Rendered linear radiance, row-major from the top-left.
#[derive(Clone, Debug)]
pub struct RadianceImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Rgb>,
}

impl RadianceImage {
    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        debug_assert!(x < self.width && y < self.height);
        self.pixels[y * self.width + x]
    }
}

/// Shading: the render with unit albedo, 1/pi included, so constant unit
/// illumination with full visibility shades to exactly 1 at any normal.
pub fn render_shading(
    normal: Direction,
    visibility: &Sh9,
    illumination: &IlluminationRgb,
    tensor: &TriplingTensor,
) -> Rgb {
    let kernel = shading_kernel(normal);
    let mut out = [0.0; 3];
    for (c, value) in out.iter_mut().enumerate() {
        *value = triple_product(&illumination.channels[c], visibility, &kernel, tensor) / PI;
    }
    out
}

/// Radiance of a single pixel: albedo times shading, componentwise.
/// Masked pixels are black.
pub fn render_pixel(
    pixel: &PixelIntrinsics,
    illumination: &IlluminationRgb,
    tensor: &TriplingTensor,
) -> Rgb {
    if pixel.masked {
        return [0.0; 3];
    }
    let shading = render_shading(pixel.normal, &pixel.visibility, illumination, tensor);
    [pixel.albedo[0] * shading[0], pixel.albedo[1] * shading[1], pixel.albedo[2] * shading[2]]
}

/// Renders every pixel of an intrinsics map.
pub fn render_image(
    map: &IntrinsicsMap,
    illumination: &IlluminationRgb,
    tensor: &TriplingTensor,
) -> RadianceImage {
    RadianceImage {
        width: map.width,
        height: map.height,
        pixels: map.pixels.iter().map(|p| render_pixel(p, illumination, tensor)).collect(),
    }
}

/// Radiance of one channel together with its first derivatives.
#[derive(Clone, Copy, Debug)]
pub struct ChannelGradients {
    pub value: f64,
    pub wrt_albedo: f64,
    /// Tangential gradient with respect to the unit normal, in ambient
    /// coordinates (orthogonal to the normal).
    pub wrt_normal: Vec3,
    pub wrt_visibility: Sh9,
    pub wrt_light: Sh9,
}

impl ChannelGradients {
    fn zero() -> ChannelGradients {
        ChannelGradients {
            value: 0.0,
            wrt_albedo: 0.0,
            wrt_normal: vec3(0.0, 0.0, 0.0),
            wrt_visibility: Sh9::ZERO,
            wrt_light: Sh9::ZERO,
        }
    }
}

/// Radiance and derivatives for all three channels of one pixel.
#[derive(Clone, Copy, Debug)]
pub struct RenderGradients {
    pub channels: [ChannelGradients; 3],
}

/// The rotated kernel `m(n)` and its derivatives with respect to the
/// polar and azimuthal angles of `n`, all in the working frame.
struct KernelChain {
    kernel: [f64; COEFF_COUNT],
    d_polar: [f64; COEFF_COUNT],
    d_azimuth: [f64; COEFF_COUNT],
    sin_polar: f64,
    cos_polar: f64,
    sin_azimuth: f64,
    cos_azimuth: f64,
}

fn kernel_chain(normal: Direction) -> KernelChain {
    let (beta, azimuth) = align_z_angles(normal);
    let lifted = apply_x_plus(&cosine_lobe().0);
    let tilted = apply_z(beta, &lifted);
    let tilted_d = apply_z_derivative(beta, &lifted);
    let lowered = apply_x_minus(&tilted);
    let lowered_d = apply_x_minus(&tilted_d);
    let (sin_polar, cos_polar) = beta.sin_cos();
    let (sin_azimuth, cos_azimuth) = azimuth.sin_cos();
    KernelChain {
        kernel: apply_z(azimuth, &lowered),
        d_polar: apply_z(azimuth, &lowered_d),
        d_azimuth: apply_z_derivative(azimuth, &lowered),
        sin_polar,
        cos_polar,
        sin_azimuth,
        cos_azimuth,
    }
}

/// One channel's gradients computed directly in the current frame. Only
/// valid while `sin_polar` is well away from zero; the caller guarantees
/// that by choosing the chart.
fn channel_gradients_in_frame(
    albedo: f64,
    light: &Sh9,
    visibility: &Sh9,
    chain: &KernelChain,
    tensor: &TriplingTensor,
) -> ChannelGradients {
    let kernel = Sh9(chain.kernel);
    let shading = triple_product(light, visibility, &kernel, tensor);
    let scale = albedo / PI;

    let light_visibility = product_coeffs(light, visibility, tensor);
    let d_polar = light_visibility.dot(&Sh9(chain.d_polar));
    let d_azimuth = light_visibility.dot(&Sh9(chain.d_azimuth));

    // Chain through spherical coordinates: the polar unit vector plus the
    // azimuthal unit vector scaled by 1/sin(polar).
    let (sb, cb) = (chain.sin_polar, chain.cos_polar);
    let (sg, cg) = (chain.sin_azimuth, chain.cos_azimuth);
    let wrt_normal = vec3(
        scale * (d_polar * cb * cg - d_azimuth * sg / sb),
        scale * (d_polar * cb * sg + d_azimuth * cg / sb),
        scale * (-d_polar * sb),
    );

    ChannelGradients {
        value: scale * shading,
        wrt_albedo: shading / PI,
        wrt_normal,
        wrt_visibility: product_coeffs(light, &kernel, tensor).scaled(scale),
        wrt_light: product_coeffs(visibility, &kernel, tensor).scaled(scale),
    }
}

/// Radiance and analytic first derivatives for one pixel. Masked pixels
/// return all zeros. Defined for every unit normal, poles included.
pub fn render_gradients(
    pixel: &PixelIntrinsics,
    illumination: &IlluminationRgb,
    tensor: &TriplingTensor,
) -> RenderGradients {
    if pixel.masked {
        return RenderGradients { channels: [ChannelGradients::zero(); 3] };
    }

    let n = pixel.normal;
    if n.z().abs() <= POLE_CHART_LIMIT {
        let chain = kernel_chain(n);
        let channels = std::array::from_fn(|c| {
            channel_gradients_in_frame(
                pixel.albedo[c],
                &illumination.channels[c],
                &pixel.visibility,
                &chain,
                tensor,
            )
        });
        return RenderGradients { channels };
    }

    // Near a pole: rotate the whole problem +90 degrees about +x, where
    // the normal sits near the equator, then rotate the gradients back.
    // Coefficient vectors rotate by the +x quarter turn; its inverse is
    // the -x quarter turn (orthogonal, so also the transpose).
    let rotated_normal =
        Direction::new(n.x(), -n.z(), n.y()).expect("rotating a unit vector keeps it unit");
    let visibility = Sh9(apply_x_plus(&pixel.visibility.0));
    let chain = kernel_chain(rotated_normal);
    let channels = std::array::from_fn(|c| {
        let light = Sh9(apply_x_plus(&illumination.channels[c].0));
        let g = channel_gradients_in_frame(pixel.albedo[c], &light, &visibility, &chain, tensor);
        ChannelGradients {
            value: g.value,
            wrt_albedo: g.wrt_albedo,
            wrt_normal: vec3(g.wrt_normal.x, g.wrt_normal.z, -g.wrt_normal.y),
            wrt_visibility: Sh9(apply_x_minus(&g.wrt_visibility.0)),
            wrt_light: Sh9(apply_x_minus(&g.wrt_light.0)),
        }
    });
    RenderGradients { channels }
}
