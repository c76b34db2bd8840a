//! Degree-2 spherical-harmonic lighting: projection, rotation, products,
//! Lambertian shading with spherical visibility, and the inverse problems
//! built on top of them (visibility baking, illumination recovery, and
//! reconstruction losses).
//!
//! Everything operates on 9-coefficient vectors ([`Sh9`]) over a fixed
//! real orthonormal basis; see [`sh`] for the exact conventions. The
//! forward shading model and its analytic derivatives live in [`render`];
//! quadrature lives in [`sh::QuadratureSet`]; the exact product algebra in
//! [`products`].

pub mod error;
pub mod geom;
pub mod illumination;
pub mod io;
pub mod losses;
pub mod products;
pub mod render;
pub mod rotation;
pub mod scene;
pub mod sh;
pub mod visibility;

pub use error::{Error, Result};
pub use geom::{vec3, Mat3, Vec3};
pub use illumination::{
    clamp_nonnegative, cosine_transfer, forward_shading, recover_illumination, rotate_illumination,
    scale_intensity, Recovery, DEFAULT_RECOVERY_SAMPLES,
};
pub use io::{
    albedo_to_image, assemble_intrinsics, decode_normal_map, encode_normal_map, export_display,
    format_coefficients, mask_from_image, mask_to_image, parse_coefficients, parse_obj,
    parse_points, project_environment_map, quantize_display, radiance_to_image, read_coefficients,
    read_obj, read_pfm, read_pfm_bytes, read_points, write_coefficients, write_obj, write_pfm,
    write_pfm_bytes, write_points, FloatImage,
};
pub use losses::{
    component_losses, illumination_loss, reconstruction_loss, total_loss, ComponentLosses,
    LossWeights, ReconstructionVariant, Stage, StageLosses,
};
pub use products::{double_product, product_coeffs, triple_product, TriplingTensor};
pub use render::{
    cosine_lobe, render_gradients, render_image, render_pixel, render_shading, shading_kernel,
    ChannelGradients, IlluminationRgb, IntrinsicsMap, PixelIntrinsics, RadianceImage,
    RenderGradients, Rgb,
};
pub use rotation::{
    rotate_coeffs, rotate_to_normal, x_minus_90, x_plus_90, z_rotation, zyz_angles, zyz_rotation,
    ShRotation,
};
pub use scene::{
    bake_scene_visibility, generate_sphere_scene, sphere_mesh, GeneratedScene, SphereSceneConfig,
    WallBlocker,
};
pub use sh::{basis, basis_component, Direction, QuadratureSet, Sh9, COEFF_COUNT};
pub use visibility::{bake_visibility, bake_visibility_with, RayHit, SamplePoint, Scene};
