//! Synthetic ground-truth scenes: a unit sphere viewed by a pinhole
//! camera, optionally shadowed by a flat wall, with per-pixel mask,
//! position, normal, and albedo maps ready for baking and rendering.
//!
//! The sphere is centered at the origin with radius 1; the camera sits on
//! +z looking down -z with +y up. Camera rays intersect the sphere *mesh*
//! (not the analytic sphere) so every generated position lies exactly on
//! the geometry later used for occlusion tests — analytic positions would
//! sit a sagitta above the chords and falsely self-shadow.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geom::{vec3, Vec3};
use crate::render::{IntrinsicsMap, PixelIntrinsics, Rgb};
use crate::sh::{Direction, QuadratureSet, Sh9};
use crate::visibility::{bake_visibility_with, Scene};

/// A square wall in the plane `x = distance`, spanning `[-half_extent,
/// half_extent]` in y and z, wound so its front faces the sphere at the
/// origin (occlusion only counts front-face hits).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WallBlocker {
    pub distance: f64,
    pub half_extent: f64,
}

impl Default for WallBlocker {
    fn default() -> WallBlocker {
        WallBlocker { distance: 1.5, half_extent: 3.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphereSceneConfig {
    /// Output maps are `image_size` x `image_size`.
    pub image_size: usize,
    /// Full vertical field of view; accepted range is 20 to 25 degrees.
    pub fov_degrees: f64,
    /// Camera position is `(0, 0, camera_distance)`.
    pub camera_distance: f64,
    pub mesh_slices: usize,
    pub mesh_stacks: usize,
    pub albedo: Rgb,
    pub blocker: Option<WallBlocker>,
    /// Drop foreground pixels bordering the background, trimming the
    /// silhouette ring where mesh and analytic sphere disagree most.
    pub erode_mask: bool,
}

impl Default for SphereSceneConfig {
    fn default() -> SphereSceneConfig {
        SphereSceneConfig {
            image_size: 64,
            fov_degrees: 22.5,
            camera_distance: 5.8,
            mesh_slices: 64,
            mesh_stacks: 32,
            albedo: [0.9, 0.8, 0.7],
            blocker: None,
            erode_mask: false,
        }
    }
}

/// A generated fixture: the occlusion scene (sphere plus any blocker),
/// per-pixel intrinsics (visibility initialized to the unoccluded
/// constant until baked), and per-pixel surface positions.
pub struct GeneratedScene {
    pub scene: Scene,
    pub intrinsics: IntrinsicsMap,
    /// Row-major surface positions; `None` on background pixels.
    pub positions: Vec<Option<Vec3>>,
}

/// A unit-UV-sphere triangle mesh with outward (counter-clockwise)
/// winding: `stacks` latitude bands by `slices` longitude wedges.
pub fn sphere_mesh(
    center: Vec3,
    radius: f64,
    slices: usize,
    stacks: usize,
) -> (Vec<Vec3>, Vec<[u32; 3]>) {
    assert!(slices >= 3 && stacks >= 2, "sphere mesh needs slices >= 3, stacks >= 2");
    let mut vertices = Vec::with_capacity(2 + slices * (stacks - 1));
    vertices.push(center + vec3(0.0, 0.0, radius));
    for ring in 1..stacks {
        let theta = PI * ring as f64 / stacks as f64;
        let (sin_t, cos_t) = theta.sin_cos();
        for slice in 0..slices {
            let phi = 2.0 * PI * slice as f64 / slices as f64;
            vertices.push(
                center
                    + vec3(radius * sin_t * phi.cos(), radius * sin_t * phi.sin(), radius * cos_t),
            );
        }
    }
    vertices.push(center + vec3(0.0, 0.0, -radius));

    let ring_start = |ring: usize| 1 + (ring - 1) * slices;
    let mut indices = Vec::with_capacity(2 * slices * (stacks - 1));
    for slice in 0..slices {
        let next = (slice + 1) % slices;
        indices.push([0, (ring_start(1) + slice) as u32, (ring_start(1) + next) as u32]);
    }
    for ring in 1..stacks - 1 {
        let above = ring_start(ring);
        let below = ring_start(ring + 1);
        for slice in 0..slices {
            let next = (slice + 1) % slices;
            let (a, b, c, d) = (above + slice, below + slice, below + next, above + next);
            indices.push([a as u32, b as u32, c as u32]);
            indices.push([a as u32, c as u32, d as u32]);
        }
    }
    let south = (vertices.len() - 1) as u32;
    let last = ring_start(stacks - 1);
    for slice in 0..slices {
        let next = (slice + 1) % slices;
        indices.push([south, (last + next) as u32, (last + slice) as u32]);
    }
    (vertices, indices)
}

/// The wall quad as two triangles with the front toward -x.
fn wall_mesh(wall: &WallBlocker) -> (Vec<Vec3>, Vec<[u32; 3]>) {
    let (d, h) = (wall.distance, wall.half_extent);
    let vertices = vec![vec3(d, -h, -h), vec3(d, h, -h), vec3(d, h, h), vec3(d, -h, h)];
    (vertices, vec![[0, 2, 1], [0, 3, 2]])
}

fn merge(base: &mut (Vec<Vec3>, Vec<[u32; 3]>), extra: (Vec<Vec3>, Vec<[u32; 3]>)) {
    let offset = base.0.len() as u32;
    base.0.extend(extra.0);
    base.1.extend(extra.1.into_iter().map(|t| [t[0] + offset, t[1] + offset, t[2] + offset]));
}

fn validate(config: &SphereSceneConfig) -> Result<()> {
    if config.image_size == 0 {
        return Err(Error::Argument("image size must be at least 1".into()));
    }
    if !(20.0..=25.0).contains(&config.fov_degrees) {
        return Err(Error::Argument(format!(
            "field of view {} degrees outside the supported 20..=25 range",
            config.fov_degrees
        )));
    }
    if !(config.camera_distance.is_finite() && config.camera_distance > 1.0) {
        return Err(Error::Argument(
            "camera distance must be finite and outside the unit sphere".into(),
        ));
    }
    if config.mesh_slices < 3 || config.mesh_stacks < 2 {
        return Err(Error::Argument("sphere mesh needs slices >= 3, stacks >= 2".into()));
    }
    if let Some(wall) = &config.blocker {
        if !(wall.distance.is_finite() && wall.distance > 1.0 && wall.half_extent > 0.0) {
            return Err(Error::Argument(
                "wall must sit outside the unit sphere with positive extent".into(),
            ));
        }
    }
    Ok(())
}

/// Builds the fixture: casts one camera ray per pixel against the sphere
/// mesh, records hit positions with radial (smooth) normals and the
/// configured albedo, and assembles the occlusion scene including any
/// blocker. Visibility starts at the unoccluded constant; call
/// [`bake_scene_visibility`] to replace it with ray-traced coefficients.
pub fn generate_sphere_scene(config: &SphereSceneConfig) -> Result<GeneratedScene> {
    validate(config)?;
    let size = config.image_size;
    let mut mesh = sphere_mesh(vec3(0.0, 0.0, 0.0), 1.0, config.mesh_slices, config.mesh_stacks);
    let camera_scene = Scene::new(mesh.0.clone(), mesh.1.clone())?;

    let camera = vec3(0.0, 0.0, config.camera_distance);
    let tan_half = (config.fov_degrees.to_radians() / 2.0).tan();
    let full_visibility = Sh9::constant(1.0);

    let mut intrinsics = IntrinsicsMap::filled_background(size, size);
    let mut positions = vec![None; size * size];
    for row in 0..size {
        for col in 0..size {
            let u = ((col as f64 + 0.5) / size as f64) * 2.0 - 1.0;
            let v = 1.0 - ((row as f64 + 0.5) / size as f64) * 2.0;
            let dir = Direction::new(u * tan_half, v * tan_half, -1.0)
                .expect("camera ray has unit z component");
            let Some(hit) = camera_scene.closest_hit(camera, dir) else {
                continue;
            };
            let normal =
                Direction::from_vec(hit.position).expect("sphere surface points are off-center");
            *intrinsics.pixel_mut(col, row) =
                PixelIntrinsics::surface(config.albedo, normal, full_visibility);
            positions[row * size + col] = Some(hit.position);
        }
    }

    if config.erode_mask {
        erode(&mut intrinsics, &mut positions);
    }

    if let Some(wall) = &config.blocker {
        merge(&mut mesh, wall_mesh(wall));
    }
    let scene = Scene::new(mesh.0, mesh.1)?;
    Ok(GeneratedScene { scene, intrinsics, positions })
}

/// Removes foreground pixels that have a background 4-neighbor (image
/// borders count as background).
fn erode(intrinsics: &mut IntrinsicsMap, positions: &mut [Option<Vec3>]) {
    let (w, h) = (intrinsics.width, intrinsics.height);
    let solid = |x: i64, y: i64| {
        x >= 0
            && y >= 0
            && x < w as i64
            && y < h as i64
            && !intrinsics.pixel(x as usize, y as usize).masked
    };
    let mut drop = Vec::new();
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            if solid(x, y)
                && !(solid(x - 1, y) && solid(x + 1, y) && solid(x, y - 1) && solid(x, y + 1))
            {
                drop.push((x as usize, y as usize));
            }
        }
    }
    for (x, y) in drop {
        *intrinsics.pixel_mut(x, y) = PixelIntrinsics::background();
        positions[y * w + x] = None;
    }
}

/// Ray-traces visibility coefficients for every foreground pixel over a
/// shared Fibonacci direction set.
pub fn bake_scene_visibility(generated: &mut GeneratedScene, count: usize) -> Result<()> {
    if count < crate::sh::COEFF_COUNT {
        return Err(Error::Argument(format!(
            "visibility bake needs at least {} directions, got {count}",
            crate::sh::COEFF_COUNT
        )));
    }
    let quad = QuadratureSet::fibonacci(count)?;
    for (pixel, position) in generated.intrinsics.pixels.iter_mut().zip(&generated.positions) {
        if let Some(p) = position {
            pixel.visibility = bake_visibility_with(&generated.scene, *p, &quad);
        }
    }
    Ok(())
}
