//! Ray-cast visibility: triangle scenes, an any-hit accelerator, and
//! projection of per-point binary visibility onto the coefficient basis.
//!
//! Occlusion counts only hits on triangle *front* faces (ray direction
//! against the geometric normal). This makes a closed convex surface
//! transparent to rays leaving its own boundary — they can only cross it
//! on the way out, through back faces — so a blocker-free convex body
//! bakes to the constant-1 visibility it should have. Blockers must
//! therefore be wound with their front toward the shaded geometry.

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::sh::{Direction, QuadratureSet, Sh9, COEFF_COUNT};

/// Ray origins are pushed this fraction of the scene's bounding-box
/// diagonal along the ray before testing, so surfaces do not shadow
/// themselves through rounding.
const ORIGIN_OFFSET_SCALE: f64 = 1e-4;

/// Triangles with area at or below this are rejected: their geometric
/// normal, and with it the front-face test, is undefined.
const MIN_TRIANGLE_AREA: f64 = 1e-12;

const BVH_LEAF_SIZE: usize = 4;

/// A position on a surface together with its outward unit normal; the
/// unit visibility baking works on and the shape point files parse into.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplePoint {
    pub position: Vec3,
    pub normal: Direction,
}

/// A closest-hit query result.
#[derive(Clone, Copy, Debug)]
pub struct RayHit {
    /// Distance along the ray, in scene units (the direction is unit).
    pub t: f64,
    pub position: Vec3,
    /// Index into the scene's triangle list.
    pub triangle: usize,
}

/// Precomputed per-triangle data for the intersection kernel.
#[derive(Clone, Copy)]
struct Triangle {
    v0: Vec3,
    e1: Vec3,
    e2: Vec3,
}

/// Ray/triangle intersection, front faces only. With counter-clockwise
/// winding the geometric normal is `e1 x e2` and `det = -dir . (e1 x e2)`,
/// so a ray striking the front has `det > 0`; back faces and parallel rays
/// fall out together, with no scale-dependent epsilon. Divisions are
/// deferred until a hit is certain.
fn intersect(tri: &Triangle, origin: Vec3, dir: Vec3, t_max: f64) -> Option<f64> {
    let h = dir.cross(tri.e2);
    let det = tri.e1.dot(h);
    if det <= 0.0 {
        return None;
    }
    let s = origin - tri.v0;
    let u = s.dot(h);
    if u < 0.0 || u > det {
        return None;
    }
    let q = s.cross(tri.e1);
    let v = dir.dot(q);
    if v < 0.0 || u + v > det {
        return None;
    }
    let t = tri.e2.dot(q) / det;
    if t > 0.0 && t < t_max {
        Some(t)
    } else {
        None
    }
}

/// Flat BVH node: a leaf when `count > 0`, covering `order[start..start
/// + count]`; otherwise an interior node with two child indices.
struct BvhNode {
    min: Vec3,
    max: Vec3,
    left: u32,
    right: u32,
    start: u32,
    count: u32,
}

impl BvhNode {
    /// Slab test against the node's box; `inv` holds the reciprocal ray
    /// direction. Treats on-boundary NaNs as the adjacent slab bound,
    /// which is the usual conservative resolution.
    fn hit(&self, origin: Vec3, inv: Vec3, t_max: f64) -> bool {
        let mut t0: f64 = 0.0;
        let mut t1 = t_max;
        for axis in 0..3 {
            let a = (self.min.axis(axis) - origin.axis(axis)) * inv.axis(axis);
            let b = (self.max.axis(axis) - origin.axis(axis)) * inv.axis(axis);
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
        t0 <= t1
    }
}

/// An immutable triangle mesh with an any-hit/closest-hit accelerator.
pub struct Scene {
    vertices: Vec<Vec3>,
    indices: Vec<[u32; 3]>,
    triangles: Vec<Triangle>,
    nodes: Vec<BvhNode>,
    /// Triangle indices, permuted so BVH leaves cover contiguous runs.
    order: Vec<u32>,
    bounds_min: Vec3,
    bounds_max: Vec3,
    offset: f64,
}

impl Scene {
    /// Validates and indexes a triangle mesh. An empty mesh is legal and
    /// occludes nothing.
    pub fn new(vertices: Vec<Vec3>, indices: Vec<[u32; 3]>) -> Result<Scene> {
        for (i, v) in vertices.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Argument(format!("vertex {i} is not finite")));
            }
        }
        let mut triangles = Vec::with_capacity(indices.len());
        for (i, idx) in indices.iter().enumerate() {
            for &j in idx {
                if j as usize >= vertices.len() {
                    return Err(Error::Argument(format!(
                        "triangle {i} references vertex {j} but there are only {}",
                        vertices.len()
                    )));
                }
            }
            let v0 = vertices[idx[0] as usize];
            let e1 = vertices[idx[1] as usize] - v0;
            let e2 = vertices[idx[2] as usize] - v0;
            if 0.5 * e1.cross(e2).length() <= MIN_TRIANGLE_AREA {
                return Err(Error::Argument(format!(
                    "triangle {i} is degenerate (area below {MIN_TRIANGLE_AREA})"
                )));
            }
            triangles.push(Triangle { v0, e1, e2 });
        }

        let mut bounds_min = Vec3 { x: 0.0, y: 0.0, z: 0.0 };
        let mut bounds_max = bounds_min;
        if let Some((&first, rest)) = vertices.split_first() {
            bounds_min = first;
            bounds_max = first;
            for &v in rest {
                bounds_min = bounds_min.min_elementwise(v);
                bounds_max = bounds_max.max_elementwise(v);
            }
        }
        let offset = ORIGIN_OFFSET_SCALE * (bounds_max - bounds_min).length();

        let mut scene = Scene {
            vertices,
            indices,
            triangles,
            nodes: Vec::new(),
            order: Vec::new(),
            bounds_min,
            bounds_max,
            offset,
        };
        scene.build_bvh();
        Ok(scene)
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn indices(&self) -> &[[u32; 3]] {
        &self.indices
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Axis-aligned bounds of the vertices; both zero for an empty scene.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        (self.bounds_min, self.bounds_max)
    }

    /// The self-intersection offset applied to ray origins, in scene
    /// units.
    pub fn origin_offset(&self) -> f64 {
        self.offset
    }

    fn build_bvh(&mut self) {
        if self.triangles.is_empty() {
            return;
        }
        let boxes: Vec<(Vec3, Vec3, Vec3)> = self
            .triangles
            .iter()
            .map(|t| {
                let a = t.v0;
                let b = t.v0 + t.e1;
                let c = t.v0 + t.e2;
                let min = a.min_elementwise(b).min_elementwise(c);
                let max = a.max_elementwise(b).max_elementwise(c);
                (min, max, (min + max) * 0.5)
            })
            .collect();
        self.order = (0..self.triangles.len() as u32).collect();
        let mut order = std::mem::take(&mut self.order);
        self.split(&mut order, 0, &boxes);
        self.order = order;
    }

    /// Recursively builds the node for `order[base..base + len]`,
    /// median-splitting on the longest centroid axis; returns its index.
    fn split(&mut self, order: &mut [u32], base: usize, boxes: &[(Vec3, Vec3, Vec3)]) -> u32 {
        let mut min = boxes[order[0] as usize].0;
        let mut max = boxes[order[0] as usize].1;
        let mut cmin = boxes[order[0] as usize].2;
        let mut cmax = cmin;
        for &t in order.iter() {
            let (bmin, bmax, centroid) = boxes[t as usize];
            min = min.min_elementwise(bmin);
            max = max.max_elementwise(bmax);
            cmin = cmin.min_elementwise(centroid);
            cmax = cmax.max_elementwise(centroid);
        }

        let extent = cmax - cmin;
        let axis = if extent.x >= extent.y && extent.x >= extent.z {
            0
        } else if extent.y >= extent.z {
            1
        } else {
            2
        };

        let index = self.nodes.len() as u32;
        self.nodes.push(BvhNode {
            min,
            max,
            left: 0,
            right: 0,
            start: base as u32,
            count: order.len() as u32,
        });
        // Leaf: few triangles, or centroids too coincident to separate.
        if order.len() <= BVH_LEAF_SIZE || extent.axis(axis) == 0.0 {
            return index;
        }

        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |&a, &b| {
            boxes[a as usize].2.axis(axis).total_cmp(&boxes[b as usize].2.axis(axis))
        });
        let (lo, hi) = order.split_at_mut(mid);
        let left = self.split(lo, base, boxes);
        let right = self.split(hi, base + mid, boxes);
        self.nodes[index as usize].left = left;
        self.nodes[index as usize].right = right;
        self.nodes[index as usize].count = 0;
        index
    }

    fn traverse<T>(
        &self,
        origin: Vec3,
        dir: Vec3,
        mut t_max: f64,
        mut on_leaf_hit: impl FnMut(usize, f64) -> Option<(f64, T)>,
    ) -> Option<T> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vec3 { x: 1.0 / dir.x, y: 1.0 / dir.y, z: 1.0 / dir.z };
        let mut best = None;
        let mut stack = [0u32; 64];
        let mut top = 1;
        while top > 0 {
            top -= 1;
            let node = &self.nodes[stack[top] as usize];
            if !node.hit(origin, inv, t_max) {
                continue;
            }
            if node.count > 0 {
                for &t in &self.order[node.start as usize..(node.start + node.count) as usize] {
                    if let Some(hit) = intersect(&self.triangles[t as usize], origin, dir, t_max) {
                        if let Some((new_max, value)) = on_leaf_hit(t as usize, hit) {
                            t_max = new_max;
                            best = Some(value);
                            if t_max <= 0.0 {
                                return best;
                            }
                        }
                    }
                }
            } else {
                debug_assert!(top + 2 <= stack.len());
                stack[top] = node.left;
                stack[top + 1] = node.right;
                top += 2;
            }
        }
        best
    }

    /// True iff a ray from `point`, nudged forward by the scene offset,
    /// hits any triangle's front face.
    pub fn occluded(&self, point: Vec3, dir: Direction) -> bool {
        let origin = point + dir.vec() * self.offset;
        self.traverse(origin, dir.vec(), f64::INFINITY, |_, _| Some((0.0, ()))).is_some()
    }

    /// Reference linear scan with semantics identical to [`occluded`];
    /// the accelerated path is validated against it.
    ///
    /// [`occluded`]: Scene::occluded
    pub fn occluded_brute(&self, point: Vec3, dir: Direction) -> bool {
        let origin = point + dir.vec() * self.offset;
        self.triangles.iter().any(|t| intersect(t, origin, dir.vec(), f64::INFINITY).is_some())
    }

    /// Nearest front-face hit along a ray, if any. No origin offset is
    /// applied; this is for camera rays, not shadow rays.
    pub fn closest_hit(&self, origin: Vec3, dir: Direction) -> Option<RayHit> {
        self.traverse(origin, dir.vec(), f64::INFINITY, |triangle, t| {
            Some((t, RayHit { t, position: origin + dir.vec() * t, triangle }))
        })
    }
}

/// Projects the binary visibility at `point` onto coefficients over a
/// caller-provided direction set (reuse one set across many points).
pub fn bake_visibility_with(scene: &Scene, point: Vec3, quad: &QuadratureSet) -> Sh9 {
    quad.project(|dir| if scene.occluded(point, dir) { 0.0 } else { 1.0 })
}

/// Projects the binary visibility at `point` over a fresh Fibonacci set
/// of `count` directions.
pub fn bake_visibility(scene: &Scene, point: Vec3, count: usize) -> Result<Sh9> {
    if count < COEFF_COUNT {
        return Err(Error::Argument(format!(
            "visibility bake needs at least {COEFF_COUNT} directions, got {count}"
        )));
    }
    let quad = QuadratureSet::fibonacci(count)?;
    Ok(bake_visibility_with(scene, point, &quad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::vec3;
    use crate::scene::sphere_mesh;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_direction(rng: &mut impl Rng) -> Direction {
        let z: f64 = rng.gen_range(-1.0..1.0);
        let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let r = (1.0 - z * z).sqrt();
        Direction::new(r * phi.cos(), r * phi.sin(), z).unwrap()
    }

    fn random_soup(rng: &mut impl Rng, count: usize) -> Scene {
        let mut vertices = Vec::new();
        let mut indices = Vec::new();
        while indices.len() < count {
            let v0 =
                vec3(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let v1 = v0
                + vec3(
                    rng.gen_range(-0.8..0.8),
                    rng.gen_range(-0.8..0.8),
                    rng.gen_range(-0.8..0.8),
                );
            let v2 = v0
                + vec3(
                    rng.gen_range(-0.8..0.8),
                    rng.gen_range(-0.8..0.8),
                    rng.gen_range(-0.8..0.8),
                );
            if 0.5 * (v1 - v0).cross(v2 - v0).length() < 1e-3 {
                continue;
            }
            let base = vertices.len() as u32;
            vertices.extend([v0, v1, v2]);
            indices.push([base, base + 1, base + 2]);
        }
        Scene::new(vertices, indices).unwrap()
    }

    /// A downward-facing square ceiling at height `z`, front toward
    /// anything below it.
    fn ceiling(z: f64, half: f64) -> Scene {
        let vertices = vec![
            vec3(-half, -half, z),
            vec3(half, -half, z),
            vec3(half, half, z),
            vec3(-half, half, z),
        ];
        let indices = vec![[0, 3, 1], [2, 1, 3]];
        Scene::new(vertices, indices).unwrap()
    }

    #[test]
    fn rejects_out_of_range_indices() {
        let vertices = vec![vec3(0.0, 0.0, 0.0), vec3(1.0, 0.0, 0.0), vec3(0.0, 1.0, 0.0)];
        assert!(Scene::new(vertices, vec![[0, 1, 3]]).is_err());
    }

    #[test]
    fn rejects_degenerate_triangles() {
        let vertices = vec![vec3(0.0, 0.0, 0.0), vec3(1.0, 0.0, 0.0), vec3(2.0, 0.0, 0.0)];
        assert!(Scene::new(vertices, vec![[0, 1, 2]]).is_err());
    }

    #[test]
    fn empty_scene_never_occludes() {
        let scene = Scene::new(Vec::new(), Vec::new()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            assert!(!scene.occluded(vec3(0.0, 0.0, 0.0), random_direction(&mut rng)));
        }
        // The lattice projection of the constant function leaves ~1e-3
        // residue in the non-constant slots at this sample count.
        let baked = bake_visibility(&scene, vec3(0.0, 0.0, 0.0), 872).unwrap();
        let constant = Sh9::constant(1.0);
        for i in 0..COEFF_COUNT {
            assert_abs_diff_eq!(baked[i], constant[i], epsilon = 0.01);
        }
    }

    #[test]
    fn direct_hit_and_miss() {
        // One triangle straddling the +x axis, wound so its front faces
        // the origin.
        let scene = Scene::new(
            vec![vec3(2.0, -1.0, -1.0), vec3(2.0, 1.0, 0.0), vec3(2.0, 0.0, 1.0)],
            vec![[0, 2, 1]],
        )
        .unwrap();
        let origin = vec3(0.0, 0.0, 0.0);
        assert!(scene.occluded(origin, Direction::PLUS_X));
        assert!(!scene.occluded(origin, Direction::PLUS_Y));
        assert!(!scene.occluded(origin, Direction::PLUS_Z));
    }

    #[test]
    fn bvh_agrees_with_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let scene = random_soup(&mut rng, 60);
        for _ in 0..2000 {
            let point =
                vec3(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let dir = random_direction(&mut rng);
            assert_eq!(scene.occluded(point, dir), scene.occluded_brute(point, dir));
        }
    }

    #[test]
    fn closest_hit_agrees_with_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let scene = random_soup(&mut rng, 60);
        for _ in 0..2000 {
            let origin =
                vec3(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let dir = random_direction(&mut rng);
            let brute = scene
                .triangles
                .iter()
                .filter_map(|t| intersect(t, origin, dir.vec(), f64::INFINITY))
                .min_by(f64::total_cmp);
            let fast = scene.closest_hit(origin, dir);
            match (brute, fast) {
                (None, None) => {}
                (Some(bt), Some(hit)) => assert_abs_diff_eq!(bt, hit.t, epsilon = 1e-12),
                other => panic!("closest-hit mismatch: {other:?}"),
            }
        }
    }

    #[test]
    fn occlusion_matches_analytic_sphere_oracle() {
        // Random rays against a finely tessellated sphere, compared with
        // the exact ray/sphere test; rays grazing within the
        // tessellation's sagitta band are excluded.
        let (vertices, indices) = sphere_mesh(vec3(0.0, 0.0, 0.0), 1.0, 96, 48);
        let scene = Scene::new(vertices, indices).unwrap();
        let band = 0.02;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut tested = 0;
        while tested < 10_000 {
            let point =
                vec3(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            if point.length() < 1.0 + band {
                continue;
            }
            let dir = random_direction(&mut rng);
            // Closest approach of the forward ray to the center.
            let to_center = -point;
            let along = to_center.dot(dir.vec());
            let closest = if along <= 0.0 {
                point.length()
            } else {
                (to_center - dir.vec() * along).length()
            };
            if (closest - 1.0).abs() < band {
                continue;
            }
            let analytic = closest < 1.0;
            assert_eq!(
                scene.occluded(point, dir),
                analytic,
                "ray from {point:?} along {:?}",
                dir.vec()
            );
            tested += 1;
        }
    }

    #[test]
    fn convex_surface_is_unoccluded_from_inside_its_faces() {
        let (vertices, indices) = sphere_mesh(vec3(0.0, 0.0, 0.0), 1.0, 32, 16);
        let scene = Scene::new(vertices.clone(), indices.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        // Face centroids sit strictly inside the ball, so every outgoing
        // ray first crosses the mesh through a back face: never occluded.
        for _ in 0..25 {
            let tri = indices[rng.gen_range(0..indices.len())];
            let centroid =
                (vertices[tri[0] as usize] + vertices[tri[1] as usize] + vertices[tri[2] as usize])
                    / 3.0;
            for _ in 0..50 {
                assert!(!scene.occluded(centroid, random_direction(&mut rng)));
            }
            let baked = bake_visibility(&scene, centroid, 872).unwrap();
            let constant = Sh9::constant(1.0);
            for i in 0..COEFF_COUNT {
                assert_abs_diff_eq!(baked[i], constant[i], epsilon = 0.01);
            }
        }
    }

    #[test]
    fn ceiling_bakes_to_the_half_space_projection() {
        // A huge plane overhead blocks exactly the upper half-space; the
        // visible lower hemisphere projects to sqrt(pi) in the constant
        // slot and -sqrt(3 pi)/2 in the linear-z slot.
        let scene = ceiling(1.0, 500.0);
        let baked = bake_visibility(&scene, vec3(0.0, 0.0, 0.0), 2000).unwrap();
        let mut expected = Sh9::ZERO;
        expected[0] = PI.sqrt();
        expected[2] = -(3.0 * PI).sqrt() / 2.0;
        for i in 0..COEFF_COUNT {
            assert_abs_diff_eq!(baked[i], expected[i], epsilon = 0.02);
        }
    }

    #[test]
    fn ceiling_back_face_does_not_occlude() {
        // From above, the same ceiling's back face is toward us; looking
        // down through it must count as clear.
        let scene = ceiling(1.0, 500.0);
        assert!(!scene.occluded(vec3(0.0, 0.0, 2.0), Direction::MINUS_Z));
        assert!(scene.occluded(vec3(0.0, 0.0, 0.0), Direction::PLUS_Z));
    }

    #[test]
    fn bake_is_scale_invariant() {
        let (mut vertices, indices) = sphere_mesh(vec3(0.0, 0.0, 0.0), 1.0, 24, 12);
        let point = vec3(1.4, 0.3, 0.2);
        let small = Scene::new(vertices.clone(), indices.clone()).unwrap();
        let small_baked = bake_visibility(&small, point, 872).unwrap();
        for v in &mut vertices {
            *v = *v * 10.0;
        }
        let big = Scene::new(vertices, indices).unwrap();
        let big_baked = bake_visibility(&big, point * 10.0, 872).unwrap();
        for i in 0..COEFF_COUNT {
            assert_abs_diff_eq!(small_baked[i], big_baked[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn bake_requires_enough_directions() {
        let scene = Scene::new(Vec::new(), Vec::new()).unwrap();
        assert!(bake_visibility(&scene, vec3(0.0, 0.0, 0.0), 8).is_err());
        assert!(bake_visibility(&scene, vec3(0.0, 0.0, 0.0), 9).is_ok());
    }

    #[test]
    fn bake_is_deterministic() {
        let (vertices, indices) = sphere_mesh(vec3(0.0, 0.0, 0.0), 1.0, 24, 12);
        let scene = Scene::new(vertices, indices).unwrap();
        let point = vec3(1.4, 0.3, 0.2);
        let a = bake_visibility(&scene, point, 872).unwrap();
        let b = bake_visibility(&scene, point, 872).unwrap();
        for i in 0..COEFF_COUNT {
            assert_eq!(a[i].to_bits(), b[i].to_bits());
        }
    }

    #[test]
    fn constant_slot_stays_in_visible_fraction_range() {
        // The constant slot measures the visible fraction of the sphere,
        // so it lives in [0, 2 sqrt(pi)] up to lattice error.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let scene = random_soup(&mut rng, 40);
        for _ in 0..20 {
            let point =
                vec3(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
            let baked = bake_visibility(&scene, point, 872).unwrap();
            assert!(baked[0] >= -0.05 && baked[0] <= 2.0 * PI.sqrt() + 0.05);
        }
    }
}
