//! Real spherical harmonics through degree 2 (9 coefficients).
//!
//! Coefficients are stored in flat-index order `l*(l+1) + m`, zero-based:
//!
//! | slot | (l, m)  | basis function                  |
//! |------+---------+---------------------------------|
//! | 0    | (0,  0) | 1/2 sqrt(1/pi)                  |
//! | 1    | (1, -1) | sqrt(3/4pi) * y                 |
//! | 2    | (1,  0) | sqrt(3/4pi) * z                 |
//! | 3    | (1,  1) | sqrt(3/4pi) * x                 |
//! | 4    | (2, -2) | 1/2 sqrt(15/pi) * x*y           |
//! | 5    | (2, -1) | 1/2 sqrt(15/pi) * y*z           |
//! | 6    | (2,  0) | 1/4 sqrt(5/pi)  * (3z^2 - 1)    |
//! | 7    | (2,  1) | 1/2 sqrt(15/pi) * x*z           |
//! | 8    | (2,  2) | 1/4 sqrt(15/pi) * (x^2 - y^2)   |
//!
//! The basis is orthonormal over the unit sphere with the solid-angle
//! measure and carries no Condon-Shortley sign. The frame is right-handed
//! with `x = sin(theta) cos(phi)`, `y = sin(theta) sin(phi)`,
//! `z = cos(theta)`.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::{vec3, Vec3};

/// Number of coefficients for a degree-2 expansion.
pub const COEFF_COUNT: usize = 9;

/// Directions shorter than this are rejected as degenerate.
pub const MIN_DIRECTION_NORM: f64 = 1e-12;

// Basis normalization constants.
const C_00: f64 = 0.282_094_791_773_878_14; // 1/2 sqrt(1/pi)
const C_1: f64 = 0.488_602_511_902_919_9; // sqrt(3/(4 pi))
const C_2: f64 = 1.092_548_430_592_079_2; // 1/2 sqrt(15/pi)
const C_20: f64 = 0.315_391_565_252_520_05; // 1/4 sqrt(5/pi)
const C_22: f64 = 0.546_274_215_296_039_6; // 1/4 sqrt(15/pi)

/// A unit vector on the sphere. Construction normalizes and rejects
/// degenerate input, so a `Direction` is always safe to evaluate the basis
/// on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Direction(Vec3);

impl Direction {
    pub const PLUS_X: Direction = Direction(vec3(1.0, 0.0, 0.0));
    pub const PLUS_Y: Direction = Direction(vec3(0.0, 1.0, 0.0));
    pub const PLUS_Z: Direction = Direction(vec3(0.0, 0.0, 1.0));
    pub const MINUS_Z: Direction = Direction(vec3(0.0, 0.0, -1.0));

    /// Normalizes `(x, y, z)`. Errors if the vector is non-finite or
    /// shorter than [`MIN_DIRECTION_NORM`].
    pub fn new(x: f64, y: f64, z: f64) -> Result<Direction> {
        Direction::from_vec(vec3(x, y, z))
    }

    pub fn from_vec(v: Vec3) -> Result<Direction> {
        if !v.is_finite() {
            return Err(Error::Argument(format!(
                "direction components must be finite, got ({}, {}, {})",
                v.x, v.y, v.z
            )));
        }
        match v.normalized() {
            Some(u) => Ok(Direction(u)),
            None => Err(Error::Argument(format!(
                "degenerate direction: |({}, {}, {})| < {MIN_DIRECTION_NORM}",
                v.x, v.y, v.z
            ))),
        }
    }

    /// Spherical angles: `theta` is the polar angle from +z, `phi` the
    /// azimuth from +x toward +y.
    pub fn from_spherical(theta: f64, phi: f64) -> Direction {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Direction(vec3(st * cp, st * sp, ct))
    }

    pub fn x(self) -> f64 {
        self.0.x
    }

    pub fn y(self) -> f64 {
        self.0.y
    }

    pub fn z(self) -> f64 {
        self.0.z
    }

    pub fn vec(self) -> Vec3 {
        self.0
    }

    pub fn dot(self, rhs: Direction) -> f64 {
        self.0.dot(rhs.0)
    }
}

/// Evaluates all nine basis functions at `dir`.
pub fn basis(dir: Direction) -> [f64; COEFF_COUNT] {
    let (x, y, z) = (dir.x(), dir.y(), dir.z());
    [
        C_00,
        C_1 * y,
        C_1 * z,
        C_1 * x,
        C_2 * x * y,
        C_2 * y * z,
        C_20 * (3.0 * z * z - 1.0),
        C_2 * x * z,
        C_22 * (x * x - y * y),
    ]
}

/// Evaluates a single basis function. `index` is the zero-based flat index;
/// out-of-range indices are an argument error.
pub fn basis_component(index: usize, dir: Direction) -> Result<f64> {
    if index >= COEFF_COUNT {
        return Err(Error::Argument(format!("basis index {index} out of range 0..{COEFF_COUNT}")));
    }
    Ok(basis(dir)[index])
}

/// A degree-2 coefficient vector in flat-index order.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Sh9(pub [f64; COEFF_COUNT]);

impl Sh9 {
    pub const ZERO: Sh9 = Sh9([0.0; COEFF_COUNT]);

    /// Coefficients of the constant function `value` (only the degree-0
    /// slot is nonzero: `value * 2 sqrt(pi)`).
    pub fn constant(value: f64) -> Sh9 {
        let mut c = [0.0; COEFF_COUNT];
        c[0] = value / C_00; // value * 2 sqrt(pi)
        Sh9(c)
    }

    /// Reconstructs the represented function at `dir`.
    pub fn eval(&self, dir: Direction) -> f64 {
        let b = basis(dir);
        self.0.iter().zip(&b).map(|(c, y)| c * y).sum()
    }

    /// Coefficient-wise inner product. By orthonormality this equals the
    /// integral of the product of the two represented functions.
    pub fn dot(&self, rhs: &Sh9) -> f64 {
        let mut acc = 0.0;
        for i in 0..COEFF_COUNT {
            acc += self.0[i] * rhs.0[i];
        }
        acc
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scaled(&self, s: f64) -> Sh9 {
        let mut out = *self;
        for c in out.0.iter_mut() {
            *c *= s;
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

impl Index<usize> for Sh9 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Sh9 {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for Sh9 {
    type Output = Sh9;
    fn add(self, rhs: Sh9) -> Sh9 {
        let mut out = self;
        for i in 0..COEFF_COUNT {
            out.0[i] += rhs.0[i];
        }
        out
    }
}

impl Sub for Sh9 {
    type Output = Sh9;
    fn sub(self, rhs: Sh9) -> Sh9 {
        let mut out = self;
        for i in 0..COEFF_COUNT {
            out.0[i] -= rhs.0[i];
        }
        out
    }
}

impl Mul<f64> for Sh9 {
    type Output = Sh9;
    fn mul(self, rhs: f64) -> Sh9 {
        self.scaled(rhs)
    }
}

/// Compensated (Neumaier) accumulator; keeps quadrature sums accurate to a
/// few ulps regardless of sample count.
#[derive(Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.comp += (self.sum - t) + value;
        } else {
            self.comp += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn total(self) -> f64 {
        self.sum + self.comp
    }
}

/// A set of unit directions with a common solid-angle weight, used for
/// numerical integration over the sphere.
///
/// The deterministic constructor places samples on a spherical Fibonacci
/// lattice; the seeded constructor draws them uniformly at random. Both
/// weight every sample by `4 pi / count`.
#[derive(Clone, Debug)]
pub struct QuadratureSet {
    directions: Vec<Direction>,
    weight: f64,
}

impl QuadratureSet {
    /// Spherical Fibonacci lattice with `count` points. Deterministic:
    /// the same count always yields bitwise-identical directions.
    pub fn fibonacci(count: usize) -> Result<QuadratureSet> {
        if count == 0 {
            return Err(Error::Argument("quadrature sample count must be >= 1".into()));
        }
        // Golden angle pi * (3 - sqrt(5)); midpoint offsets in z avoid the
        // poles and give near-uniform cap areas.
        const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;
        let n = count as f64;
        let directions = (0..count)
            .map(|k| {
                let z = 1.0 - (2.0 * k as f64 + 1.0) / n;
                let r = (1.0 - z * z).max(0.0).sqrt();
                let (s, c) = (k as f64 * GOLDEN_ANGLE).sin_cos();
                Direction(vec3(r * c, r * s, z))
            })
            .collect();
        Ok(QuadratureSet { directions, weight: 4.0 * std::f64::consts::PI / n })
    }

    /// Uniform random directions from a seeded stream; reproducible for a
    /// given `(count, seed)` pair. Useful as an independent cross-check of
    /// the lattice.
    pub fn monte_carlo(count: usize, seed: u64) -> Result<QuadratureSet> {
        if count == 0 {
            return Err(Error::Argument("quadrature sample count must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let directions = (0..count)
            .map(|_| {
                let z: f64 = rng.gen_range(-1.0..=1.0);
                let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let r = (1.0 - z * z).max(0.0).sqrt();
                let (s, c) = phi.sin_cos();
                Direction(vec3(r * c, r * s, z))
            })
            .collect();
        Ok(QuadratureSet { directions, weight: 4.0 * std::f64::consts::PI / count as f64 })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    /// Solid-angle weight shared by every sample (`4 pi / count`).
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Integrates `f` over the sphere.
    pub fn integrate(&self, mut f: impl FnMut(Direction) -> f64) -> f64 {
        let mut acc = CompensatedSum::default();
        for &dir in &self.directions {
            acc.add(f(dir));
        }
        acc.total() * self.weight
    }

    /// Projects `f` onto the nine basis functions.
    pub fn project(&self, mut f: impl FnMut(Direction) -> f64) -> Sh9 {
        let mut acc = [CompensatedSum::default(); COEFF_COUNT];
        for &dir in &self.directions {
            let value = f(dir);
            let b = basis(dir);
            for i in 0..COEFF_COUNT {
                acc[i].add(value * b[i]);
            }
        }
        let mut out = [0.0; COEFF_COUNT];
        for i in 0..COEFF_COUNT {
            out[i] = acc[i].total() * self.weight;
        }
        Sh9(out)
    }
}
