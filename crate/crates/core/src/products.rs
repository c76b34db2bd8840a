//! Products of band-limited functions: the order-2 tripling tensor and the
//! double/triple product operations built on it.
//!
//! `T[i][j][k]` is the integral of the basis-function product
//! `Y_i * Y_j * Y_k` over the sphere. For degree <= 2 only 25 canonical
//! entries (up to index permutation) are nonzero; everything else vanishes
//! by parity or orthogonality. The closed forms below are cross-validated
//! against direct numerical integration every time the tensor is built —
//! a mismatch is a fatal construction error, so a silently wrong table
//! cannot propagate into renders.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::sh::{basis, QuadratureSet, Sh9, COEFF_COUNT};

/// Sample count for the construction-time numerical cross-check.
const VALIDATION_SAMPLES: usize = 64_000;
/// Tolerance for the cross-check, per entry.
const VALIDATION_TOLERANCE: f64 = 2e-3;

/// The symmetric rank-3 tensor of basis triple integrals.
///
/// Stored dense (9^3) for direct indexing plus a sparse list of the
/// nonzero ordered triples for fast contraction.
pub struct TriplingTensor {
    dense: Box<[f64; COEFF_COUNT * COEFF_COUNT * COEFF_COUNT]>,
    sparse: Vec<(u8, u8, u8, f64)>,
}

/// Canonical nonzero entries with `i <= j <= k`, zero-based.
fn canonical_entries() -> Vec<((usize, usize, usize), f64)> {
    use std::f64::consts::PI;
    let k0 = (1.0 / (4.0 * PI)).sqrt(); // pairs any slot with itself and the constant
    let k1 = (3.0 / (20.0 * PI)).sqrt();
    let k2 = (1.0 / (20.0 * PI)).sqrt();
    let k3 = (1.0 / (5.0 * PI)).sqrt();
    let k4 = (5.0 / PI).sqrt() / 7.0;
    let k5 = (5.0 / PI).sqrt() / 14.0;
    let k6 = (15.0 / PI).sqrt() / 14.0;
    vec![
        ((0, 0, 0), k0),
        ((0, 1, 1), k0),
        ((0, 2, 2), k0),
        ((0, 3, 3), k0),
        ((0, 4, 4), k0),
        ((0, 5, 5), k0),
        ((0, 6, 6), k0),
        ((0, 7, 7), k0),
        ((0, 8, 8), k0),
        // two degree-1 slots against a degree-2 slot
        ((1, 3, 4), k1),
        ((1, 2, 5), k1),
        ((1, 1, 6), -k2),
        ((2, 2, 6), k3),
        ((3, 3, 6), -k2),
        ((2, 3, 7), k1),
        ((1, 1, 8), -k1),
        ((3, 3, 8), k1),
        // three degree-2 slots
        ((4, 4, 6), -k4),
        ((5, 5, 6), k5),
        ((6, 6, 6), k4),
        ((4, 5, 7), k6),
        ((6, 7, 7), k5),
        ((5, 5, 8), -k6),
        ((6, 8, 8), -k4),
        ((7, 7, 8), k6),
    ]
}

fn dense_index(i: usize, j: usize, k: usize) -> usize {
    (i * COEFF_COUNT + j) * COEFF_COUNT + k
}

impl TriplingTensor {
    /// Builds and numerically validates the tensor. Prefer [`shared`]
    /// unless an owned instance is specifically needed.
    ///
    /// # Panics
    /// If any of the 729 entries disagrees with direct quadrature by more
    /// than the validation tolerance — that would mean the closed-form
    /// table itself is wrong, which no caller can recover from.
    ///
    /// [`shared`]: TriplingTensor::shared
    pub fn build() -> TriplingTensor {
        let tensor = TriplingTensor::build_unvalidated();
        tensor.validate();
        tensor
    }

    /// Process-wide cached instance (validated on first use).
    pub fn shared() -> &'static TriplingTensor {
        static SHARED: OnceLock<TriplingTensor> = OnceLock::new();
        SHARED.get_or_init(TriplingTensor::build)
    }

    fn build_unvalidated() -> TriplingTensor {
        let mut dense = vec![0.0; COEFF_COUNT * COEFF_COUNT * COEFF_COUNT].into_boxed_slice();
        let mut sparse = Vec::new();
        for ((i, j, k), value) in canonical_entries() {
            // Fill every distinct permutation; the tensor is fully
            // symmetric, so all six orderings share one value bitwise.
            let mut perms = [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)];
            perms.sort_unstable();
            let mut last = None;
            for &(a, b, c) in perms.iter() {
                if last == Some((a, b, c)) {
                    continue;
                }
                last = Some((a, b, c));
                dense[dense_index(a, b, c)] = value;
                sparse.push((a as u8, b as u8, c as u8, value));
            }
        }
        let dense: Box<[f64; COEFF_COUNT * COEFF_COUNT * COEFF_COUNT]> =
            dense.try_into().expect("dense tensor has fixed size");
        TriplingTensor { dense, sparse }
    }

    /// Compares every entry against quadrature of `Y_i Y_j Y_k`.
    fn validate(&self) {
        let quad = QuadratureSet::fibonacci(VALIDATION_SAMPLES)
            .expect("validation sample count is positive");
        let mut numeric = vec![0.0; COEFF_COUNT * COEFF_COUNT * COEFF_COUNT];
        for &dir in quad.directions() {
            let b = basis(dir);
            for i in 0..COEFF_COUNT {
                for j in i..COEFF_COUNT {
                    let bij = b[i] * b[j];
                    for k in j..COEFF_COUNT {
                        numeric[dense_index(i, j, k)] += bij * b[k];
                    }
                }
            }
        }
        for i in 0..COEFF_COUNT {
            for j in i..COEFF_COUNT {
                for k in j..COEFF_COUNT {
                    let integral = numeric[dense_index(i, j, k)] * quad.weight();
                    let table = self.dense[dense_index(i, j, k)];
                    assert!(
                        (integral - table).abs() <= VALIDATION_TOLERANCE,
                        "tripling tensor entry ({i}, {j}, {k}) = {table} disagrees with \
                         numerical integration {integral}; the closed-form table is wrong"
                    );
                }
            }
        }
    }

    /// Entry lookup; indices are zero-based flat indices.
    pub fn get(&self, i: usize, j: usize, k: usize) -> Result<f64> {
        if i >= COEFF_COUNT || j >= COEFF_COUNT || k >= COEFF_COUNT {
            return Err(Error::Argument(format!(
                "tripling index ({i}, {j}, {k}) out of range 0..{COEFF_COUNT}"
            )));
        }
        Ok(self.dense[dense_index(i, j, k)])
    }

    /// All nonzero ordered entries `(i, j, k, value)`.
    pub fn nonzeros(&self) -> &[(u8, u8, u8, f64)] {
        &self.sparse
    }
}

/// Integral of the product of two band-limited functions; by
/// orthonormality this is the coefficient dot product.
pub fn double_product(f: &Sh9, g: &Sh9) -> f64 {
    f.dot(g)
}

/// Coefficients of the (band-limited projection of the) pointwise product
/// `f * g`: `e_i = sum_jk f_j g_k T[i][j][k]`.
pub fn product_coeffs(f: &Sh9, g: &Sh9, t: &TriplingTensor) -> Sh9 {
    let mut out = Sh9::ZERO;
    for &(i, j, k, value) in t.nonzeros() {
        out.0[i as usize] += value * f.0[j as usize] * g.0[k as usize];
    }
    out
}

/// Integral of the product of three band-limited functions:
/// `sum_i h_i sum_jk f_j g_k T[i][j][k]`. Exact (up to rounding) when all
/// three inputs are degree <= 2.
pub fn triple_product(h: &Sh9, f: &Sh9, g: &Sh9, t: &TriplingTensor) -> f64 {
    let mut acc = 0.0;
    for &(i, j, k, value) in t.nonzeros() {
        acc += value * h.0[i as usize] * f.0[j as usize] * g.0[k as usize];
    }
    acc
}
