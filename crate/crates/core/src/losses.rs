//! Evaluation losses over decomposed scenes.
//!
//! Everything here is pure measurement: given estimated and reference
//! intrinsics (albedo, normal, visibility per pixel) plus estimated and
//! reference lights, compute the scalar losses a trainer would descend.
//! No optimizer lives in this crate — the losses exist so that estimates
//! produced elsewhere can be scored reproducibly.
//!
//! All masked means average over foreground pixels *and* channels (three
//! for albedo, normals and radiance, nine for visibility coefficients),
//! so single-pixel examples have exact closed forms. The foreground set
//! is taken from the reference map's own mask.

use crate::error::{Error, Result};
use crate::products::TriplingTensor;
use crate::render::{render_image, render_pixel, IlluminationRgb, IntrinsicsMap, PixelIntrinsics};
use crate::sh::{QuadratureSet, COEFF_COUNT};

/// Weights of the regularizing terms in a stage total.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    /// Weight of the normal loss (λ_n).
    pub normal: f64,
    /// Weight of the visibility loss (λ_v).
    pub visibility: f64,
    /// Weight of the illumination loss (λ_L).
    pub illumination: f64,
}

impl Default for LossWeights {
    fn default() -> LossWeights {
        LossWeights { normal: 0.2, visibility: 0.2, illumination: 0.01 }
    }
}

/// Masked mean-squared errors of the per-pixel factors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComponentLosses {
    pub albedo: f64,
    pub normal: f64,
    pub visibility: f64,
}

/// Which factors of the radiance product come from the estimate when
/// rendering the reconstruction; the rest come from the reference.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReconstructionVariant {
    /// Estimated albedo only.
    Albedo,
    /// Estimated normals only.
    Normal,
    /// Estimated visibility only.
    Visibility,
    /// Estimated light only.
    Illumination,
    /// Estimated albedo, normals and light together; visibility is held
    /// at the reference ("treated as constant").
    AlbedoNormalIllumination,
}

impl ReconstructionVariant {
    /// The univariate variants in their conventional order.
    pub const UNIVARIATE: [ReconstructionVariant; 4] = [
        ReconstructionVariant::Albedo,
        ReconstructionVariant::Normal,
        ReconstructionVariant::Visibility,
        ReconstructionVariant::Illumination,
    ];

    /// Whether a trainer consuming this loss is expected to stop
    /// gradients into the visibility factor. Purely descriptive here:
    /// the numeric value never differentiates anything.
    pub fn blocks_visibility_gradient(self) -> bool {
        self == ReconstructionVariant::AlbedoNormalIllumination
    }

    fn uses_estimated_light(self) -> bool {
        matches!(
            self,
            ReconstructionVariant::Illumination | ReconstructionVariant::AlbedoNormalIllumination
        )
    }
}

/// Training stage whose total is being evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    /// First stage: all four univariate reconstruction terms.
    Synthetic,
    /// Second stage: the single three-variate reconstruction term.
    Real,
}

/// Full breakdown of a stage total.
#[derive(Clone, Debug)]
pub struct StageLosses {
    /// Reconstruction terms in evaluation order.
    pub reconstruction: Vec<(ReconstructionVariant, f64)>,
    pub components: ComponentLosses,
    pub illumination: f64,
    /// Weighted sum of every term above.
    pub total: f64,
}

fn check_same_shape(est: &IntrinsicsMap, gt: &IntrinsicsMap) -> Result<()> {
    if est.width != gt.width || est.height != gt.height {
        return Err(Error::Dimension(format!(
            "estimate is {}x{}, reference is {}x{}",
            est.width, est.height, gt.width, gt.height
        )));
    }
    Ok(())
}

/// Iterates foreground pixel pairs, erroring when the reference mask is
/// empty.
fn foreground_pairs<'a>(
    est: &'a IntrinsicsMap,
    gt: &'a IntrinsicsMap,
) -> Result<Vec<(&'a PixelIntrinsics, &'a PixelIntrinsics)>> {
    check_same_shape(est, gt)?;
    let pairs: Vec<_> = est.pixels.iter().zip(&gt.pixels).filter(|(_, g)| !g.masked).collect();
    if pairs.is_empty() {
        return Err(Error::Argument("reference mask has no foreground pixels".into()));
    }
    Ok(pairs)
}

/// Masked MSE of albedo, normal, and visibility against the reference.
///
/// Normals enter as unit vectors (the `Direction` type guarantees that),
/// so the normal loss is the squared chord distance averaged over the
/// three components.
pub fn component_losses(est: &IntrinsicsMap, gt: &IntrinsicsMap) -> Result<ComponentLosses> {
    let pairs = foreground_pairs(est, gt)?;
    let count = pairs.len() as f64;
    let mut albedo = 0.0;
    let mut normal = 0.0;
    let mut visibility = 0.0;
    for (e, g) in pairs {
        for c in 0..3 {
            let d = e.albedo[c] - g.albedo[c];
            albedo += d * d;
        }
        let dn = e.normal.vec() - g.normal.vec();
        normal += dn.dot(dn);
        for i in 0..COEFF_COUNT {
            let d = e.visibility[i] - g.visibility[i];
            visibility += d * d;
        }
    }
    Ok(ComponentLosses {
        albedo: albedo / (3.0 * count),
        normal: normal / (3.0 * count),
        visibility: visibility / (COEFF_COUNT as f64 * count),
    })
}

/// MSE of the two lights' values over uniformly sampled directions,
/// averaged over directions and channels.
pub fn illumination_loss(
    est: &IlluminationRgb,
    gt: &IlluminationRgb,
    sample_count: usize,
) -> Result<f64> {
    let quad = QuadratureSet::fibonacci(sample_count)?;
    let mut sum = 0.0;
    for &dir in quad.directions() {
        for c in 0..3 {
            let d = est.channels[c].eval(dir) - gt.channels[c].eval(dir);
            sum += d * d;
        }
    }
    Ok(sum / (3.0 * quad.len() as f64))
}

/// Masked MSE between the reference render and the render with the
/// variant's factors swapped in from the estimate.
///
/// The reference image is the render of the reference intrinsics under
/// the reference light, so perfect estimates give exactly zero.
pub fn reconstruction_loss(
    variant: ReconstructionVariant,
    est: &IntrinsicsMap,
    gt: &IntrinsicsMap,
    light_est: &IlluminationRgb,
    light_gt: &IlluminationRgb,
    tensor: &TriplingTensor,
) -> Result<f64> {
    check_same_shape(est, gt)?;
    let reference = render_image(gt, light_gt, tensor);
    let light = if variant.uses_estimated_light() { light_est } else { light_gt };

    let mut sum = 0.0;
    let mut count = 0usize;
    for (index, (e, g)) in est.pixels.iter().zip(&gt.pixels).enumerate() {
        if g.masked {
            continue;
        }
        count += 1;
        let composed =
            PixelIntrinsics {
                albedo: match variant {
                    ReconstructionVariant::Albedo
                    | ReconstructionVariant::AlbedoNormalIllumination => e.albedo,
                    _ => g.albedo,
                },
                normal: match variant {
                    ReconstructionVariant::Normal
                    | ReconstructionVariant::AlbedoNormalIllumination => e.normal,
                    _ => g.normal,
                },
                visibility: match variant {
                    ReconstructionVariant::Visibility => e.visibility,
                    _ => g.visibility,
                },
                masked: false,
            };
        let rendered = render_pixel(&composed, light, tensor);
        let wanted = reference.pixels[index];
        for c in 0..3 {
            let d = rendered[c] - wanted[c];
            sum += d * d;
        }
    }
    if count == 0 {
        return Err(Error::Argument("reference mask has no foreground pixels".into()));
    }
    Ok(sum / (3.0 * count as f64))
}

/// Direction count used for the illumination term inside [`total_loss`].
const TOTAL_LOSS_ILLUMINATION_SAMPLES: usize = 8_000;

/// Evaluates a stage's full training objective:
/// reconstruction terms + E_ρ + λ_n·E_n + λ_v·E_v + λ_L·E_L.
pub fn total_loss(
    stage: Stage,
    est: &IntrinsicsMap,
    gt: &IntrinsicsMap,
    light_est: &IlluminationRgb,
    light_gt: &IlluminationRgb,
    weights: &LossWeights,
    tensor: &TriplingTensor,
) -> Result<StageLosses> {
    if weights.normal < 0.0 || weights.visibility < 0.0 || weights.illumination < 0.0 {
        return Err(Error::Argument(format!("loss weights must be nonnegative, got {weights:?}")));
    }
    let variants: &[ReconstructionVariant] = match stage {
        Stage::Synthetic => &ReconstructionVariant::UNIVARIATE,
        Stage::Real => &[ReconstructionVariant::AlbedoNormalIllumination],
    };
    let mut reconstruction = Vec::with_capacity(variants.len());
    for &variant in variants {
        let value = reconstruction_loss(variant, est, gt, light_est, light_gt, tensor)?;
        reconstruction.push((variant, value));
    }
    let components = component_losses(est, gt)?;
    let illumination = illumination_loss(light_est, light_gt, TOTAL_LOSS_ILLUMINATION_SAMPLES)?;
    let total = reconstruction.iter().map(|(_, v)| v).sum::<f64>()
        + components.albedo
        + weights.normal * components.normal
        + weights.visibility * components.visibility
        + weights.illumination * illumination;
    Ok(StageLosses { reconstruction, components, illumination, total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{generate_sphere_scene, SphereSceneConfig};
    use crate::sh::{Direction, Sh9};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tensor() -> &'static TriplingTensor {
        TriplingTensor::shared()
    }

    fn test_scene(size: usize) -> IntrinsicsMap {
        generate_sphere_scene(&SphereSceneConfig { image_size: size, ..Default::default() })
            .unwrap()
            .intrinsics
    }

    fn test_light(seed: u64) -> IlluminationRgb {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        IlluminationRgb {
            channels: std::array::from_fn(|_| {
                Sh9::constant(1.0) + Sh9(std::array::from_fn(|_| rng.gen_range(-0.2..0.2)))
            }),
        }
    }

    /// One foreground pixel with fixed intrinsics.
    fn single_pixel(albedo: [f64; 3]) -> IntrinsicsMap {
        let mut map = IntrinsicsMap::filled_background(1, 1);
        *map.pixel_mut(0, 0) =
            PixelIntrinsics::surface(albedo, Direction::PLUS_Z, Sh9::constant(1.0));
        map
    }

    #[test]
    fn default_weights_match_training_setup() {
        let w = LossWeights::default();
        assert_eq!((w.normal, w.visibility, w.illumination), (0.2, 0.2, 0.01));
    }

    #[test]
    fn perfect_estimates_zero_every_loss() {
        let gt = test_scene(8);
        let light = test_light(1);
        let c = component_losses(&gt, &gt).unwrap();
        assert_eq!((c.albedo, c.normal, c.visibility), (0.0, 0.0, 0.0));
        assert_eq!(illumination_loss(&light, &light, 512).unwrap(), 0.0);
        for variant in ReconstructionVariant::UNIVARIATE {
            assert_eq!(
                reconstruction_loss(variant, &gt, &gt, &light, &light, tensor()).unwrap(),
                0.0
            );
        }
        for stage in [Stage::Synthetic, Stage::Real] {
            let losses =
                total_loss(stage, &gt, &gt, &light, &light, &LossWeights::default(), tensor())
                    .unwrap();
            assert_eq!(losses.total, 0.0);
        }
    }

    #[test]
    fn single_pixel_albedo_offset_has_the_pinned_value() {
        // 0.5² spread over the three-channel mean: 0.25/3.
        let gt = single_pixel([0.6, 0.6, 0.6]);
        let est = single_pixel([0.6 + 0.5, 0.6, 0.6]);
        let c = component_losses(&est, &gt).unwrap();
        assert_abs_diff_eq!(c.albedo, 0.25 / 3.0, epsilon = 1e-15);
        assert_eq!(c.normal, 0.0);
        assert_eq!(c.visibility, 0.0);
    }

    #[test]
    fn masked_pixels_do_not_contribute() {
        let mut gt = IntrinsicsMap::filled_background(2, 1);
        *gt.pixel_mut(0, 0) =
            PixelIntrinsics::surface([0.5; 3], Direction::PLUS_Z, Sh9::constant(1.0));
        let mut est = gt.clone();
        // Differ only at the background pixel.
        *est.pixel_mut(1, 0) =
            PixelIntrinsics::surface([0.9; 3], Direction::PLUS_X, Sh9::constant(0.5));
        let c = component_losses(&est, &gt).unwrap();
        assert_eq!((c.albedo, c.normal, c.visibility), (0.0, 0.0, 0.0));
    }

    #[test]
    fn empty_mask_is_rejected() {
        let empty = IntrinsicsMap::filled_background(2, 2);
        assert!(matches!(component_losses(&empty, &empty), Err(Error::Argument(_))));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let a = single_pixel([0.5; 3]);
        let b = IntrinsicsMap::filled_background(2, 2);
        assert!(matches!(component_losses(&a, &b), Err(Error::Dimension(_))));
        assert!(matches!(
            reconstruction_loss(
                ReconstructionVariant::Albedo,
                &a,
                &b,
                &IlluminationRgb::ZERO,
                &IlluminationRgb::ZERO,
                tensor()
            ),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn constant_illumination_offset_has_closed_form() {
        // A constant-slot offset δ shifts the evaluated light by δ·Y_0
        // everywhere, so the MSE is δ²/(4π) in every channel.
        let gt = test_light(2);
        let delta = 0.3;
        let mut est = gt;
        for channel in &mut est.channels {
            channel[0] += delta;
        }
        let loss = illumination_loss(&est, &gt, 4_096).unwrap();
        assert_abs_diff_eq!(loss, delta * delta / (4.0 * std::f64::consts::PI), epsilon = 1e-12);
    }

    #[test]
    fn illumination_loss_is_invariant_under_joint_rotation() {
        use crate::illumination::rotate_illumination;
        let est = test_light(3);
        let gt = test_light(4);
        let baseline = illumination_loss(&est, &gt, 64_000).unwrap();
        let (alpha, beta, gamma) = (0.9, 1.7, -2.3);
        let spin = |l: &IlluminationRgb| IlluminationRgb {
            channels: std::array::from_fn(|c| {
                rotate_illumination(&l.channels[c], alpha, beta, gamma).unwrap()
            }),
        };
        let rotated = illumination_loss(&spin(&est), &spin(&gt), 64_000).unwrap();
        assert_abs_diff_eq!(baseline, rotated, epsilon = 1e-6);
    }

    #[test]
    fn halving_albedo_quarters_the_reference_energy() {
        let gt = test_scene(8);
        let light = test_light(5);
        let mut est = gt.clone();
        for p in &mut est.pixels {
            for c in &mut p.albedo {
                *c *= 0.5;
            }
        }
        // Radiance is linear in albedo, so the residual is half the
        // reference image and the MSE is a quarter of its mean square.
        let reference = render_image(&gt, &light, tensor());
        let mut mean_sq = 0.0;
        let mut count = 0;
        for (pixel, radiance) in gt.pixels.iter().zip(&reference.pixels) {
            if pixel.masked {
                continue;
            }
            count += 1;
            for &v in radiance {
                mean_sq += v * v;
            }
        }
        mean_sq /= 3.0 * count as f64;
        let loss =
            reconstruction_loss(ReconstructionVariant::Albedo, &est, &gt, &light, &light, tensor())
                .unwrap();
        assert_abs_diff_eq!(loss, mean_sq / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn variants_react_only_to_their_own_factor() {
        let gt = test_scene(8);
        let light = test_light(6);
        let tilt = |n: Direction| Direction::new(n.x() + 0.2, n.y(), n.z()).unwrap();

        let mut normal_est = gt.clone();
        for p in &mut normal_est.pixels {
            if !p.masked {
                p.normal = tilt(p.normal);
            }
        }
        let loss_of = |variant, est: &IntrinsicsMap| {
            reconstruction_loss(variant, est, &gt, &light, &light, tensor()).unwrap()
        };
        assert_eq!(loss_of(ReconstructionVariant::Albedo, &normal_est), 0.0);
        assert!(loss_of(ReconstructionVariant::Normal, &normal_est) > 1e-6);
        assert_eq!(loss_of(ReconstructionVariant::Visibility, &normal_est), 0.0);
        assert_eq!(loss_of(ReconstructionVariant::Illumination, &normal_est), 0.0);
        assert!(loss_of(ReconstructionVariant::AlbedoNormalIllumination, &normal_est) > 1e-6);

        // Perturbing only visibility leaves the three-variate loss at
        // zero: that variant pins visibility to the reference.
        let mut vis_est = gt.clone();
        for p in &mut vis_est.pixels {
            if !p.masked {
                p.visibility[0] *= 0.7;
            }
        }
        assert!(loss_of(ReconstructionVariant::Visibility, &vis_est) > 1e-6);
        assert_eq!(loss_of(ReconstructionVariant::AlbedoNormalIllumination, &vis_est), 0.0);
    }

    #[test]
    fn only_the_three_variate_variant_blocks_visibility_gradients() {
        for variant in ReconstructionVariant::UNIVARIATE {
            assert!(!variant.blocks_visibility_gradient());
        }
        assert!(ReconstructionVariant::AlbedoNormalIllumination.blocks_visibility_gradient());
    }

    #[test]
    fn totals_are_exact_weighted_sums() {
        let gt = test_scene(8);
        let light_gt = test_light(7);
        let light_est = test_light(8);
        let mut est = gt.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for p in &mut est.pixels {
            if !p.masked {
                p.albedo[0] = (p.albedo[0] + rng.gen_range(-0.1..0.1)).clamp(0.0, 1.0);
                p.visibility[0] *= rng.gen_range(0.8..1.2);
            }
        }
        let weights = LossWeights::default();
        for (stage, term_count) in [(Stage::Synthetic, 4), (Stage::Real, 1)] {
            let losses =
                total_loss(stage, &est, &gt, &light_est, &light_gt, &weights, tensor()).unwrap();
            assert_eq!(losses.reconstruction.len(), term_count);
            let hand_sum = losses.reconstruction.iter().map(|(_, v)| v).sum::<f64>()
                + losses.components.albedo
                + weights.normal * losses.components.normal
                + weights.visibility * losses.components.visibility
                + weights.illumination * losses.illumination;
            assert_abs_diff_eq!(losses.total, hand_sum, epsilon = 1e-12);
            assert!(losses.total > 0.0);

            // Doubling λ_L adds exactly one more λ_L·E_L.
            let heavier = LossWeights { illumination: 2.0 * weights.illumination, ..weights };
            let doubled =
                total_loss(stage, &est, &gt, &light_est, &light_gt, &heavier, tensor()).unwrap();
            assert_abs_diff_eq!(
                doubled.total - losses.total,
                weights.illumination * losses.illumination,
                epsilon = 1e-12
            );
        }
        assert!(matches!(
            total_loss(
                Stage::Real,
                &est,
                &gt,
                &light_est,
                &light_gt,
                &LossWeights { normal: -0.1, ..weights },
                tensor()
            ),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn uniform_error_is_mask_size_invariant() {
        // A constant per-pixel error has the same MSE no matter how many
        // pixels the mask keeps.
        let base = PixelIntrinsics::surface([0.5; 3], Direction::PLUS_Z, Sh9::constant(1.0));
        let offset = PixelIntrinsics { albedo: [0.7; 3], ..base };
        let build = |foreground: usize| {
            let mut gt = IntrinsicsMap::filled_background(4, 1);
            let mut est = IntrinsicsMap::filled_background(4, 1);
            for x in 0..foreground {
                *gt.pixel_mut(x, 0) = base;
                *est.pixel_mut(x, 0) = offset;
            }
            (est, gt)
        };
        let (est_wide, gt_wide) = build(4);
        let (est_narrow, gt_narrow) = build(1);
        let wide = component_losses(&est_wide, &gt_wide).unwrap();
        let narrow = component_losses(&est_narrow, &gt_narrow).unwrap();
        assert_abs_diff_eq!(wide.albedo, narrow.albedo, epsilon = 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn component_losses_are_nonnegative_and_symmetric(
            a in prop::array::uniform3(0.0..1.0f64),
            b in prop::array::uniform3(0.0..1.0f64),
            va in -1.0..1.0f64,
            vb in -1.0..1.0f64,
        ) {
            let mut est = single_pixel(a);
            let mut gt = single_pixel(b);
            est.pixel_mut(0, 0).visibility[3] = va;
            gt.pixel_mut(0, 0).visibility[3] = vb;
            let fwd = component_losses(&est, &gt).unwrap();
            let rev = component_losses(&gt, &est).unwrap();
            prop_assert!(fwd.albedo >= 0.0 && fwd.normal >= 0.0 && fwd.visibility >= 0.0);
            prop_assert!((fwd.albedo - rev.albedo).abs() < 1e-15);
            prop_assert!((fwd.visibility - rev.visibility).abs() < 1e-15);
        }
    }
}
