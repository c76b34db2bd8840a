//! `shlight`: command-line front end for the spherical-harmonic lighting
//! toolkit. One subcommand per pipeline step — render, bake, recover,
//! project, rotate, loss, gradcheck — with a stable exit-code contract
//! for scripting: 0 success, 1 I/O failure, 2 invalid input, 3 numerical
//! failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use shlight::{
    assemble_intrinsics, bake_visibility_with, clamp_nonnegative, export_display,
    project_environment_map, read_coefficients, read_obj, read_pfm, read_points,
    recover_illumination, render_gradients, render_image, render_pixel, render_shading,
    rotate_coeffs, scale_intensity, total_loss, vec3, write_coefficients, write_pfm, zyz_rotation,
    Direction, Error, FloatImage, IlluminationRgb, IntrinsicsMap, LossWeights, PixelIntrinsics,
    QuadratureSet, ReconstructionVariant, Result, Scene, Sh9, Stage, TriplingTensor, COEFF_COUNT,
    DEFAULT_RECOVERY_SAMPLES,
};

#[derive(Parser)]
#[command(name = "shlight", version, about = "Spherical-harmonic lighting toolkit")]
struct Cli {
    /// Seed for any randomized subcommand; everything else is
    /// deterministic regardless.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a radiance map from albedo, normals, visibility, and light.
    Render(RenderArgs),
    /// Bake visibility coefficients at sample points against a mesh.
    Bake(BakeArgs),
    /// Recover incident light from shading coefficients.
    RecoverLight(RecoverLightArgs),
    /// Project a latitude-longitude environment map onto coefficients.
    Project(ProjectArgs),
    /// Rotate coefficient vectors by ZYZ Euler angles.
    Rotate(RotateArgs),
    /// Evaluate a training-stage loss between estimated and reference maps.
    Loss(LossArgs),
    /// Compare analytic render gradients against central differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct RenderArgs {
    /// Albedo map (3-channel PFM).
    #[arg(long)]
    albedo: PathBuf,
    /// Normal map (3-channel PFM, components stored as (n+1)/2).
    #[arg(long)]
    normal: PathBuf,
    /// Visibility coefficients: one line per pixel (row-major) or a
    /// single line broadcast to every pixel.
    #[arg(long)]
    vis: PathBuf,
    /// Light coefficients, exactly three lines (red, green, blue).
    #[arg(long)]
    light: PathBuf,
    /// Foreground mask (1-channel PFM; values above 0.5 are foreground).
    #[arg(long)]
    mask: PathBuf,
    /// Output radiance map (3-channel PFM).
    #[arg(long)]
    out: PathBuf,
    /// Also write the shading map (radiance before the albedo factor).
    #[arg(long)]
    shading_out: Option<PathBuf>,
    /// Also write a gamma-encoded 8-bit preview (.png or .ppm).
    #[arg(long)]
    display_out: Option<PathBuf>,
    /// Display gamma for --display-out.
    #[arg(long, default_value_t = 2.2)]
    gamma: f64,
    /// Scale the light so the brightest rendered channel equals this
    /// value (must lie in 0.8..=1.0) before rendering.
    #[arg(long)]
    normalize_shading: Option<f64>,
}

#[derive(Args)]
struct BakeArgs {
    /// Occluder mesh (ASCII OBJ, triangles only).
    #[arg(long)]
    mesh: PathBuf,
    /// Sample points: lines of `px py pz nx ny nz`.
    #[arg(long)]
    points: PathBuf,
    /// Directions per point.
    #[arg(long, default_value_t = 872)]
    count: usize,
    /// Output coefficient file, one line per point.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RecoverLightArgs {
    /// Shading coefficients, recovered line by line.
    #[arg(long)]
    shading: PathBuf,
    /// Output light coefficients, one line per input line.
    #[arg(long)]
    out: PathBuf,
    /// Clamp the recovered light to be non-negative (recover-then-clamp).
    #[arg(long)]
    clamp: bool,
    /// Clamp the shading before recovery instead (clamp-then-recover).
    #[arg(long)]
    clamp_input: bool,
    /// Lattice directions for the least-squares system and any clamping.
    #[arg(long, default_value_t = DEFAULT_RECOVERY_SAMPLES)]
    samples: usize,
}

#[derive(Args)]
struct ProjectArgs {
    /// Equirectangular radiance map (1- or 3-channel PFM).
    #[arg(long)]
    envmap: PathBuf,
    /// Output coefficient file, one line per channel.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RotateArgs {
    /// Input coefficient file; every line is rotated.
    #[arg(long)]
    coeffs: PathBuf,
    /// First rotation about z, radians.
    #[arg(long)]
    alpha: f64,
    /// Rotation about y, radians.
    #[arg(long)]
    beta: f64,
    /// Final rotation about z, radians.
    #[arg(long)]
    gamma: f64,
    /// Output coefficient file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    /// All four single-factor reconstruction terms.
    Synthetic,
    /// The single albedo+normal+illumination reconstruction term.
    Real,
}

#[derive(Args)]
struct LossArgs {
    #[arg(long, value_enum)]
    stage: StageArg,
    /// Estimated maps.
    #[arg(long)]
    est_albedo: PathBuf,
    #[arg(long)]
    est_normal: PathBuf,
    #[arg(long)]
    est_vis: PathBuf,
    #[arg(long)]
    est_light: PathBuf,
    /// Reference maps.
    #[arg(long)]
    gt_albedo: PathBuf,
    #[arg(long)]
    gt_normal: PathBuf,
    #[arg(long)]
    gt_vis: PathBuf,
    #[arg(long)]
    gt_light: PathBuf,
    /// Shared foreground mask (1-channel PFM).
    #[arg(long)]
    mask: PathBuf,
    /// Weight of the normal term.
    #[arg(long, default_value_t = 0.2)]
    weight_normal: f64,
    /// Weight of the visibility term.
    #[arg(long, default_value_t = 0.2)]
    weight_vis: f64,
    /// Weight of the illumination term.
    #[arg(long, default_value_t = 0.01)]
    weight_light: f64,
    /// Emit the breakdown as a JSON object instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Random shading configurations to test.
    #[arg(long, default_value_t = 100)]
    trials: u32,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    /// Emit the result as a JSON object instead of text.
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// 1 for I/O failures, 2 for anything wrong with the inputs, 3 for
/// numerical failures.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => 1,
        Error::Argument(_) | Error::Dimension(_) | Error::Format { .. } => 2,
        Error::Numerical(_) => 3,
    }
}

fn run(cli: &Cli) -> Result<()> {
    let tensor = TriplingTensor::shared();
    match &cli.command {
        Command::Render(args) => cmd_render(args, tensor),
        Command::Bake(args) => cmd_bake(args),
        Command::RecoverLight(args) => cmd_recover_light(args),
        Command::Project(args) => cmd_project(args),
        Command::Rotate(args) => cmd_rotate(args),
        Command::Loss(args) => cmd_loss(args, tensor),
        Command::Gradcheck(args) => cmd_gradcheck(args, cli.seed, tensor),
    }
}

/// Reads a three-line coefficient file as an RGB light.
fn read_light(path: &Path) -> Result<IlluminationRgb> {
    let lines = read_coefficients(path)?;
    let channels: [Sh9; 3] = lines.try_into().map_err(|lines: Vec<Sh9>| {
        Error::Dimension(format!(
            "light file {} has {} coefficient lines; need exactly 3",
            path.display(),
            lines.len()
        ))
    })?;
    Ok(IlluminationRgb { channels })
}

/// Reads and assembles one intrinsics map from its on-disk pieces.
fn read_intrinsics(
    albedo: &Path,
    normal: &Path,
    vis: &Path,
    mask: &FloatImage,
) -> Result<IntrinsicsMap> {
    let albedo = read_pfm(albedo)?;
    let normal = read_pfm(normal)?;
    let visibility = read_coefficients(vis)?;
    assemble_intrinsics(&albedo, &normal, &visibility, mask)
}

fn cmd_render(args: &RenderArgs, tensor: &TriplingTensor) -> Result<()> {
    let mask = read_pfm(&args.mask)?;
    let map = read_intrinsics(&args.albedo, &args.normal, &args.vis, &mask)?;
    let mut light = read_light(&args.light)?;
    if let Some(target) = args.normalize_shading {
        light = scale_intensity(&light, &map, target, tensor)?;
    }

    let radiance = render_image(&map, &light, tensor);
    let image = shlight::radiance_to_image(&radiance);
    write_pfm(&args.out, &image)?;
    println!("wrote {}x{} radiance map to {}", map.width, map.height, args.out.display());

    if let Some(path) = &args.shading_out {
        let mut shading = FloatImage::zeros(map.width, map.height, 3)?;
        for (index, pixel) in map.pixels.iter().enumerate() {
            if pixel.masked {
                continue;
            }
            let s = render_shading(pixel.normal, &pixel.visibility, &light, tensor);
            for (c, value) in s.iter().enumerate() {
                shading.data[index * 3 + c] = *value as f32;
            }
        }
        write_pfm(path, &shading)?;
        println!("wrote shading map to {}", path.display());
    }
    if let Some(path) = &args.display_out {
        export_display(&image, args.gamma, path)?;
        println!("wrote display preview to {}", path.display());
    }
    Ok(())
}

fn cmd_bake(args: &BakeArgs) -> Result<()> {
    if args.count < COEFF_COUNT {
        return Err(Error::Argument(format!(
            "visibility bake needs at least {COEFF_COUNT} directions, got {}",
            args.count
        )));
    }
    let (vertices, faces) = read_obj(&args.mesh)?;
    let points = read_points(&args.points)?;
    let scene = Scene::new(vertices, faces)?;
    let quad = QuadratureSet::fibonacci(args.count)?;
    let lines: Vec<Sh9> =
        points.iter().map(|p| bake_visibility_with(&scene, p.position, &quad)).collect();
    write_coefficients(&args.out, &lines)?;
    println!(
        "baked {} point(s) at {} directions to {}",
        lines.len(),
        args.count,
        args.out.display()
    );
    Ok(())
}

fn cmd_recover_light(args: &RecoverLightArgs) -> Result<()> {
    let lines = read_coefficients(&args.shading)?;
    let mut out = Vec::with_capacity(lines.len());
    for (index, line) in lines.iter().enumerate() {
        let shading = if args.clamp_input { clamp_nonnegative(line, args.samples)? } else { *line };
        let recovered = recover_illumination(&shading, args.samples)?;
        println!("line {index}: rms residual {:.3e}", recovered.rms_residual);
        let light = if args.clamp {
            clamp_nonnegative(&recovered.light, args.samples)?
        } else {
            recovered.light
        };
        out.push(light);
    }
    write_coefficients(&args.out, &out)?;
    println!("wrote {} light line(s) to {}", out.len(), args.out.display());
    Ok(())
}

fn cmd_project(args: &ProjectArgs) -> Result<()> {
    let envmap = read_pfm(&args.envmap)?;
    let channels = project_environment_map(&envmap)?;
    write_coefficients(&args.out, &channels)?;
    println!("projected {} channel(s) to {}", channels.len(), args.out.display());
    Ok(())
}

fn cmd_rotate(args: &RotateArgs) -> Result<()> {
    let rotation = zyz_rotation(args.alpha, args.beta, args.gamma)?;
    let lines = read_coefficients(&args.coeffs)?;
    let rotated: Vec<Sh9> = lines.iter().map(|c| rotate_coeffs(&rotation, c)).collect();
    write_coefficients(&args.out, &rotated)?;
    println!("rotated {} line(s) to {}", rotated.len(), args.out.display());
    Ok(())
}

fn variant_name(variant: ReconstructionVariant) -> &'static str {
    match variant {
        ReconstructionVariant::Albedo => "albedo",
        ReconstructionVariant::Normal => "normal",
        ReconstructionVariant::Visibility => "visibility",
        ReconstructionVariant::Illumination => "illumination",
        ReconstructionVariant::AlbedoNormalIllumination => "albedo-normal-illumination",
    }
}

fn cmd_loss(args: &LossArgs, tensor: &TriplingTensor) -> Result<()> {
    let mask = read_pfm(&args.mask)?;
    let est = read_intrinsics(&args.est_albedo, &args.est_normal, &args.est_vis, &mask)?;
    let gt = read_intrinsics(&args.gt_albedo, &args.gt_normal, &args.gt_vis, &mask)?;
    let light_est = read_light(&args.est_light)?;
    let light_gt = read_light(&args.gt_light)?;
    let stage = match args.stage {
        StageArg::Synthetic => Stage::Synthetic,
        StageArg::Real => Stage::Real,
    };
    let weights = LossWeights {
        normal: args.weight_normal,
        visibility: args.weight_vis,
        illumination: args.weight_light,
    };
    let losses = total_loss(stage, &est, &gt, &light_est, &light_gt, &weights, tensor)?;

    if args.json {
        let reconstruction: Vec<_> = losses
            .reconstruction
            .iter()
            .map(|(variant, value)| json!({ "variant": variant_name(*variant), "value": value }))
            .collect();
        println!(
            "{}",
            json!({
                "stage": match stage { Stage::Synthetic => "synthetic", Stage::Real => "real" },
                "reconstruction": reconstruction,
                "albedo": losses.components.albedo,
                "normal": losses.components.normal,
                "visibility": losses.components.visibility,
                "illumination": losses.illumination,
                "total": losses.total,
            })
        );
    } else {
        for (variant, value) in &losses.reconstruction {
            println!("reconstruction ({}): {value:.6e}", variant_name(*variant));
        }
        println!("albedo:       {:.6e}", losses.components.albedo);
        println!("normal:       {:.6e}", losses.components.normal);
        println!("visibility:   {:.6e}", losses.components.visibility);
        println!("illumination: {:.6e}", losses.illumination);
        println!("total:        {:.6e}", losses.total);
    }
    Ok(())
}

/// Largest relative disagreement between analytic and central-difference
/// gradients over `trials` random shading configurations, with a label
/// of where it occurred.
fn worst_gradient_error(trials: u32, seed: u64, tensor: &TriplingTensor) -> (f64, String) {
    const H: f64 = 1e-5;
    // Relative to the larger magnitude, with an absolute floor below
    // which central differences are cancellation noise.
    fn relative_error(analytic: f64, numeric: f64) -> f64 {
        (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
    }
    fn random_direction(rng: &mut impl Rng) -> Direction {
        loop {
            let v =
                vec3(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let len = v.length();
            if len > 0.1 && len < 1.0 {
                return Direction::from_vec(v).unwrap();
            }
        }
    }
    fn random_coeffs(rng: &mut impl Rng) -> Sh9 {
        Sh9(std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    let mut at = String::from("(none)");
    for trial in 0..trials {
        let pixel = PixelIntrinsics::surface(
            [rng.gen_range(0.1..1.0), rng.gen_range(0.1..1.0), rng.gen_range(0.1..1.0)],
            random_direction(&mut rng),
            random_coeffs(&mut rng),
        );
        let illumination = IlluminationRgb {
            channels: [random_coeffs(&mut rng), random_coeffs(&mut rng), random_coeffs(&mut rng)],
        };
        let g = render_gradients(&pixel, &illumination, tensor);
        for c in 0..3 {
            let mut record = |analytic: f64, fd: f64, what: String| {
                let err = relative_error(analytic, fd);
                if err > worst {
                    worst = err;
                    at = what;
                }
            };

            let mut plus = pixel;
            let mut minus = pixel;
            plus.albedo[c] += H;
            minus.albedo[c] -= H;
            let fd = (render_pixel(&plus, &illumination, tensor)[c]
                - render_pixel(&minus, &illumination, tensor)[c])
                / (2.0 * H);
            record(g.channels[c].wrt_albedo, fd, format!("trial {trial} albedo channel {c}"));

            for i in 0..COEFF_COUNT {
                let mut plus = pixel;
                let mut minus = pixel;
                plus.visibility[i] += H;
                minus.visibility[i] -= H;
                let fd = (render_pixel(&plus, &illumination, tensor)[c]
                    - render_pixel(&minus, &illumination, tensor)[c])
                    / (2.0 * H);
                record(
                    g.channels[c].wrt_visibility[i],
                    fd,
                    format!("trial {trial} visibility {i} channel {c}"),
                );

                let mut plus = illumination;
                let mut minus = illumination;
                plus.channels[c][i] += H;
                minus.channels[c][i] -= H;
                let fd = (render_pixel(&pixel, &plus, tensor)[c]
                    - render_pixel(&pixel, &minus, tensor)[c])
                    / (2.0 * H);
                record(
                    g.channels[c].wrt_light[i],
                    fd,
                    format!("trial {trial} light {i} channel {c}"),
                );
            }

            // Normals are perturbed along ambient axes and renormalized;
            // the directional derivative equals the tangential gradient
            // component because the gradient has no radial part.
            let axes = [vec3(1.0, 0.0, 0.0), vec3(0.0, 1.0, 0.0), vec3(0.0, 0.0, 1.0)];
            for (axis, unit) in axes.iter().enumerate() {
                let shift = |s: f64| {
                    let moved = PixelIntrinsics::surface(
                        pixel.albedo,
                        Direction::from_vec(pixel.normal.vec() + *unit * s).unwrap(),
                        pixel.visibility,
                    );
                    render_pixel(&moved, &illumination, tensor)[c]
                };
                let fd = (shift(H) - shift(-H)) / (2.0 * H);
                record(
                    g.channels[c].wrt_normal.axis(axis),
                    fd,
                    format!("trial {trial} normal axis {axis} channel {c}"),
                );
            }
        }
    }
    (worst, at)
}

fn cmd_gradcheck(args: &GradcheckArgs, seed: u64, tensor: &TriplingTensor) -> Result<()> {
    if args.trials == 0 {
        return Err(Error::Argument("gradcheck needs at least one trial".into()));
    }
    if !args.tol.is_finite() || args.tol <= 0.0 {
        return Err(Error::Argument(format!("tolerance must be positive, got {}", args.tol)));
    }
    let (worst, at) = worst_gradient_error(args.trials, seed, tensor);
    let pass = worst <= args.tol;
    if args.json {
        println!(
            "{}",
            json!({
                "trials": args.trials,
                "worst_relative_error": worst,
                "worst_at": at,
                "tolerance": args.tol,
                "pass": pass,
            })
        );
    } else {
        println!(
            "checked {} trial(s): worst relative error {worst:.3e} at {at} (tolerance {:.1e})",
            args.trials, args.tol
        );
    }
    if pass {
        Ok(())
    } else {
        Err(Error::Numerical(format!(
            "gradient mismatch: worst relative error {worst:.3e} at {at} exceeds {:.1e}",
            args.tol
        )))
    }
}
