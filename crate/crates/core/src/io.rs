//! File formats bridging disk and the domain types: PFM float images,
//! 8-bit display exports (PNG/PPM), the coefficient text format, point
//! lists, and a small ASCII OBJ reader.
//!
//! PFM is the working float container: self-describing, uncompressed,
//! and bit-exact under round-trips, which keeps golden-file tests
//! byte-stable. Rows are stored bottom-up and the sign of the scale line
//! gives the payload endianness (negative = little-endian, what we
//! write). Display exports are the only place gamma enters the crate.
//!
//! Parse errors report the byte offset at which the input stopped making
//! sense — for line-oriented formats, the offset of the offending line.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{vec3, Vec3};
use crate::render::{IntrinsicsMap, PixelIntrinsics, RadianceImage};
use crate::sh::{basis, Direction, Sh9, COEFF_COUNT};
use crate::visibility::SamplePoint;

/// Upper bound on image width/height; guards header-driven allocations.
const MAX_IMAGE_DIMENSION: usize = 1 << 20;

/// Row-major float image with 1 (gray/mask) or 3 (RGB) channels, in
/// linear radiometric units. Row 0 is the top of the image.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl FloatImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<FloatImage> {
        if channels != 1 && channels != 3 {
            return Err(Error::Argument(format!("images have 1 or 3 channels, got {channels}")));
        }
        if width == 0 || height == 0 || width > MAX_IMAGE_DIMENSION || height > MAX_IMAGE_DIMENSION
        {
            return Err(Error::Argument(format!("image dimensions {width}x{height} out of range")));
        }
        if data.len() != width * height * channels {
            return Err(Error::Dimension(format!(
                "image payload holds {} samples, {}x{}x{channels} needs {}",
                data.len(),
                width,
                height,
                width * height * channels
            )));
        }
        Ok(FloatImage { width, height, channels, data })
    }

    /// A black image of the given shape.
    pub fn zeros(width: usize, height: usize, channels: usize) -> Result<FloatImage> {
        FloatImage::new(width, height, channels, vec![0.0; width * height * channels])
    }

    /// Sample at pixel (x, y), channel c.
    pub fn sample(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn sample_mut(&mut self, x: usize, y: usize, c: usize) -> &mut f32 {
        &mut self.data[(y * self.width + x) * self.channels + c]
    }
}

// ---------------------------------------------------------------------
// PFM

/// Serializes to the portable float map format: `PF`/`Pf` magic, one
/// `width height` line, scale `-1.0` (little-endian), then rows bottom-up.
pub fn write_pfm_bytes(image: &FloatImage) -> Vec<u8> {
    let magic = if image.channels == 3 { "PF" } else { "Pf" };
    let mut out = format!("{magic}\n{} {}\n-1.0\n", image.width, image.height).into_bytes();
    out.reserve(image.data.len() * 4);
    let row_len = image.width * image.channels;
    for row in (0..image.height).rev() {
        let start = row * row_len;
        for &v in &image.data[start..start + row_len] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn write_pfm(path: impl AsRef<Path>, image: &FloatImage) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_pfm_bytes(image)).map_err(|e| Error::io(path, e))
}

/// Whitespace-token scanner over the PFM header; keeps byte positions
/// for error reporting.
struct HeaderScanner<'a> {
    bytes: &'a [u8],
    pos: usize,
    source: &'a str,
}

impl<'a> HeaderScanner<'a> {
    fn token(&mut self, what: &str) -> Result<(&'a str, usize)> {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format(self.source, start, format!("missing {what} in header")));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::format(self.source, start, format!("{what} is not ASCII")))?;
        Ok((text, start))
    }
}

/// Parses PFM bytes; `source_name` labels errors (usually the path).
pub fn read_pfm_bytes(bytes: &[u8], source_name: &str) -> Result<FloatImage> {
    let mut scan = HeaderScanner { bytes, pos: 0, source: source_name };
    let (magic, magic_at) = scan.token("magic")?;
    let channels = match magic {
        "PF" => 3,
        "Pf" => 1,
        other => {
            return Err(Error::format(
                source_name,
                magic_at,
                format!("bad magic {other:?}, expected \"PF\" or \"Pf\""),
            ))
        }
    };
    let parse_dim = |scan: &mut HeaderScanner, what| -> Result<usize> {
        let (text, at) = scan.token(what)?;
        let value: usize = text
            .parse()
            .map_err(|_| Error::format(source_name, at, format!("bad {what} {text:?}")))?;
        if value == 0 || value > MAX_IMAGE_DIMENSION {
            return Err(Error::format(source_name, at, format!("{what} {value} out of range")));
        }
        Ok(value)
    };
    let width = parse_dim(&mut scan, "width")?;
    let height = parse_dim(&mut scan, "height")?;
    let (scale_text, scale_at) = scan.token("scale")?;
    let scale: f64 = scale_text
        .parse()
        .map_err(|_| Error::format(source_name, scale_at, format!("bad scale {scale_text:?}")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::format(
            source_name,
            scale_at,
            format!("scale must be finite and nonzero, got {scale_text}"),
        ));
    }
    let little_endian = scale < 0.0;

    // Exactly one whitespace byte separates the header from the payload.
    let payload_at = scan.pos + 1;
    if scan.pos >= bytes.len() || !bytes[scan.pos].is_ascii_whitespace() {
        return Err(Error::format(
            source_name,
            scan.pos,
            "expected a single whitespace byte before the payload",
        ));
    }
    let sample_count = width * height * channels;
    let expected = sample_count * 4;
    let payload = &bytes[payload_at..];
    if payload.len() != expected {
        return Err(Error::format(
            source_name,
            payload_at + payload.len().min(expected),
            format!(
                "payload is {} bytes, {width}x{height}x{channels} needs {expected}",
                payload.len()
            ),
        ));
    }

    let mut data = vec![0.0_f32; sample_count];
    let row_len = width * channels;
    for (file_row, chunk) in payload.chunks_exact(row_len * 4).enumerate() {
        // Rows are stored bottom-up.
        let image_row = height - 1 - file_row;
        let out = &mut data[image_row * row_len..(image_row + 1) * row_len];
        for (value, quad) in out.iter_mut().zip(chunk.chunks_exact(4)) {
            let raw = [quad[0], quad[1], quad[2], quad[3]];
            *value = if little_endian { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
        }
    }
    FloatImage::new(width, height, channels, data)
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<FloatImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_pfm_bytes(&bytes, &path.display().to_string())
}

// ---------------------------------------------------------------------
// Normal maps

/// Encodes unit normals as colors, `(n+1)/2` per component; background
/// pixels are black.
pub fn encode_normal_map(map: &IntrinsicsMap) -> FloatImage {
    let mut data = Vec::with_capacity(map.pixels.len() * 3);
    for pixel in &map.pixels {
        if pixel.masked {
            data.extend([0.0; 3]);
        } else {
            let n = pixel.normal.vec();
            data.extend([
                ((n.x + 1.0) * 0.5) as f32,
                ((n.y + 1.0) * 0.5) as f32,
                ((n.z + 1.0) * 0.5) as f32,
            ]);
        }
    }
    FloatImage { width: map.width, height: map.height, channels: 3, data }
}

/// Decodes an encoded normal map back to unit directions. `mask[i]` true
/// marks a foreground pixel; background entries decode to a +z
/// placeholder that consumers never read. A foreground pixel whose
/// decoded vector has no direction (color ≈ mid-gray) is an error.
pub fn decode_normal_map(image: &FloatImage, mask: &[bool]) -> Result<Vec<Direction>> {
    if image.channels != 3 {
        return Err(Error::Dimension(format!(
            "normal maps need 3 channels, got {}",
            image.channels
        )));
    }
    if mask.len() != image.width * image.height {
        return Err(Error::Dimension(format!(
            "mask holds {} entries, image is {}x{}",
            mask.len(),
            image.width,
            image.height
        )));
    }
    let mut out = Vec::with_capacity(mask.len());
    for (index, &foreground) in mask.iter().enumerate() {
        if !foreground {
            out.push(Direction::PLUS_Z);
            continue;
        }
        let v = vec3(
            2.0 * image.data[index * 3] as f64 - 1.0,
            2.0 * image.data[index * 3 + 1] as f64 - 1.0,
            2.0 * image.data[index * 3 + 2] as f64 - 1.0,
        );
        let dir = Direction::from_vec(v).map_err(|_| {
            Error::Argument(format!(
                "normal map pixel ({}, {}) decodes to a zero-length vector",
                index % image.width,
                index / image.width
            ))
        })?;
        out.push(dir);
    }
    Ok(out)
}

// ---------------------------------------------------------------------
// Display export

/// Quantizes one linear value to 8 bits: clamp, 1/gamma power,
/// round-half-up.
pub fn quantize_display(value: f64, gamma: f64) -> u8 {
    let v = value.clamp(0.0, 1.0).powf(1.0 / gamma);
    (v * 255.0 + 0.5).floor() as u8
}

/// Writes an 8-bit preview of a linear image. The container comes from
/// the extension: `.png` or `.ppm` (P6 color / P5 gray).
pub fn export_display(image: &FloatImage, gamma: f64, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if gamma <= 0.0 || !gamma.is_finite() {
        return Err(Error::Argument(format!("gamma must be positive, got {gamma}")));
    }
    let bytes: Vec<u8> = image.data.iter().map(|&v| quantize_display(v as f64, gamma)).collect();
    let extension = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    match extension {
        "png" => {
            let color = if image.channels == 3 {
                image::ExtendedColorType::Rgb8
            } else {
                image::ExtendedColorType::L8
            };
            image::save_buffer(path, &bytes, image.width as u32, image.height as u32, color)
                .map_err(|e| match e {
                    image::ImageError::IoError(io) => Error::io(path, io),
                    other => Error::Argument(format!("png encode failed: {other}")),
                })
        }
        "ppm" => {
            let magic = if image.channels == 3 { "P6" } else { "P5" };
            let mut out = format!("{magic}\n{} {}\n255\n", image.width, image.height).into_bytes();
            out.extend_from_slice(&bytes);
            fs::write(path, out).map_err(|e| Error::io(path, e))
        }
        other => {
            Err(Error::Argument(format!("unsupported display format {other:?}; use .png or .ppm")))
        }
    }
}

// ---------------------------------------------------------------------
// Line-oriented text formats

/// Iterates (byte offset, trimmed line) over data lines, skipping blanks
/// and '#' comments.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut offset = 0;
    text.split('\n').filter_map(move |line| {
        let at = offset;
        offset += line.len() + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            None
        } else {
            Some((at, trimmed))
        }
    })
}

fn parse_numbers(line: &str, count: usize, at: usize, source: &str) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(count);
    for token in line.split_whitespace() {
        let value: f64 = token
            .parse()
            .map_err(|_| Error::format(source, at, format!("bad number {token:?}")))?;
        values.push(value);
    }
    if values.len() != count {
        return Err(Error::format(
            source,
            at,
            format!("expected {count} numbers, found {}", values.len()),
        ));
    }
    Ok(values)
}

/// Parses the coefficient text format: one line of 9 numbers per
/// coefficient vector.
pub fn parse_coefficients(text: &str, source_name: &str) -> Result<Vec<Sh9>> {
    let mut out = Vec::new();
    for (at, line) in data_lines(text) {
        let values = parse_numbers(line, COEFF_COUNT, at, source_name)?;
        out.push(Sh9(std::array::from_fn(|i| values[i])));
    }
    Ok(out)
}

pub fn read_coefficients(path: impl AsRef<Path>) -> Result<Vec<Sh9>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_coefficients(&text, &path.display().to_string())
}

/// Formats coefficient vectors, one line each, using the shortest
/// round-trip decimal representation.
pub fn format_coefficients(lines: &[Sh9]) -> String {
    let mut out = String::new();
    for coeffs in lines {
        for (i, v) in coeffs.0.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn write_coefficients(path: impl AsRef<Path>, lines: &[Sh9]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_coefficients(lines)).map_err(|e| Error::io(path, e))
}

/// Parses a point list: one `px py pz nx ny nz` line per sample point.
pub fn parse_points(text: &str, source_name: &str) -> Result<Vec<SamplePoint>> {
    let mut out = Vec::new();
    for (at, line) in data_lines(text) {
        let v = parse_numbers(line, 6, at, source_name)?;
        let normal = Direction::new(v[3], v[4], v[5])
            .map_err(|_| Error::format(source_name, at, "zero-length normal"))?;
        out.push(SamplePoint { position: vec3(v[0], v[1], v[2]), normal });
    }
    Ok(out)
}

pub fn read_points(path: impl AsRef<Path>) -> Result<Vec<SamplePoint>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_points(&text, &path.display().to_string())
}

pub fn write_points(path: impl AsRef<Path>, points: &[SamplePoint]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for p in points {
        let n = p.normal.vec();
        out.push_str(&format!(
            "{} {} {} {} {} {}\n",
            p.position.x, p.position.y, p.position.z, n.x, n.y, n.z
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------
// OBJ meshes

/// Parses the triangulated subset of ASCII OBJ: `v x y z [w]` and
/// `f a b c` records (with optional `/vt/vn` suffixes, which are
/// ignored). Everything else is skipped. Faces must be triangles and
/// must reference already-declared vertices.
pub fn parse_obj(text: &str, source_name: &str) -> Result<(Vec<Vec3>, Vec<[u32; 3]>)> {
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();
    for (at, line) in data_lines(text) {
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let rest: Vec<&str> = tokens.collect();
                if rest.len() != 3 && rest.len() != 4 {
                    return Err(Error::format(
                        source_name,
                        at,
                        format!("vertex needs 3 coordinates, found {}", rest.len()),
                    ));
                }
                let mut coords = [0.0; 3];
                for (slot, token) in coords.iter_mut().zip(&rest) {
                    *slot = token.parse().map_err(|_| {
                        Error::format(source_name, at, format!("bad coordinate {token:?}"))
                    })?;
                }
                vertices.push(vec3(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let rest: Vec<&str> = tokens.collect();
                if rest.len() != 3 {
                    return Err(Error::format(
                        source_name,
                        at,
                        format!("faces must be triangles, found {} vertices", rest.len()),
                    ));
                }
                let mut face = [0u32; 3];
                for (slot, token) in face.iter_mut().zip(&rest) {
                    let index_text = token.split('/').next().unwrap_or("");
                    let index: usize = index_text.parse().map_err(|_| {
                        Error::format(source_name, at, format!("bad face index {token:?}"))
                    })?;
                    if index == 0 || index > vertices.len() {
                        return Err(Error::format(
                            source_name,
                            at,
                            format!(
                                "face index {index} out of range (have {} vertices)",
                                vertices.len()
                            ),
                        ));
                    }
                    *slot = (index - 1) as u32;
                }
                faces.push(face);
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

pub fn read_obj(path: impl AsRef<Path>) -> Result<(Vec<Vec3>, Vec<[u32; 3]>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text, &path.display().to_string())
}

/// Writes a mesh in the same OBJ subset [`parse_obj`] reads.
pub fn write_obj(path: impl AsRef<Path>, vertices: &[Vec3], faces: &[[u32; 3]]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for v in vertices {
        out.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
    }
    for f in faces {
        out.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------
// Environment maps

/// Projects an equirectangular environment map onto SH, one coefficient
/// vector per channel. Row 0 spans the +z pole; the midpoint rule with
/// solid-angle weights `sinθ·(π/H)·(2π/W)` integrates each basis
/// function against the image.
pub fn project_environment_map(image: &FloatImage) -> Result<Vec<Sh9>> {
    let (width, height) = (image.width, image.height);
    let d_theta = std::f64::consts::PI / height as f64;
    let d_phi = std::f64::consts::TAU / width as f64;
    let mut coeffs = vec![Sh9::ZERO; image.channels];
    for row in 0..height {
        let theta = (row as f64 + 0.5) * d_theta;
        let weight = theta.sin() * d_theta * d_phi;
        for col in 0..width {
            let phi = (col as f64 + 0.5) * d_phi;
            let y = basis(Direction::from_spherical(theta, phi));
            for (c, target) in coeffs.iter_mut().enumerate() {
                let value = image.sample(col, row, c) as f64 * weight;
                for (slot, &yi) in target.0.iter_mut().zip(&y) {
                    *slot += value * yi;
                }
            }
        }
    }
    Ok(coeffs)
}

// ---------------------------------------------------------------------
// Map assembly

/// Converts a mask image (1 channel, foreground > 0.5) to per-pixel
/// booleans.
pub fn mask_from_image(image: &FloatImage) -> Result<Vec<bool>> {
    if image.channels != 1 {
        return Err(Error::Dimension(format!("masks need 1 channel, got {}", image.channels)));
    }
    Ok(image.data.iter().map(|&v| v > 0.5).collect())
}

/// The mask of an intrinsics map as a 1-channel image (foreground = 1).
pub fn mask_to_image(map: &IntrinsicsMap) -> FloatImage {
    FloatImage {
        width: map.width,
        height: map.height,
        channels: 1,
        data: map.pixels.iter().map(|p| if p.masked { 0.0 } else { 1.0 }).collect(),
    }
}

/// The albedo of an intrinsics map as an RGB image; background is black.
pub fn albedo_to_image(map: &IntrinsicsMap) -> FloatImage {
    let mut data = Vec::with_capacity(map.pixels.len() * 3);
    for pixel in &map.pixels {
        let albedo = if pixel.masked { [0.0; 3] } else { pixel.albedo };
        data.extend(albedo.map(|v| v as f32));
    }
    FloatImage { width: map.width, height: map.height, channels: 3, data }
}

/// A rendered radiance buffer as an RGB image.
pub fn radiance_to_image(image: &RadianceImage) -> FloatImage {
    let mut data = Vec::with_capacity(image.pixels.len() * 3);
    for pixel in &image.pixels {
        data.extend(pixel.map(|v| v as f32));
    }
    FloatImage { width: image.width, height: image.height, channels: 3, data }
}

/// Builds an intrinsics map from its on-disk pieces. `visibility` holds
/// either one coefficient vector per pixel (row-major) or a single
/// vector broadcast to every pixel.
pub fn assemble_intrinsics(
    albedo: &FloatImage,
    normals: &FloatImage,
    visibility: &[Sh9],
    mask: &FloatImage,
) -> Result<IntrinsicsMap> {
    let (width, height) = (mask.width, mask.height);
    for (what, image, channels) in [("albedo", albedo, 3), ("normal", normals, 3)] {
        if image.width != width || image.height != height {
            return Err(Error::Dimension(format!(
                "{what} map is {}x{}, mask is {width}x{height}",
                image.width, image.height
            )));
        }
        if image.channels != channels {
            return Err(Error::Dimension(format!(
                "{what} map has {} channels, need {channels}",
                image.channels
            )));
        }
    }
    let pixel_count = width * height;
    if visibility.len() != 1 && visibility.len() != pixel_count {
        return Err(Error::Dimension(format!(
            "visibility holds {} coefficient lines; need 1 (broadcast) or {pixel_count}",
            visibility.len()
        )));
    }
    let foreground = mask_from_image(mask)?;
    let directions = decode_normal_map(normals, &foreground)?;

    let mut map = IntrinsicsMap::filled_background(width, height);
    for (index, pixel) in map.pixels.iter_mut().enumerate() {
        if !foreground[index] {
            continue;
        }
        let vis = if visibility.len() == 1 { visibility[0] } else { visibility[index] };
        *pixel = PixelIntrinsics::surface(
            [
                albedo.data[index * 3] as f64,
                albedo.data[index * 3 + 1] as f64,
                albedo.data[index * 3 + 2] as f64,
            ],
            directions[index],
            vis,
        );
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{generate_sphere_scene, SphereSceneConfig};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn awkward_image() -> FloatImage {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut data: Vec<f32> = (0..4 * 4 * 3).map(|_| rng.gen_range(-10.0..10.0)).collect();
        data[0] = -0.0;
        data[1] = f32::MIN_POSITIVE;
        data[2] = 3.4e38;
        data[3] = 1e-40; // subnormal
        FloatImage::new(4, 4, 3, data).unwrap()
    }

    #[test]
    fn pfm_round_trip_is_bitwise() {
        let image = awkward_image();
        let decoded = read_pfm_bytes(&write_pfm_bytes(&image), "test").unwrap();
        assert_eq!(decoded.width, 4);
        assert_eq!(decoded.channels, 3);
        for (a, b) in image.data.iter().zip(&decoded.data) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn pfm_gray_payload_is_exact() {
        let image = FloatImage::new(1, 1, 1, vec![0.5]).unwrap();
        let mut expected = b"Pf\n1 1\n-1.0\n".to_vec();
        expected.extend_from_slice(&0.5_f32.to_le_bytes());
        assert_eq!(write_pfm_bytes(&image), expected);
    }

    #[test]
    fn pfm_reads_both_endiannesses() {
        let values: Vec<f32> = (0..12).map(|i| i as f32 * 0.25).collect();
        let mut le = b"PF\n2 2\n-1.0\n".to_vec();
        let mut be = b"PF\n2 2\n1.0\n".to_vec();
        // Bottom-up storage: file rows are image rows 1 then 0.
        for row in [1, 0] {
            for &v in &values[row * 6..(row + 1) * 6] {
                le.extend_from_slice(&v.to_le_bytes());
                be.extend_from_slice(&v.to_be_bytes());
            }
        }
        for bytes in [le, be] {
            let image = read_pfm_bytes(&bytes, "test").unwrap();
            assert_eq!((image.width, image.height, image.channels), (2, 2, 3));
            assert_eq!(image.data, values);
        }
    }

    #[test]
    fn pfm_errors_name_byte_offsets() {
        let err = read_pfm_bytes(b"PX\n1 1\n-1.0\n....", "test").unwrap_err();
        assert!(matches!(err, Error::Format { offset: 0, .. }), "{err}");

        let err = read_pfm_bytes(b"Pf\nx 1\n-1.0\n....", "test").unwrap_err();
        assert!(matches!(err, Error::Format { offset: 3, .. }), "{err}");

        let mut truncated = b"Pf\n2 1\n-1.0\n".to_vec();
        truncated.extend_from_slice(&[0; 4]); // one of two samples
        let err = read_pfm_bytes(&truncated, "test").unwrap_err();
        assert!(matches!(err, Error::Format { offset: 16, .. }), "{err}");
    }

    #[test]
    fn pfm_file_round_trip_and_io_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("image.pfm");
        let image = awkward_image();
        write_pfm(&path, &image).unwrap();
        let back = read_pfm(&path).unwrap();
        for (a, b) in image.data.iter().zip(&back.data) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert!(matches!(read_pfm(dir.path().join("missing.pfm")), Err(Error::Io { .. })));
    }

    #[test]
    fn normal_codec_matches_the_affine_map() {
        let mut map = IntrinsicsMap::filled_background(2, 1);
        *map.pixel_mut(0, 0) = PixelIntrinsics::surface([1.0; 3], Direction::PLUS_Z, Sh9::ZERO);
        *map.pixel_mut(1, 0) = PixelIntrinsics::surface([1.0; 3], Direction::PLUS_X, Sh9::ZERO);
        let image = encode_normal_map(&map);
        assert_eq!(&image.data[0..3], &[0.5, 0.5, 1.0]);
        assert_eq!(&image.data[3..6], &[1.0, 0.5, 0.5]);
    }

    #[test]
    fn normal_codec_round_trips_through_f32() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut map = IntrinsicsMap::filled_background(8, 8);
        for pixel in &mut map.pixels {
            let v =
                vec3(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if v.length() > 0.1 {
                *pixel =
                    PixelIntrinsics::surface([1.0; 3], Direction::from_vec(v).unwrap(), Sh9::ZERO);
            }
        }
        let mask: Vec<bool> = map.pixels.iter().map(|p| !p.masked).collect();
        let decoded = decode_normal_map(&encode_normal_map(&map), &mask).unwrap();
        for (pixel, dir) in map.pixels.iter().zip(&decoded) {
            if pixel.masked {
                continue;
            }
            let angle = pixel.normal.dot(*dir).clamp(-1.0, 1.0).acos();
            assert!(angle < 1e-6, "angular error {angle}");
        }
    }

    #[test]
    fn degenerate_foreground_normal_is_rejected() {
        // Mid-gray decodes to the zero vector.
        let image = FloatImage::new(1, 1, 3, vec![0.5, 0.5, 0.5]).unwrap();
        assert!(decode_normal_map(&image, &[true]).is_err());
        // The same pixel is fine when masked out.
        assert!(decode_normal_map(&image, &[false]).is_ok());
    }

    #[test]
    fn display_quantization_examples() {
        assert_eq!(quantize_display(0.0, 2.2), 0);
        assert_eq!(quantize_display(1.0, 2.2), 255);
        assert_eq!(quantize_display(2.0, 2.2), 255);
        assert_eq!(quantize_display(-1.0, 2.2), 0);
        assert_eq!(quantize_display(0.5, 2.2), 186);
    }

    #[test]
    fn display_export_writes_both_containers() {
        let dir = tempfile::tempdir().unwrap();
        let image = FloatImage::new(2, 1, 3, vec![0.0, 0.5, 1.0, 2.0, -1.0, 0.25]).unwrap();

        let ppm = dir.path().join("out.ppm");
        export_display(&image, 2.2, &ppm).unwrap();
        let bytes = std::fs::read(&ppm).unwrap();
        assert_eq!(&bytes[..11], b"P6\n2 1\n255\n");
        assert_eq!(&bytes[11..], &[0, 186, 255, 255, 0, 136]);

        let png = dir.path().join("out.png");
        export_display(&image, 2.2, &png).unwrap();
        let bytes = std::fs::read(&png).unwrap();
        assert_eq!(&bytes[..4], b"\x89PNG");

        assert!(matches!(
            export_display(&image, 2.2, dir.path().join("out.bmp")),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn coefficient_text_round_trips_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let lines: Vec<Sh9> =
            (0..3).map(|_| Sh9(std::array::from_fn(|_| rng.gen_range(-2.0..2.0)))).collect();
        let text = format_coefficients(&lines);
        let parsed = parse_coefficients(&text, "test").unwrap();
        assert_eq!(lines, parsed);
    }

    #[test]
    fn coefficient_text_skips_comments_and_reports_offsets() {
        let text = "# heading comment\n\n1 2 3 4 5 6 7 8 9\n# tail\n";
        let parsed = parse_coefficients(text, "test").unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0][8], 9.0);

        let bad = "1 2 3 4 5 6 7 8 9\n1 2 3\n";
        let err = parse_coefficients(bad, "test").unwrap_err();
        assert!(matches!(err, Error::Format { offset: 18, .. }), "{err}");

        let nan = "1 2 x 4 5 6 7 8 9\n";
        assert!(parse_coefficients(nan, "test").is_err());
    }

    #[test]
    fn point_lists_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("points.txt");
        let points = vec![
            SamplePoint { position: vec3(1.0, 2.0, 3.0), normal: Direction::PLUS_Z },
            SamplePoint {
                position: vec3(-0.5, 0.25, 0.0),
                normal: Direction::new(1.0, 1.0, 0.0).unwrap(),
            },
        ];
        write_points(&path, &points).unwrap();
        let back = read_points(&path).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in points.iter().zip(&back) {
            assert_eq!(a.position, b.position);
            assert!(a.normal.dot(b.normal) > 1.0 - 1e-12);
        }

        assert!(matches!(parse_points("0 0 0 0 0 0\n", "test"), Err(Error::Format { .. })));
        assert!(matches!(parse_points("1 2 3\n", "test"), Err(Error::Format { .. })));
    }

    #[test]
    fn obj_parses_the_triangulated_subset() {
        let text = "\
# cube corner
o demo
v 0 0 0
v 1 0 0.5
v 0 1 0 1.0
vn 0 0 1
vt 0 0
f 1/1/1 2/2/1 3/3/1
f 1 3 2
s off
";
        let (vertices, faces) = parse_obj(text, "test").unwrap();
        assert_eq!(vertices.len(), 3);
        assert_eq!(vertices[1], vec3(1.0, 0.0, 0.5));
        assert_eq!(faces, vec![[0, 1, 2], [0, 2, 1]]);
    }

    #[test]
    fn obj_rejects_quads_and_bad_indices() {
        let quad = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        let err = parse_obj(quad, "test").unwrap_err();
        assert!(err.to_string().contains("triangles"), "{err}");

        let out_of_range = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 5\n";
        assert!(parse_obj(out_of_range, "test").is_err());
        let zero_index = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n";
        assert!(parse_obj(zero_index, "test").is_err());
    }

    #[test]
    fn obj_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mesh.obj");
        let vertices = vec![vec3(0.0, 0.0, 0.0), vec3(1.0, 0.0, 0.0), vec3(0.0, 1.0, 0.0)];
        let faces = vec![[0u32, 2, 1]];
        write_obj(&path, &vertices, &faces).unwrap();
        let (v, f) = read_obj(&path).unwrap();
        assert_eq!(v, vertices);
        assert_eq!(f, faces);
    }

    #[test]
    fn environment_projection_matches_closed_forms() {
        // Constant radiance 1 → only the constant coefficient, 2√π.
        let constant = FloatImage::new(128, 64, 1, vec![1.0; 128 * 64]).unwrap();
        let coeffs = project_environment_map(&constant).unwrap();
        assert_eq!(coeffs.len(), 1);
        assert_abs_diff_eq!(coeffs[0][0], 2.0 * std::f64::consts::PI.sqrt(), epsilon = 1e-3);
        for &residue in &coeffs[0].0[1..] {
            assert_abs_diff_eq!(residue, 0.0, epsilon = 1e-3);
        }

        // f(ω) = cos θ projects onto the z-linear slot with ∫ z·Y_2 dω =
        // C_1·4π/3.
        let mut gradient = FloatImage::zeros(128, 64, 3).unwrap();
        for row in 0..64 {
            let theta = (row as f64 + 0.5) * std::f64::consts::PI / 64.0;
            for col in 0..128 {
                for c in 0..3 {
                    *gradient.sample_mut(col, row, c) = theta.cos() as f32;
                }
            }
        }
        let coeffs = project_environment_map(&gradient).unwrap();
        assert_eq!(coeffs.len(), 3);
        let expected = 0.4886025119029199 * 4.0 * std::f64::consts::PI / 3.0;
        for channel in &coeffs {
            assert_abs_diff_eq!(channel[2], expected, epsilon = 1e-3);
            assert_abs_diff_eq!(channel[0], 0.0, epsilon = 1e-3);
        }
    }

    #[test]
    fn intrinsics_assemble_from_their_encoded_parts() {
        let scene =
            generate_sphere_scene(&SphereSceneConfig { image_size: 8, ..Default::default() })
                .unwrap();
        let gt = &scene.intrinsics;
        let assembled = assemble_intrinsics(
            &albedo_to_image(gt),
            &encode_normal_map(gt),
            &[Sh9::constant(1.0)],
            &mask_to_image(gt),
        )
        .unwrap();
        assert_eq!(assembled.width, gt.width);
        for (a, g) in assembled.pixels.iter().zip(&gt.pixels) {
            assert_eq!(a.masked, g.masked);
            if a.masked {
                continue;
            }
            for c in 0..3 {
                assert_abs_diff_eq!(a.albedo[c], g.albedo[c], epsilon = 1e-6);
            }
            assert!(a.normal.dot(g.normal) > 1.0 - 1e-9);
            assert_eq!(a.visibility, Sh9::constant(1.0));
        }
    }

    #[test]
    fn assembly_rejects_mismatched_parts() {
        let albedo = FloatImage::zeros(2, 2, 3).unwrap();
        let normals = FloatImage::zeros(2, 2, 3).unwrap();
        let small_mask = FloatImage::zeros(1, 1, 1).unwrap();
        assert!(matches!(
            assemble_intrinsics(&albedo, &normals, &[Sh9::ZERO], &small_mask),
            Err(Error::Dimension(_))
        ));
        let mask = FloatImage::zeros(2, 2, 1).unwrap();
        assert!(matches!(
            assemble_intrinsics(&albedo, &normals, &[Sh9::ZERO; 3], &mask),
            Err(Error::Dimension(_))
        ));
    }
}
