//! RGB raster images and grayscale maps shared by every pipeline stage.
//!
//! An [`Image`] is a row-major, top-left-origin buffer of RGB triples with
//! every channel in `[0, 1]`. Images are immutable after construction in the
//! sense that no public operation mutates one in place, so they are safe to
//! share across threads.
//!
//! File formats: 8-bit PNG (RGB or RGBA, alpha discarded) and binary PPM P6.
//! Quantization to 8 bits is round-half-up, which makes save → load → save
//! byte-identical.

use std::fmt;
use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Rec. 601 luma weights, also used by SSIM and the dark-channel diagnostics.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image file not found: {0}")]
    NotFound(PathBuf),
    #[error("unsupported image format: {path} ({detail})")]
    UnsupportedFormat { path: PathBuf, detail: String },
    #[error("corrupt image header in {path}: {detail}")]
    CorruptHeader { path: PathBuf, detail: String },
    #[error("corrupt image data in {path}: {detail}")]
    CorruptData { path: PathBuf, detail: String },
    #[error("cannot write image to {path}: {source}")]
    Unwritable {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid image buffer: {0}")]
    InvalidBuffer(String),
}

/// Round-half-up quantization of a channel value in `[0, 1]` to one byte.
#[inline]
pub fn quantize_channel(v: f64) -> u8 {
    let q = (v * 255.0 + 0.5).floor();
    q.clamp(0.0, 255.0) as u8
}

/// Inverse of [`quantize_channel`]: byte to `[0, 1]`.
#[inline]
pub fn dequantize_channel(b: u8) -> f64 {
    f64::from(b) / 255.0
}

/// Row-major float RGB raster with channels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    /// Builds an image from an interleaved RGB buffer, validating the
    /// `width × height × 3` length and that every channel is finite in `[0, 1]`.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidBuffer(format!(
                "zero dimension {width}x{height}"
            )));
        }
        if data.len() != width * height * 3 {
            return Err(ImageError::InvalidBuffer(format!(
                "buffer length {} does not match {width}x{height}x3",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(ImageError::InvalidBuffer(format!(
                "channel value {bad} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel, clamping
    /// channels into `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                let px = f(x, y);
                for c in px {
                    data.push(clamp01(c));
                }
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    /// Constant-color image.
    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        Self::from_fn(width, height, |_, _| rgb)
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, [0.0; 3])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn same_dimensions(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Interleaved RGB channel data, row-major from the top-left.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Applies `f` per channel, clamping the result into `[0, 1]`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        let data = self.data.iter().map(|&v| clamp01(f(v))).collect();
        Image {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// Per-pixel luminance, `0.299 R + 0.587 G + 0.114 B`.
    pub fn luminance(&self) -> GrayMap {
        let mut data = Vec::with_capacity(self.width * self.height);
        for px in self.data.chunks_exact(3) {
            data.push(
                LUMA_WEIGHTS[0] * px[0] + LUMA_WEIGHTS[1] * px[1] + LUMA_WEIGHTS[2] * px[2],
            );
        }
        GrayMap {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// Quantizes to interleaved 8-bit RGB with round-half-up.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize_channel(v)).collect()
    }

    /// Dequantizes an interleaved 8-bit RGB buffer.
    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<Self, ImageError> {
        if bytes.len() != width * height * 3 {
            return Err(ImageError::InvalidBuffer(format!(
                "byte length {} does not match {width}x{height}x3",
                bytes.len()
            )));
        }
        let data = bytes.iter().map(|&b| dequantize_channel(b)).collect();
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Encodes the image as PNG bytes (8-bit RGB, round-half-up quantization).
    pub fn to_png_bytes(&self) -> Vec<u8> {
        let buf = image::RgbImage::from_raw(self.width as u32, self.height as u32, self.to_rgb8())
            .expect("dimensions validated at construction");
        let mut out = Cursor::new(Vec::new());
        image::DynamicImage::ImageRgb8(buf)
            .write_to(&mut out, image::ImageFormat::Png)
            .expect("in-memory PNG encoding cannot fail");
        out.into_inner()
    }

    /// Decodes PNG bytes, accepting 8-bit RGB or RGBA (alpha discarded).
    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self, ImageError> {
        decode_png(bytes, Path::new("<memory>"))
    }

    pub(crate) fn from_raw_unchecked(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height * 3);
        Self {
            width,
            height,
            data,
        }
    }
}

impl fmt::Display for Image {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Image({}x{})", self.width, self.height)
    }
}

#[inline]
pub(crate) fn clamp01(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// Single-channel float map with the same layout conventions as [`Image`].
#[derive(Debug, Clone, PartialEq)]
pub struct GrayMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height, "gray map buffer length");
        Self {
            width,
            height,
            data,
        }
    }

    pub fn filled(width: usize, height: usize, v: f64) -> Self {
        Self {
            width,
            height,
            data: vec![v; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GrayMap {
        GrayMap {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Writes the map as an 8-bit grayscale PNG, clamping values to `[0, 1]`.
    pub fn save_png(&self, path: &Path) -> Result<(), ImageError> {
        let bytes: Vec<u8> = self.data.iter().map(|&v| quantize_channel(clamp01(v))).collect();
        let buf = image::GrayImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer length checked at construction");
        ensure_parent_writable(path)?;
        buf.save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| ImageError::Unwritable {
                path: path.to_path_buf(),
                source: std::io::Error::other(e),
            })
    }
}

/// Loads an 8-bit PNG (RGB/RGBA) or binary PPM P6 file, mapping channels to
/// `[0, 1]` by `v / 255`. Alpha is discarded.
pub fn load_image(path: &Path) -> Result<Image, ImageError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(ImageError::NotFound(path.to_path_buf()))
        }
        Err(e) => {
            return Err(ImageError::CorruptData {
                path: path.to_path_buf(),
                detail: e.to_string(),
            })
        }
    };
    if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        decode_png(&bytes, path)
    } else if bytes.starts_with(b"P6") {
        decode_ppm_p6(&bytes, path)
    } else {
        Err(ImageError::UnsupportedFormat {
            path: path.to_path_buf(),
            detail: "expected PNG or binary PPM (P6) magic".into(),
        })
    }
}

/// Saves an image with 8-bit round-half-up quantization. The format follows
/// the extension: `.png` or `.ppm`.
pub fn save_image(img: &Image, path: &Path) -> Result<(), ImageError> {
    ensure_parent_writable(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("png") => fs::write(path, img.to_png_bytes()).map_err(|e| ImageError::Unwritable {
            path: path.to_path_buf(),
            source: e,
        }),
        Some("ppm") => {
            let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
            out.extend_from_slice(&img.to_rgb8());
            fs::write(path, out).map_err(|e| ImageError::Unwritable {
                path: path.to_path_buf(),
                source: e,
            })
        }
        other => Err(ImageError::UnsupportedFormat {
            path: path.to_path_buf(),
            detail: format!("cannot encode extension {other:?}; use .png or .ppm"),
        }),
    }
}

fn ensure_parent_writable(path: &Path) -> Result<(), ImageError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() && !parent.exists() {
            return Err(ImageError::Unwritable {
                path: path.to_path_buf(),
                source: std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    "parent directory does not exist",
                ),
            });
        }
    }
    Ok(())
}

fn decode_png(bytes: &[u8], path: &Path) -> Result<Image, ImageError> {
    use image::ColorType;
    let dynamic = image::load_from_memory_with_format(bytes, image::ImageFormat::Png).map_err(
        |e| ImageError::CorruptHeader {
            path: path.to_path_buf(),
            detail: e.to_string(),
        },
    )?;
    match dynamic.color() {
        ColorType::Rgb8 | ColorType::Rgba8 => {}
        other => {
            return Err(ImageError::UnsupportedFormat {
                path: path.to_path_buf(),
                detail: format!("PNG color type {other:?}; only 8-bit RGB/RGBA is supported"),
            })
        }
    }
    let rgb = dynamic.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    Image::from_rgb8(w, h, rgb.as_raw())
}

fn decode_ppm_p6(bytes: &[u8], path: &Path) -> Result<Image, ImageError> {
    let corrupt = |detail: &str| ImageError::CorruptHeader {
        path: path.to_path_buf(),
        detail: detail.to_string(),
    };
    let mut pos = 2; // past "P6"

    // Header tokens separated by whitespace; '#' starts a comment to end of line.
    let mut next_token = |pos: &mut usize| -> Option<String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos > start {
            Some(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
        } else {
            None
        }
    };

    let width: usize = next_token(&mut pos)
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| corrupt("missing or non-numeric width"))?;
    let height: usize = next_token(&mut pos)
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| corrupt("missing or non-numeric height"))?;
    let maxval: usize = next_token(&mut pos)
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| corrupt("missing or non-numeric maxval"))?;
    if width == 0 || height == 0 {
        return Err(corrupt("zero dimension"));
    }
    if maxval != 255 {
        return Err(ImageError::UnsupportedFormat {
            path: path.to_path_buf(),
            detail: format!("PPM maxval {maxval}; only 255 (8-bit) is supported"),
        });
    }
    // Exactly one whitespace byte separates the header from pixel data.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(corrupt("missing whitespace after maxval"));
    }
    pos += 1;
    let need = width * height * 3;
    let payload = &bytes[pos..];
    if payload.len() < need {
        return Err(ImageError::CorruptData {
            path: path.to_path_buf(),
            detail: format!("expected {need} pixel bytes, found {}", payload.len()),
        });
    }
    Image::from_rgb8(width, height, &payload[..need])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn random_image(seed: u64, w: usize, h: usize) -> Image {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        Image::from_fn(w, h, |_, _| {
            [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()]
        })
    }

    #[test]
    fn quantize_round_half_up() {
        // round(127.5) = 128 under round-half-up
        assert_eq!(quantize_channel(0.5), 128);
        assert_eq!(quantize_channel(0.0), 0);
        assert_eq!(quantize_channel(1.0), 255);
    }

    #[test]
    fn one_pixel_ppm_max_and_zero() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("px.ppm");
        let red = Image::new(1, 1, vec![1.0, 0.0, 0.0]).unwrap();
        save_image(&red, &path).unwrap();
        let loaded = load_image(&path).unwrap();
        assert_eq!(loaded.pixel(0, 0), [1.0, 0.0, 0.0]);

        let black = Image::zeros(1, 1);
        save_image(&black, &path).unwrap();
        let loaded = load_image(&path).unwrap();
        assert_eq!(loaded.data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn round_trip_quantization_oracle() {
        // Oracle: independent round-half-up quantization of each channel.
        let img = random_image(11, 8, 8);
        let dir = tempfile::tempdir().unwrap();
        for ext in ["ppm", "png"] {
            let path = dir.path().join(format!("rt.{ext}"));
            save_image(&img, &path).unwrap();
            let loaded = load_image(&path).unwrap();
            for (a, b) in img.data().iter().zip(loaded.data()) {
                let expect = (a * 255.0 + 0.5).floor() / 255.0;
                assert_eq!(*b, expect, "loaded channel must equal quantization oracle");
                assert!((a - b).abs() <= 1.0 / 510.0 + 1e-12, "half-quantum bound");
            }
        }
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let img = random_image(3, 9, 5);
        let dir = tempfile::tempdir().unwrap();
        for ext in ["ppm", "png"] {
            let p1 = dir.path().join(format!("a.{ext}"));
            let p2 = dir.path().join(format!("b.{ext}"));
            save_image(&img, &p1).unwrap();
            let once = load_image(&p1).unwrap();
            save_image(&once, &p2).unwrap();
            assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
        }
    }

    #[test]
    fn luminance_weight_readout() {
        let white = Image::filled(4, 4, [1.0, 1.0, 1.0]);
        for &v in white.luminance().data() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        let green = Image::filled(4, 4, [0.0, 1.0, 0.0]);
        for &v in green.luminance().data() {
            assert!((v - 0.587).abs() < 1e-12);
        }
        // per-pixel oracle on random data
        let img = random_image(5, 6, 4);
        let lum = img.luminance();
        for y in 0..4 {
            for x in 0..6 {
                let [r, g, b] = img.pixel(x, y);
                let expect = 0.299 * r + 0.587 * g + 0.114 * b;
                assert!((lum.at(x, y) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn error_kinds_are_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let missing = load_image(&dir.path().join("nope.png"));
        assert!(matches!(missing, Err(ImageError::NotFound(_))));

        let bad = dir.path().join("bad.dat");
        fs::write(&bad, b"not an image").unwrap();
        assert!(matches!(
            load_image(&bad),
            Err(ImageError::UnsupportedFormat { .. })
        ));

        let truncated = dir.path().join("t.ppm");
        fs::write(&truncated, b"P6\n4 4\n255\nxx").unwrap();
        assert!(matches!(
            load_image(&truncated),
            Err(ImageError::CorruptData { .. })
        ));

        let header = dir.path().join("h.ppm");
        fs::write(&header, b"P6\nfour 4\n255\n").unwrap();
        assert!(matches!(
            load_image(&header),
            Err(ImageError::CorruptHeader { .. })
        ));

        let nested = dir.path().join("no/such/dir/x.png");
        assert!(matches!(
            save_image(&Image::zeros(2, 2), &nested),
            Err(ImageError::Unwritable { .. })
        ));
    }

    #[test]
    fn ppm_header_comments_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ppm");
        let mut bytes = b"P6\n# comment line\n2 1\n# another\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 0, 0, 0, 255, 0]);
        fs::write(&path, bytes).unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!(img.pixel(0, 0), [1.0, 0.0, 0.0]);
        assert_eq!(img.pixel(1, 0), [0.0, 1.0, 0.0]);
    }

    #[test]
    fn new_rejects_out_of_range() {
        assert!(Image::new(1, 1, vec![0.0, 2.0, 0.0]).is_err());
        assert!(Image::new(1, 1, vec![0.0, f64::NAN, 0.0]).is_err());
        assert!(Image::new(2, 1, vec![0.0; 3]).is_err());
    }
}
