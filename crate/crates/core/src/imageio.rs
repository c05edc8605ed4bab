//! Grayscale image I/O: raw little-endian f32 and 8-bit binary PGM.
//!
//! Raw f32 is the lossless interchange format (coefficients survive a
//! store/load bit-exactly); PGM is for eyeballing results in an image
//! viewer, with values clamped to [0, 1] and quantized to a byte.

use crate::engine::{EngineError, ExtensionMode, QuadField};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

#[derive(Debug)]
pub enum ImageError {
    Io { path: std::path::PathBuf, error: std::io::Error },
    Format(String),
}

impl fmt::Display for ImageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImageError::Io { path, error } => write!(f, "{}: {error}", path.display()),
            ImageError::Format(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for ImageError {}

fn format_err(msg: impl Into<String>) -> ImageError {
    ImageError::Format(msg.into())
}

fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> ImageError + '_ {
    move |error| ImageError::Io { path: path.to_path_buf(), error }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    F32le,
    Pgm,
}

impl ImageFormat {
    /// `.pgm` selects PGM; anything else is raw f32.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("pgm") => ImageFormat::Pgm,
            _ => ImageFormat::F32le,
        }
    }
}

fn reject_nan(data: &[f32]) -> Result<(), ImageError> {
    if let Some(i) = data.iter().position(|v| v.is_nan()) {
        return Err(format_err(format!("sample {i} is NaN")));
    }
    Ok(())
}

/// Raw little-endian f32 samples, row-major. The file length must be
/// exactly `width * height * 4`.
pub fn read_f32le(path: &Path, width: usize, height: usize) -> Result<Vec<f32>, ImageError> {
    let bytes = fs::read(path).map_err(io_at(path))?;
    let expected = width * height * 4;
    if bytes.len() != expected {
        return Err(format_err(format!(
            "{} holds {} bytes, expected {expected} for {width}x{height} f32",
            path.display(),
            bytes.len()
        )));
    }
    let data: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    reject_nan(&data)?;
    Ok(data)
}

pub fn write_f32le(path: &Path, data: &[f32]) -> Result<(), ImageError> {
    reject_nan(data)?;
    let mut bytes = Vec::with_capacity(data.len() * 4);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(io_at(path))?;
    Ok(())
}

struct PgmHeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PgmHeaderReader<'a> {
    /// Next ASCII token, skipping whitespace and `#` comments.
    fn token(&mut self) -> Result<&'a [u8], ImageError> {
        loop {
            match self.bytes.get(self.pos) {
                None => return Err(format_err("truncated PGM header")),
                Some(b'#') => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(_) => break,
            }
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize, ImageError> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format_err(format!("bad PGM {what}")))
    }
}

/// Binary PGM (P5) with maxval up to 255. Samples are normalized to
/// `[0, 1]` by dividing by maxval.
pub fn read_pgm(path: &Path) -> Result<(Vec<f32>, usize, usize), ImageError> {
    let bytes = fs::read(path).map_err(io_at(path))?;
    let mut header = PgmHeaderReader { bytes: &bytes, pos: 0 };
    if header.token()? != b"P5" {
        return Err(format_err(format!("{} is not a binary PGM (P5) file", path.display())));
    }
    let width = header.number("width")?;
    let height = header.number("height")?;
    let maxval = header.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(format_err("PGM with empty dimensions"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(format_err(format!("unsupported PGM maxval {maxval} (need 1..=255)")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    let raster = header.pos + 1;
    let expected = width * height;
    if bytes.len() < raster + expected {
        return Err(format_err(format!(
            "PGM raster holds {} bytes, expected {expected}",
            bytes.len().saturating_sub(raster)
        )));
    }
    let scale = 1.0 / maxval as f32;
    let data = bytes[raster..raster + expected].iter().map(|&b| b as f32 * scale).collect();
    Ok((data, width, height))
}

/// Clamp to `[0, 1]`, quantize to a byte, write P5 with maxval 255.
pub fn write_pgm(path: &Path, data: &[f32], width: usize, height: usize) -> Result<(), ImageError> {
    if data.len() != width * height {
        return Err(format_err(format!(
            "buffer holds {} samples, expected {}",
            data.len(),
            width * height
        )));
    }
    reject_nan(data)?;
    let file = fs::File::create(path).map_err(io_at(path))?;
    let mut out = std::io::BufWriter::new(file);
    write!(out, "P5\n{width} {height}\n255\n").map_err(io_at(path))?;
    let raster: Vec<u8> =
        data.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    out.write_all(&raster).map_err(io_at(path))?;
    out.flush().map_err(io_at(path))?;
    Ok(())
}

/// Load by extension. Raw f32 needs explicit dimensions; PGM carries its
/// own and rejects a conflicting explicit size.
pub fn load_image(
    path: &Path,
    size: Option<(usize, usize)>,
) -> Result<(Vec<f32>, usize, usize), ImageError> {
    match ImageFormat::from_path(path) {
        ImageFormat::Pgm => {
            let (data, w, h) = read_pgm(path)?;
            if let Some((ew, eh)) = size {
                if (ew, eh) != (w, h) {
                    return Err(format_err(format!(
                        "{} is {w}x{h} but {ew}x{eh} was requested",
                        path.display()
                    )));
                }
            }
            Ok((data, w, h))
        }
        ImageFormat::F32le => {
            let (w, h) = size.ok_or_else(|| {
                format_err(format!(
                    "{} is raw f32; its dimensions must be given explicitly",
                    path.display()
                ))
            })?;
            let data = read_f32le(path, w, h)?;
            Ok((data, w, h))
        }
    }
}

pub fn store_image(
    path: &Path,
    data: &[f32],
    width: usize,
    height: usize,
) -> Result<(), ImageError> {
    match ImageFormat::from_path(path) {
        ImageFormat::Pgm => write_pgm(path, data, width, height),
        ImageFormat::F32le => {
            if data.len() != width * height {
                return Err(format_err(format!(
                    "buffer holds {} samples, expected {}",
                    data.len(),
                    width * height
                )));
            }
            write_f32le(path, data)
        }
    }
}

/// Single-image subband layout: the four component planes tiled into one
/// image of the original pixel size, LL top-left, HL top-right, LH
/// bottom-left, HH bottom-right.
pub fn to_mallat_image(tile: &QuadField) -> Vec<f32> {
    let wq = tile.width_quads();
    let hq = tile.height_quads();
    let width = tile.pixel_width();
    let mut img = vec![0.0f32; width * tile.pixel_height()];
    for c in 0..4 {
        let x0 = (c & 1) * wq;
        let y0 = (c >> 1) * hq;
        for n in 0..hq {
            for m in 0..wq {
                img[(y0 + n) * width + x0 + m] = tile.get(m, n, c);
            }
        }
    }
    img
}

pub fn from_mallat_image(
    img: &[f32],
    width: usize,
    height: usize,
    extension: ExtensionMode,
) -> Result<QuadField, EngineError> {
    if width == 0 || height == 0 || width % 2 != 0 || height % 2 != 0 {
        return Err(EngineError::BadInput(format!(
            "subband image must have even sides, got {width}x{height}"
        )));
    }
    if img.len() != width * height {
        return Err(EngineError::BadInput(format!(
            "buffer holds {} samples, expected {}",
            img.len(),
            width * height
        )));
    }
    let wq = width / 2;
    let hq = height / 2;
    let mut tile = QuadField::new(wq, hq, extension);
    for c in 0..4 {
        let x0 = (c & 1) * wq;
        let y0 = (c >> 1) * hq;
        for n in 0..hq {
            for m in 0..wq {
                tile.set(m, n, c, img[(y0 + n) * width + x0 + m]);
            }
        }
    }
    Ok(tile)
}
