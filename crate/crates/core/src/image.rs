//! Grayscale images, PGM file I/O and the MSE/PSNR quality metrics.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major grid of real pixel values, nominally in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be at least 1x1, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
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

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Copy with every value clamped to `[0, 255]`.
    pub fn clipped(&self) -> Image {
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| clip_255(v)).collect(),
        }
    }

    /// Copy quantized exactly as [`save_image`] would store it.
    pub fn quantized(&self) -> Image {
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f64::from(to_byte(v))).collect(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&v| to_byte(v)).collect()
    }

    fn check_same_shape(&self, other: &Image) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch {
                left_w: self.width,
                left_h: self.height,
                right_w: other.width,
                right_h: other.height,
            });
        }
        Ok(())
    }
}

fn clip_255(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 255.0)
    }
}

/// Clip to `[0, 255]` then round half-up.
fn to_byte(v: f64) -> u8 {
    (clip_255(v) + 0.5).floor().min(255.0) as u8
}

/// Result of a PSNR evaluation. `psnr_db` is `f64::INFINITY` exactly when
/// `mse == 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub mse: f64,
    pub psnr_db: f64,
    pub bit_depth_k: u32,
}

impl QualityReport {
    pub fn is_perfect(&self) -> bool {
        self.psnr_db.is_infinite()
    }
}

pub fn mse(reference: &Image, test: &Image) -> Result<f64> {
    reference.check_same_shape(test)?;
    let sum: f64 = reference
        .data
        .iter()
        .zip(&test.data)
        .map(|(r, t)| (t - r) * (t - r))
        .sum();
    Ok(sum / reference.data.len() as f64)
}

/// Peak signal-to-noise ratio for a `k`-bit peak value of `2^k - 1`.
pub fn psnr(reference: &Image, test: &Image, k: u32) -> Result<QualityReport> {
    let mse = mse(reference, test)?;
    Ok(QualityReport {
        mse,
        psnr_db: psnr_from_mse(mse, k),
        bit_depth_k: k,
    })
}

pub fn psnr_from_mse(mse: f64, k: u32) -> f64 {
    if mse == 0.0 {
        return f64::INFINITY;
    }
    let peak = 2f64.powi(k as i32) - 1.0;
    10.0 * (peak * peak / mse).log10()
}

/// Reads a binary (P5) or ASCII (P2) PGM with maxval 255.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes)
}

/// Writes a binary (P5) PGM. Values are clipped to `[0, 255]` and rounded
/// half-up.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let encoded = encode_pgm(img);
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&encoded).map_err(|e| Error::io(path, e))
}

pub fn encode_pgm(img: &Image) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.to_bytes());
    out
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let c = self.bytes[self.pos];
            if c == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && !self.bytes[self.pos].is_ascii_whitespace()
            && self.bytes[self.pos] != b'#'
        {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        let tok = self
            .token()
            .ok_or_else(|| Error::PgmHeader(format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                Error::PgmHeader(format!(
                    "invalid {what} `{}`",
                    String::from_utf8_lossy(tok)
                ))
            })
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Image> {
    let mut reader = HeaderReader { bytes, pos: 0 };
    let magic = reader
        .token()
        .ok_or_else(|| Error::PgmHeader("empty file".into()))?;
    let binary = match magic {
        b"P5" => true,
        b"P2" => false,
        other => {
            return Err(Error::PgmHeader(format!(
                "unknown magic `{}`",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let width = reader.number("width")? as usize;
    let height = reader.number("height")? as usize;
    let maxval = reader.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::PgmHeader(format!("zero dimension {width}x{height}")));
    }
    if maxval != 255 {
        return Err(Error::UnsupportedMaxval(maxval));
    }
    let expected = width * height;

    let data: Vec<f64> = if binary {
        // exactly one whitespace byte separates the header from the raster
        let start = reader.pos + 1;
        let raster = bytes.get(start..).unwrap_or(&[]);
        if raster.len() < expected {
            return Err(Error::PgmTruncated {
                expected,
                found: raster.len(),
            });
        }
        raster[..expected].iter().map(|&b| f64::from(b)).collect()
    } else {
        let mut values = Vec::with_capacity(expected);
        while values.len() < expected {
            match reader.token() {
                Some(tok) => {
                    let v: u32 = std::str::from_utf8(tok)
                        .ok()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| {
                            Error::PgmHeader(format!(
                                "invalid sample `{}`",
                                String::from_utf8_lossy(tok)
                            ))
                        })?;
                    if v > maxval {
                        return Err(Error::PgmHeader(format!("sample {v} exceeds maxval")));
                    }
                    values.push(f64::from(v));
                }
                None => {
                    return Err(Error::PgmTruncated {
                        expected,
                        found: values.len(),
                    })
                }
            }
        }
        values
    };
    Image::new(width, height, data)
}

/// Deterministic integer-valued test scene with smooth shading, hard edges
/// and fine texture, standing in for a natural photograph.
pub fn synthetic_scene(width: usize, height: usize) -> Image {
    let (w, h) = (width as f64, height as f64);
    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let (fx, fy) = (x as f64 / w, y as f64 / h);
            // sky-like vertical gradient with a soft horizon
            let mut v = 170.0 - 90.0 * fy + 20.0 * (3.0 * fx).sin();
            // ground
            if fy > 0.72 + 0.05 * (6.0 * fx).cos() {
                v = 60.0 + 25.0 * ((37.0 * fx).sin() * (29.0 * fy).cos());
            }
            // bright disc with shading
            let (dx, dy) = (fx - 0.68, fy - 0.32);
            let r2 = dx * dx + dy * dy;
            if r2 < 0.028 {
                v = 235.0 - 900.0 * r2;
            }
            // dark standing figure
            if (0.22..0.36).contains(&fx) && (0.28..0.86).contains(&fy) {
                v = 25.0 + 30.0 * fy;
            }
            let (hx, hy) = (fx - 0.29, fy - 0.22);
            if hx * hx + hy * hy < 0.004 {
                v = 35.0;
            }
            // striped pole
            if (0.50..0.53).contains(&fx) && fy > 0.18 {
                v = if ((fy * h) as usize / 3).is_multiple_of(2) { 210.0 } else { 90.0 };
            }
            data.push(v.clamp(0.0, 255.0).round());
        }
    }
    Image::new(width, height, data).expect("scene dimensions are positive")
}
