//! Fourier basis illumination patterns, their complements and binarizations,
//! and the order in which Fourier coefficients are sampled.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};
use crate::image::Image;

pub const DEFAULT_DC: f64 = 0.5;
pub const DEFAULT_CONTRAST: f64 = 0.5;

/// Parameters of `a + b cos(2π fx x + 2π fy y + θ)` on a `width × height`
/// grid. Frequencies are in cycles per pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternParams {
    pub fx: f64,
    pub fy: f64,
    pub theta: f64,
    pub a: f64,
    pub b: f64,
    pub width: usize,
    pub height: usize,
}

impl PatternParams {
    /// Pattern with the default `a = b = 0.5`.
    pub fn new(fx: f64, fy: f64, theta: f64, width: usize, height: usize) -> Self {
        Self {
            fx,
            fy,
            theta,
            a: DEFAULT_DC,
            b: DEFAULT_CONTRAST,
            width,
            height,
        }
    }

    pub fn for_coord(coord: FrequencyCoord, theta: f64, width: usize, height: usize) -> Self {
        let (fx, fy) = coord.frequency(width, height);
        Self::new(fx, fy, theta, width, height)
    }

    pub fn with_amplitude(mut self, a: f64, b: f64) -> Self {
        self.a = a;
        self.b = b;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParams(format!(
                "pattern size must be at least 1x1, got {}x{}",
                self.width, self.height
            )));
        }
        if !(self.b > 0.0 && self.b <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "contrast b = {} outside (0, 1]",
                self.b
            )));
        }
        if self.a + self.b > 1.0 + 1e-15 || self.a - self.b < -1e-15 {
            return Err(Error::InvalidParams(format!(
                "a = {}, b = {} violate a + b <= 1 and a - b >= 0",
                self.a, self.b
            )));
        }
        if !(self.fx.is_finite() && self.fy.is_finite() && self.theta.is_finite()) {
            return Err(Error::InvalidParams("non-finite frequency or phase".into()));
        }
        Ok(())
    }
}

/// Anything that can illuminate the scene: a grid of weights in `[0, 1]`.
pub trait Illumination {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
    fn weight(&self, index: usize) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrayPattern {
    pub params: PatternParams,
    data: Vec<f64>,
}

impl GrayPattern {
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn width(&self) -> usize {
        self.params.width
    }

    pub fn height(&self) -> usize {
        self.params.height
    }

    /// Scaled by 255 for viewing.
    pub fn to_image(&self) -> Image {
        Image::new(
            self.width(),
            self.height(),
            self.data.iter().map(|v| v * 255.0).collect(),
        )
        .expect("pattern dimensions are valid")
    }
}

impl Illumination for GrayPattern {
    fn width(&self) -> usize {
        self.params.width
    }
    fn height(&self) -> usize {
        self.params.height
    }
    fn weight(&self, index: usize) -> f64 {
        self.data[index]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    SpatialDither,
    BitPlane(u8),
    Complement,
    Random,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryPattern {
    width: usize,
    height: usize,
    data: Vec<u8>,
    pub provenance: Provenance,
}

impl BinaryPattern {
    pub fn new(width: usize, height: usize, data: Vec<u8>, provenance: Provenance) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::InvalidParams(format!(
                "binary pattern {width}x{height} with {} samples",
                data.len()
            )));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::InvalidParams("binary pattern values must be 0 or 1".into()));
        }
        Ok(Self {
            width,
            height,
            data,
            provenance,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn ones(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    /// Number of pixels where the two patterns disagree.
    pub fn hamming(&self, other: &BinaryPattern) -> Result<usize> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch {
                left_w: self.width,
                left_h: self.height,
                right_w: other.width,
                right_h: other.height,
            });
        }
        Ok(self.data.iter().zip(&other.data).filter(|(a, b)| a != b).count())
    }

    /// Elementwise XOR, 1 where the patterns differ.
    pub fn xor(&self, other: &BinaryPattern) -> Result<BinaryPattern> {
        self.hamming(other)?;
        Ok(BinaryPattern {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a ^ b).collect(),
            provenance: self.provenance,
        })
    }

    /// Ones rendered as 255, zeros as 0.
    pub fn to_image(&self) -> Image {
        Image::new(
            self.width,
            self.height,
            self.data.iter().map(|&v| f64::from(v) * 255.0).collect(),
        )
        .expect("pattern dimensions are valid")
    }
}

impl Illumination for BinaryPattern {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn weight(&self, index: usize) -> f64 {
        f64::from(self.data[index])
    }
}

pub fn fourier_pattern(params: PatternParams) -> Result<GrayPattern> {
    params.validate()?;
    let PatternParams {
        fx,
        fy,
        theta,
        a,
        b,
        width,
        height,
    } = params;
    let theta_turns = theta / (2.0 * PI);
    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let turns = fx * x as f64 + fy * y as f64 + theta_turns;
            data.push(a + b * cos_turns(turns));
        }
    }
    Ok(GrayPattern { params, data })
}

/// `cos(2π t)` with the argument reduced in turns, so that whole, half and
/// quarter turns give exactly `±1` and `0`.
fn cos_turns(t: f64) -> f64 {
    let r = (t - t.round()).abs();
    if r <= 0.125 {
        (2.0 * PI * r).cos()
    } else if r < 0.375 {
        (2.0 * PI * (0.25 - r)).sin()
    } else {
        -(2.0 * PI * (0.5 - r)).cos()
    }
}

/// The π-shifted pattern, computed as `2a - P`.
pub fn complement_gray(p: &GrayPattern) -> GrayPattern {
    let two_a = 2.0 * p.params.a;
    let mut params = p.params;
    params.theta += PI;
    GrayPattern {
        params,
        data: p.data.iter().map(|v| two_a - v).collect(),
    }
}

pub fn complement_binary(p: &BinaryPattern) -> BinaryPattern {
    BinaryPattern {
        width: p.width,
        height: p.height,
        data: p.data.iter().map(|v| 1 - v).collect(),
        provenance: Provenance::Complement,
    }
}

/// Floyd–Steinberg error diffusion: raster scan, `value >= 0.5` maps to 1,
/// error spread 7/16 right, 3/16 below-left, 5/16 below, 1/16 below-right.
/// Error that would leave the grid is dropped.
pub fn floyd_steinberg(p: &GrayPattern) -> BinaryPattern {
    let (w, h) = (p.width(), p.height());
    let mut buf = p.data.clone();
    let mut out = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let old = buf[i];
            let new = if old >= 0.5 { 1.0 } else { 0.0 };
            out[i] = new as u8;
            let err = old - new;
            if x + 1 < w {
                buf[i + 1] += err * 7.0 / 16.0;
            }
            if y + 1 < h {
                if x > 0 {
                    buf[i + w - 1] += err * 3.0 / 16.0;
                }
                buf[i + w] += err * 5.0 / 16.0;
                if x + 1 < w {
                    buf[i + w + 1] += err * 1.0 / 16.0;
                }
            }
        }
    }
    BinaryPattern {
        width: w,
        height: h,
        data: out,
        provenance: Provenance::SpatialDither,
    }
}

/// Decomposes `round(255 · p)` into eight bit-planes, least significant
/// first.
pub fn temporal_bitplanes(p: &GrayPattern) -> [BinaryPattern; 8] {
    let levels: Vec<u8> = p
        .data
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    std::array::from_fn(|k| BinaryPattern {
        width: p.width(),
        height: p.height(),
        data: levels.iter().map(|q| (q >> k) & 1).collect(),
        provenance: Provenance::BitPlane(k as u8),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoordKind {
    SelfConjugate,
    HalfPlane,
}

impl CoordKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CoordKind::SelfConjugate => "self-conjugate",
            CoordKind::HalfPlane => "half-plane",
        }
    }
}

/// Integer DFT grid index; `fx = u / width`, `fy = v / height`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrequencyCoord {
    pub u: usize,
    pub v: usize,
    pub kind: CoordKind,
}

impl FrequencyCoord {
    pub fn new(u: usize, v: usize, width: usize, height: usize) -> Self {
        let kind = if (2 * u).is_multiple_of(width) && (2 * v).is_multiple_of(height) {
            CoordKind::SelfConjugate
        } else {
            CoordKind::HalfPlane
        };
        Self { u, v, kind }
    }

    pub fn frequency(&self, width: usize, height: usize) -> (f64, f64) {
        (self.u as f64 / width as f64, self.v as f64 / height as f64)
    }

    pub fn conjugate(&self, width: usize, height: usize) -> (usize, usize) {
        ((width - self.u) % width, (height - self.v) % height)
    }

    pub fn is_dc(&self) -> bool {
        self.u == 0 && self.v == 0
    }
}

/// Half-plane representative set: rows `v = 0` and `v = H/2` keep
/// `u <= W/2`, rows `0 < v < H/2` keep every `u`.
pub fn half_plane(width: usize, height: usize) -> Result<Vec<FrequencyCoord>> {
    if width < 2 || height < 2 || !width.is_multiple_of(2) || !height.is_multiple_of(2) {
        return Err(Error::InvalidParams(format!(
            "sampling grid must have even dimensions >= 2, got {width}x{height}"
        )));
    }
    let mut coords = Vec::with_capacity(width * height / 2 + 2);
    for v in 0..=height / 2 {
        let u_max = if v == 0 || v == height / 2 { width / 2 } else { width - 1 };
        for u in 0..=u_max {
            coords.push(FrequencyCoord::new(u, v, width, height));
        }
    }
    Ok(coords)
}

/// Order in which half-plane coefficients are measured.
pub trait SamplingOrder {
    fn order(&self, width: usize, height: usize, coords: &mut [FrequencyCoord]);
}

/// Ascending wrapped radial distance, ties broken by `(v, u)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct RadialOrder;

impl SamplingOrder for RadialOrder {
    fn order(&self, width: usize, height: usize, coords: &mut [FrequencyCoord]) {
        let radius2 = |c: &FrequencyCoord| {
            let du = c.u.min(width - c.u);
            let dv = c.v.min(height - c.v);
            du * du + dv * dv
        };
        coords.sort_by_key(|c| (radius2(c), c.v, c.u));
    }
}

pub fn frequency_schedule(width: usize, height: usize) -> Result<Vec<FrequencyCoord>> {
    frequency_schedule_with(width, height, &RadialOrder)
}

pub fn frequency_schedule_with(
    width: usize,
    height: usize,
    order: &dyn SamplingOrder,
) -> Result<Vec<FrequencyCoord>> {
    let mut coords = half_plane(width, height)?;
    order.order(width, height, &mut coords);
    Ok(coords)
}

/// `index,u,v,kind` rows.
pub fn write_schedule_csv<W: Write>(mut out: W, schedule: &[FrequencyCoord]) -> std::io::Result<()> {
    writeln!(out, "index,u,v,kind")?;
    for (i, c) in schedule.iter().enumerate() {
        writeln!(out, "{i},{},{},{}", c.u, c.v, c.kind.as_str())?;
    }
    Ok(())
}
