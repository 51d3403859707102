//! Simulated single-pixel detection.
//!
//! A reading is the mean over pixels of `object × pattern`, plus an optional
//! constant background flux and Gaussian noise. Complementary acquisition
//! reads a pattern on the "plus" arm and its mirror complement on the
//! "minus" arm in the same display slot.
//!
//! Noise is keyed by `(master_seed, seq, arm)` so every reading is
//! reproducible on its own and acquisition order does not matter.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::patterns::{
    floyd_steinberg, fourier_pattern, FrequencyCoord, Illumination, PatternParams,
    DEFAULT_CONTRAST, DEFAULT_DC,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Cfsi,
    FourStep,
    ThreeStep,
    TwoStep,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Cfsi,
        Method::FourStep,
        Method::ThreeStep,
        Method::TwoStep,
    ];

    /// Displayed patterns per Fourier coefficient.
    pub fn steps(self) -> usize {
        match self {
            Method::Cfsi | Method::TwoStep => 2,
            Method::ThreeStep => 3,
            Method::FourStep => 4,
        }
    }

    pub fn phases(self) -> &'static [f64] {
        const HALF: [f64; 2] = [0.0, PI / 2.0];
        const FOUR: [f64; 4] = [0.0, PI / 2.0, PI, 3.0 * PI / 2.0];
        const THREE: [f64; 3] = [0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0];
        match self {
            Method::Cfsi | Method::TwoStep => &HALF,
            Method::FourStep => &FOUR,
            Method::ThreeStep => &THREE,
        }
    }

    /// Detector readings per Fourier coefficient.
    pub fn readings_per_coefficient(self) -> usize {
        match self {
            Method::Cfsi => 4,
            m => m.steps(),
        }
    }

    pub fn is_complementary(self) -> bool {
        self == Method::Cfsi
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Cfsi => "cfsi",
            Method::FourStep => "four-step",
            Method::ThreeStep => "three-step",
            Method::TwoStep => "two-step",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cfsi" => Ok(Method::Cfsi),
            "four-step" | "4-step" => Ok(Method::FourStep),
            "three-step" | "3-step" => Ok(Method::ThreeStep),
            "two-step" | "2-step" => Ok(Method::TwoStep),
            other => Err(Error::config("method", format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Grayscale,
    Binary,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Grayscale => "grayscale",
            Mode::Binary => "binary",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "grayscale" | "gray" => Ok(Mode::Grayscale),
            "binary" => Ok(Mode::Binary),
            other => Err(Error::config("mode", format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arm {
    /// Mirrors in state "1".
    Plus,
    /// Mirrors in state "0".
    Minus,
    Single,
}

impl Arm {
    fn key(self) -> u8 {
        match self {
            Arm::Plus => 0,
            Arm::Minus => 1,
            Arm::Single => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Plus => "plus",
            Arm::Minus => "minus",
            Arm::Single => "single",
        }
    }
}

impl FromStr for Arm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus" => Ok(Arm::Plus),
            "minus" => Ok(Arm::Minus),
            "single" => Ok(Arm::Single),
            other => Err(Error::config("arm", format!("unknown detector arm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub mu: f64,
    pub master_seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, master_seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::config("sigma", format!("must be finite and >= 0, got {sigma}")));
        }
        Ok(Self {
            sigma,
            mu: 0.0,
            master_seed,
        })
    }

    pub fn noiseless() -> Self {
        Self {
            sigma: 0.0,
            mu: 0.0,
            master_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementRecord {
    pub coord: FrequencyCoord,
    /// Index into [`Method::phases`].
    pub phase_index: u8,
    pub arm: Arm,
    pub value: f64,
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub width: usize,
    pub height: usize,
    pub method: Method,
    pub records: Vec<MeasurementRecord>,
}

impl MeasurementSet {
    /// Number of distinct Fourier coefficients with at least one reading.
    pub fn coefficients(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        self.records.iter().filter(|r| seen.insert((r.coord.u, r.coord.v))).count()
    }

    /// `seq,u,v,phase_index,arm,value` with values to 15 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "seq,u,v,phase_index,arm,value")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.seq,
                r.coord.u,
                r.coord.v,
                r.phase_index,
                r.arm.as_str(),
                format_significant(r.value, 15)
            )?;
        }
        Ok(())
    }

    /// Re-imports the output of [`MeasurementSet::write_csv`]. Grid size and
    /// method are not part of the table and must be supplied.
    pub fn read_csv<R: BufRead>(input: R, width: usize, height: usize, method: Method) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::Csv {
                line: line_no,
                message: e.to_string(),
            })?;
            if i == 0 {
                if line.trim() != "seq,u,v,phase_index,arm,value" {
                    return Err(Error::Csv {
                        line: 1,
                        message: format!("unexpected header `{line}`"),
                    });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| Error::Csv {
                line: line_no,
                message,
            };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(bad(format!("expected 6 fields, found {}", fields.len())));
            }
            let num = |s: &str, what: &str| -> Result<u64> {
                s.trim().parse().map_err(|_| bad(format!("invalid {what} `{s}`")))
            };
            let (u, v) = (num(fields[1], "u")? as usize, num(fields[2], "v")? as usize);
            if u >= width || v >= height {
                return Err(bad(format!("coordinate ({u},{v}) outside {width}x{height}")));
            }
            records.push(MeasurementRecord {
                seq: num(fields[0], "seq")?,
                coord: FrequencyCoord::new(u, v, width, height),
                phase_index: num(fields[3], "phase_index")? as u8,
                arm: fields[4].trim().parse().map_err(|e: Error| bad(e.to_string()))?,
                value: fields[5]
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("invalid value `{}`", fields[5])))?,
            });
        }
        Ok(Self {
            width,
            height,
            method,
            records,
        })
    }
}

/// Formats like C's `%.{digits}g`.
pub fn format_significant(value: f64, digits: usize) -> String {
    if value == 0.0 || !value.is_finite() {
        return format!("{value}");
    }
    let sci = format!("{:.*e}", digits - 1, value);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_fraction(mantissa);
        format!("{mantissa}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_fraction(&format!("{value:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionConfig {
    pub method: Method,
    pub mode: Mode,
    /// Displayed patterns.
    pub budget: usize,
    pub noise: NoiseSpec,
    /// Constant flux added to every detector reading.
    pub background_flux: f64,
}

impl AcquisitionConfig {
    pub fn new(method: Method, mode: Mode, budget: usize) -> Self {
        Self {
            method,
            mode,
            budget,
            noise: NoiseSpec::noiseless(),
            background_flux: 0.0,
        }
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_background(mut self, flux: f64) -> Self {
        self.background_flux = flux;
        self
    }

    /// Fourier coefficients a budget pays for.
    pub fn coefficients_covered(&self) -> usize {
        self.budget / self.method.steps()
    }
}

fn check_dims(object: &Image, pattern: &impl Illumination) -> Result<()> {
    if object.width() != pattern.width() || object.height() != pattern.height() {
        return Err(Error::DimensionMismatch {
            left_w: object.width(),
            left_h: object.height(),
            right_w: pattern.width(),
            right_h: pattern.height(),
        });
    }
    Ok(())
}

/// Mean over pixels of `object × pattern`.
pub fn measure(object: &Image, pattern: &impl Illumination) -> Result<f64> {
    check_dims(object, pattern)?;
    let sum: f64 = object
        .data()
        .iter()
        .enumerate()
        .map(|(i, o)| o * pattern.weight(i))
        .sum();
    Ok(sum / object.data().len() as f64)
}

/// Reads `pattern` on the plus arm and its complement `1 - pattern` on the
/// minus arm. The arms draw independent noise.
pub fn measure_complementary(
    object: &Image,
    pattern: &impl Illumination,
    noise: &NoiseSpec,
    background_flux: f64,
    seq: u64,
) -> Result<(f64, f64)> {
    check_dims(object, pattern)?;
    let (mut plus, mut minus) = (0.0, 0.0);
    for (i, o) in object.data().iter().enumerate() {
        let w = pattern.weight(i);
        plus += o * w;
        minus += o * (1.0 - w);
    }
    let n = object.data().len() as f64;
    Ok((
        add_noise(plus / n + background_flux, noise, seq, Arm::Plus),
        add_noise(minus / n + background_flux, noise, seq, Arm::Minus),
    ))
}

fn noise_rng(master_seed: u64, seq: u64, arm: Arm) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8] = arm.key();
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(seq);
    rng
}

/// `value + c` with `c ~ N(mu, sigma²)` drawn from a generator keyed by
/// `(master_seed, seq, arm)`. Identity when `sigma == 0`.
pub fn add_noise(value: f64, noise: &NoiseSpec, seq: u64, arm: Arm) -> f64 {
    if noise.sigma == 0.0 {
        return value;
    }
    let normal = Normal::new(noise.mu, noise.sigma).expect("sigma validated as finite and >= 0");
    value + normal.sample(&mut noise_rng(noise.master_seed, seq, arm))
}

/// Pattern actually displayed for a coefficient/phase in the given mode.
fn displayed_pattern(
    coord: FrequencyCoord,
    theta: f64,
    width: usize,
    height: usize,
    mode: Mode,
) -> Result<DisplayedPattern> {
    let gray = fourier_pattern(
        PatternParams::for_coord(coord, theta, width, height)
            .with_amplitude(DEFAULT_DC, DEFAULT_CONTRAST),
    )?;
    Ok(match mode {
        Mode::Grayscale => DisplayedPattern::Gray(gray),
        Mode::Binary => DisplayedPattern::Binary(floyd_steinberg(&gray)),
    })
}

enum DisplayedPattern {
    Gray(crate::patterns::GrayPattern),
    Binary(crate::patterns::BinaryPattern),
}

fn read_coefficient(
    object: &Image,
    coord: FrequencyCoord,
    index: usize,
    config: &AcquisitionConfig,
) -> Result<Vec<MeasurementRecord>> {
    let (w, h) = (object.width(), object.height());
    let method = config.method;
    let base = (index * method.readings_per_coefficient()) as u64;
    let mut records = Vec::with_capacity(method.readings_per_coefficient());
    for (phase_index, &theta) in method.phases().iter().enumerate() {
        let pattern = displayed_pattern(coord, theta, w, h, config.mode)?;
        if method.is_complementary() {
            let seq = base + 2 * phase_index as u64;
            let (plus, minus) = match &pattern {
                DisplayedPattern::Gray(p) => {
                    measure_complementary(object, p, &config.noise, config.background_flux, seq)?
                }
                DisplayedPattern::Binary(p) => {
                    measure_complementary(object, p, &config.noise, config.background_flux, seq)?
                }
            };
            for (arm, value, seq) in [(Arm::Plus, plus, seq), (Arm::Minus, minus, seq + 1)] {
                records.push(MeasurementRecord {
                    coord,
                    phase_index: phase_index as u8,
                    arm,
                    value,
                    seq,
                });
            }
        } else {
            let seq = base + phase_index as u64;
            let clean = match &pattern {
                DisplayedPattern::Gray(p) => measure(object, p)?,
                DisplayedPattern::Binary(p) => measure(object, p)?,
            };
            records.push(MeasurementRecord {
                coord,
                phase_index: phase_index as u8,
                arm: Arm::Single,
                value: add_noise(clean + config.background_flux, &config.noise, seq, Arm::Single),
                seq,
            });
        }
    }
    Ok(records)
}

/// Walks `schedule` in order, spending the pattern budget one coefficient at
/// a time. A trailing coefficient the budget cannot fully pay for is not
/// measured.
pub fn acquire(
    object: &Image,
    schedule: &[FrequencyCoord],
    config: &AcquisitionConfig,
) -> Result<MeasurementSet> {
    let steps = config.method.steps();
    if config.budget < steps {
        return Err(Error::Budget(format!(
            "{} needs at least {steps} patterns per coefficient, budget is {}",
            config.method, config.budget
        )));
    }
    let covered = config.coefficients_covered();
    if covered > schedule.len() {
        return Err(Error::Budget(format!(
            "budget {} covers {covered} coefficients but the schedule has only {} ({} patterns for full sampling)",
            config.budget,
            schedule.len(),
            schedule.len() * steps
        )));
    }
    if !(config.background_flux >= 0.0 && config.background_flux.is_finite()) {
        return Err(Error::config(
            "background_flux",
            format!("must be finite and >= 0, got {}", config.background_flux),
        ));
    }
    let per_coeff: Vec<Vec<MeasurementRecord>> = schedule[..covered]
        .par_iter()
        .enumerate()
        .map(|(i, &coord)| read_coefficient(object, coord, i, config))
        .collect::<Result<_>>()?;
    Ok(MeasurementSet {
        width: object.width(),
        height: object.height(),
        method: config.method,
        records: per_coeff.into_iter().flatten().collect(),
    })
}
