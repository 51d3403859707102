//! Single runs, parameter sweeps and the dithered-complement comparison.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::acquisition::{acquire, AcquisitionConfig, Method, Mode, NoiseSpec};
use crate::error::{Error, Result};
use crate::image::{load_image, psnr, save_image, Image};
use crate::patterns::{
    complement_binary, floyd_steinberg, fourier_pattern, frequency_schedule, BinaryPattern,
    GrayPattern, PatternParams, DEFAULT_CONTRAST,
};
use crate::reconstruction::{assemble, reconstruct, symmetrize};

pub const RESULTS_FILE: &str = "results.csv";
pub const RESULTS_HEADER: &str =
    "method,mode,budget,sigma,seed,coefficients_covered,mse,psnr_db,wall_ms";

/// One cell of an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSpec {
    pub method: Method,
    pub mode: Mode,
    pub budget: usize,
    pub sigma: f64,
    pub seed: u64,
    pub background_flux: f64,
}

impl RunSpec {
    pub fn new(method: Method, mode: Mode, budget: usize) -> Self {
        Self {
            method,
            mode,
            budget,
            sigma: 0.0,
            seed: 0,
            background_flux: 0.0,
        }
    }

    pub fn with_noise(mut self, sigma: f64, seed: u64) -> Self {
        self.sigma = sigma;
        self.seed = seed;
        self
    }

    pub fn with_background(mut self, flux: f64) -> Self {
        self.background_flux = flux;
        self
    }

    /// `{method}_{mode}_m{budget}_s{sigma}_seed{seed}.pgm`, with `.` in sigma
    /// written as `p`.
    pub fn image_file_name(&self) -> String {
        format!(
            "{}_{}_m{}_s{}_seed{}.pgm",
            self.method,
            self.mode,
            self.budget,
            format_sigma(self.sigma).replace('.', "p"),
            self.seed
        )
    }

    fn key(&self) -> CellKey {
        (
            self.method.to_string(),
            self.mode.to_string(),
            self.budget.to_string(),
            format_sigma(self.sigma),
            self.seed.to_string(),
        )
    }
}

fn format_sigma(sigma: f64) -> String {
    format!("{sigma}")
}

type CellKey = (String, String, String, String, String);

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    pub mode: Mode,
    pub budget: usize,
    pub sigma: f64,
    pub seed: u64,
    pub coefficients_covered: usize,
    pub mse: f64,
    /// `f64::INFINITY` for an exact reconstruction, written as `inf`.
    pub psnr_db: f64,
    pub wall_ms: u64,
}

impl ResultRow {
    pub fn to_csv_line(&self) -> String {
        let psnr = if self.psnr_db.is_infinite() {
            "inf".to_string()
        } else {
            format!("{}", self.psnr_db)
        };
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.method,
            self.mode,
            self.budget,
            format_sigma(self.sigma),
            self.seed,
            self.coefficients_covered,
            self.mse,
            psnr,
            self.wall_ms
        )
    }
}

/// Checks the object is square with even side, as the sampling grid needs.
pub fn validate_object(object: &Image) -> Result<()> {
    let (w, h) = (object.width(), object.height());
    if w != h || w % 2 != 0 {
        return Err(Error::InvalidImage(format!(
            "object must be square with an even side, got {w}x{h}"
        )));
    }
    Ok(())
}

/// Runs schedule → acquire → assemble → symmetrize → reconstruct and scores
/// the clipped (unrounded) reconstruction against `object`. Returns the
/// clipped reconstruction.
pub fn run_single(object: &Image, spec: &RunSpec) -> Result<(Image, ResultRow)> {
    validate_object(object)?;
    let started = Instant::now();
    let schedule = frequency_schedule(object.width(), object.height())?;
    let config = AcquisitionConfig::new(spec.method, spec.mode, spec.budget)
        .with_noise(NoiseSpec::new(spec.sigma, spec.seed)?)
        .with_background(spec.background_flux);
    let measurements = acquire(object, &schedule, &config)?;
    let half = assemble(&measurements, DEFAULT_CONTRAST)?;
    let recon = reconstruct(&symmetrize(&half)?)?.clipped();
    let quality = psnr(object, &recon, 8)?;
    let wall_ms = (started.elapsed().as_secs_f64() * 1000.0).ceil() as u64;
    Ok((
        recon,
        ResultRow {
            method: spec.method,
            mode: spec.mode,
            budget: spec.budget,
            sigma: spec.sigma,
            seed: spec.seed,
            coefficients_covered: config.coefficients_covered(),
            mse: quality.mse,
            psnr_db: quality.psnr_db,
            wall_ms,
        },
    ))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepSpec {
    pub object_path: PathBuf,
    pub methods: Vec<Method>,
    pub modes: Vec<Mode>,
    pub budgets: Vec<usize>,
    pub sigmas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub background_flux: f64,
}

fn parse_list<T>(value: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse)
        .collect()
}

fn parse_number<T: std::str::FromStr>(field: &str, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::config(field, format!("cannot parse `{s}`")))
}

impl SweepSpec {
    /// Parses `key=value` lines. Lists are comma separated, `#` starts a
    /// comment.
    pub fn parse(text: &str) -> Result<Self> {
        let spec = Self::parse_lenient(text)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Like [`SweepSpec::parse`] but leaves missing entries empty so they can
    /// be supplied from elsewhere before [`SweepSpec::validate`].
    pub fn parse_lenient(text: &str) -> Result<Self> {
        let mut spec = SweepSpec::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config("spec", format!("line {} is not key=value: `{raw}`", i + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "object" | "object_path" => spec.object_path = PathBuf::from(value),
                "output_dir" | "out_dir" => spec.output_dir = PathBuf::from(value),
                "methods" => spec.methods = parse_list(value, |s| s.parse())?,
                "modes" => spec.modes = parse_list(value, |s| s.parse())?,
                "budgets" => spec.budgets = parse_list(value, |s| parse_number(key, s))?,
                "sigmas" => spec.sigmas = parse_list(value, |s| parse_number(key, s))?,
                "seeds" => spec.seeds = parse_list(value, |s| parse_number(key, s))?,
                "background_flux" => spec.background_flux = parse_number(key, value)?,
                other => return Err(Error::config(other, "unknown key")),
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.object_path.as_os_str().is_empty() {
            return Err(Error::config("object_path", "missing"));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(Error::config("output_dir", "missing"));
        }
        let empty = |field: &str, len: usize| {
            if len == 0 {
                Err(Error::config(field, "list must not be empty"))
            } else {
                Ok(())
            }
        };
        empty("methods", self.methods.len())?;
        empty("modes", self.modes.len())?;
        empty("budgets", self.budgets.len())?;
        empty("sigmas", self.sigmas.len())?;
        empty("seeds", self.seeds.len())?;
        if self.budgets.contains(&0) {
            return Err(Error::config("budgets", "budgets must be positive"));
        }
        if let Some(s) = self.sigmas.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return Err(Error::config("sigmas", format!("sigma {s} must be finite and >= 0")));
        }
        if !(self.background_flux >= 0.0 && self.background_flux.is_finite()) {
            return Err(Error::config("background_flux", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// Cells in output order: method, mode, budget, sigma, seed.
    pub fn cells(&self) -> Vec<RunSpec> {
        let mut out = Vec::new();
        for &method in &self.methods {
            for &mode in &self.modes {
                for &budget in &self.budgets {
                    for &sigma in &self.sigmas {
                        for &seed in &self.seeds {
                            out.push(
                                RunSpec::new(method, mode, budget)
                                    .with_noise(sigma, seed)
                                    .with_background(self.background_flux),
                            );
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepSummary {
    pub csv_path: PathBuf,
    pub computed: usize,
    pub skipped: usize,
}

fn existing_cells(path: &Path) -> Result<HashSet<CellKey>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut keys = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if i == 0 {
            if line.trim() != RESULTS_HEADER {
                return Err(Error::Csv {
                    line: 1,
                    message: format!("existing results file has header `{line}`"),
                });
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            // a torn final row from an interrupted run is recomputed
            continue;
        }
        keys.insert((
            fields[0].to_string(),
            fields[1].to_string(),
            fields[2].to_string(),
            fields[3].to_string(),
            fields[4].to_string(),
        ));
    }
    Ok(keys)
}

/// Runs every cell of the sweep in order, appending one CSV row and writing
/// one PGM per cell. Rows already present in `results.csv` are skipped.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepSummary> {
    spec.validate()?;
    let dir = &spec.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(RESULTS_FILE);

    let has_content = fs::metadata(&csv_path).map(|m| m.len() > 0).unwrap_or(false);
    let done = if has_content {
        existing_cells(&csv_path)?
    } else {
        HashSet::new()
    };
    let mut csv = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&csv_path)
        .map_err(|e| Error::io(&csv_path, e))?;
    if !has_content {
        writeln!(csv, "{RESULTS_HEADER}").map_err(|e| Error::io(&csv_path, e))?;
    } else if !ends_with_newline(&csv_path)? {
        writeln!(csv).map_err(|e| Error::io(&csv_path, e))?;
    }

    let object = load_image(&spec.object_path)?;
    validate_object(&object)?;

    let mut summary = SweepSummary {
        csv_path: csv_path.clone(),
        computed: 0,
        skipped: 0,
    };
    for cell in spec.cells() {
        if done.contains(&cell.key()) {
            summary.skipped += 1;
            continue;
        }
        let (image, row) = run_single(&object, &cell)?;
        save_image(&image, dir.join(cell.image_file_name()))?;
        writeln!(csv, "{}", row.to_csv_line()).map_err(|e| Error::io(&csv_path, e))?;
        csv.flush().map_err(|e| Error::io(&csv_path, e))?;
        summary.computed += 1;
    }
    Ok(summary)
}

fn ends_with_newline(path: &Path) -> Result<bool> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(bytes.last() == Some(&b'\n'))
}

/// Panels comparing the complement of a dithered pattern with the dither of
/// its π-shifted twin.
#[derive(Debug, Clone)]
pub struct PatternDiff {
    pub gray: GrayPattern,
    pub dithered: BinaryPattern,
    pub complement: BinaryPattern,
    pub shifted_dithered: BinaryPattern,
    pub difference: BinaryPattern,
    pub differing_pixels: usize,
}

impl PatternDiff {
    pub fn compute(fx_num: usize, fy_num: usize, theta: f64, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidParams("size must be at least 1".into()));
        }
        if fx_num >= size || fy_num >= size {
            return Err(Error::InvalidParams(format!(
                "frequency numerators ({fx_num}, {fy_num}) must be below size {size}"
            )));
        }
        let n = size as f64;
        let params = PatternParams::new(fx_num as f64 / n, fy_num as f64 / n, theta, size, size);
        let gray = fourier_pattern(params)?;
        let dithered = floyd_steinberg(&gray);
        let complement = complement_binary(&dithered);
        let shifted_dithered = floyd_steinberg(&fourier_pattern(PatternParams {
            theta: theta + PI,
            ..params
        })?);
        let difference = complement.xor(&shifted_dithered)?;
        let differing_pixels = difference.ones();
        Ok(Self {
            gray,
            dithered,
            complement,
            shifted_dithered,
            difference,
            differing_pixels,
        })
    }

    pub const FILE_NAMES: [&'static str; 5] = [
        "pattern_gray.pgm",
        "pattern_dithered.pgm",
        "pattern_complement.pgm",
        "pattern_shifted_dithered.pgm",
        "pattern_difference.pgm",
    ];

    /// Writes the five panels into `dir`.
    pub fn save(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let panels = [
            self.gray.to_image(),
            self.dithered.to_image(),
            self.complement.to_image(),
            self.shifted_dithered.to_image(),
            self.difference.to_image(),
        ];
        let mut paths = Vec::with_capacity(5);
        for (img, name) in panels.iter().zip(Self::FILE_NAMES) {
            let path = dir.join(name);
            save_image(img, &path)?;
            paths.push(path);
        }
        Ok(paths)
    }
}

pub fn diff_patterns(
    fx_num: usize,
    fy_num: usize,
    theta: f64,
    size: usize,
    out_dir: &Path,
) -> Result<(PatternDiff, Vec<PathBuf>)> {
    let diff = PatternDiff::compute(fx_num, fy_num, theta, size)?;
    let paths = diff.save(out_dir)?;
    Ok((diff, paths))
}
