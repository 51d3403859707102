//! Fourier coefficient assembly for each phase-shift scheme, conjugate
//! completion, and inverse-transform reconstruction.
//!
//! Transform convention: the forward coefficient is the pixel mean
//! `F(u,v) = (1/WH) Σ O(x,y) e^{-j2π(ux/W + vy/H)}`, the inverse is the plain
//! sum `O(x,y) = Σ F(u,v) e^{+j2π(ux/W + vy/H)}`. With mean-normalized
//! detector readings this needs no extra scaling.

use std::collections::HashMap;
use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::acquisition::{Arm, MeasurementSet, Method};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::patterns::{CoordKind, FrequencyCoord, DEFAULT_DC};

const MAX_PHASES: usize = 4;

/// Complex coefficient grid indexed by `(u, v)`, row-major in `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    width: usize,
    height: usize,
    coeffs: Vec<Complex64>,
    filled: Vec<bool>,
}

impl SpectrumGrid {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            coeffs: vec![Complex64::new(0.0, 0.0); width * height],
            filled: vec![false; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    fn index(&self, u: usize, v: usize) -> usize {
        v * self.width + u
    }

    pub fn get(&self, u: usize, v: usize) -> Complex64 {
        self.coeffs[self.index(u, v)]
    }

    pub fn is_filled(&self, u: usize, v: usize) -> bool {
        self.filled[self.index(u, v)]
    }

    pub fn set(&mut self, u: usize, v: usize, value: Complex64) {
        let i = self.index(u, v);
        self.coeffs[i] = value;
        self.filled[i] = true;
    }

    pub fn filled_count(&self) -> usize {
        self.filled.iter().filter(|&&f| f).count()
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `u,v,re,im,filled` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "u,v,re,im,filled")?;
        for v in 0..self.height {
            for u in 0..self.width {
                let c = self.get(u, v);
                writeln!(out, "{u},{v},{},{},{}", c.re, c.im, u8::from(self.is_filled(u, v)))?;
            }
        }
        Ok(())
    }
}

#[derive(Default, Clone, Copy)]
struct Readings {
    // [phase][arm]
    slots: [[Option<f64>; 3]; MAX_PHASES],
}

impl Readings {
    fn get(&self, coord: FrequencyCoord, phase: usize, arm: Arm) -> Result<f64> {
        self.slots[phase][arm_slot(arm)].ok_or_else(|| {
            Error::Integrity(format!(
                "coefficient ({},{}) is missing phase {phase} on the {} arm",
                coord.u,
                coord.v,
                arm.as_str()
            ))
        })
    }
}

fn arm_slot(arm: Arm) -> usize {
    match arm {
        Arm::Plus => 0,
        Arm::Minus => 1,
        Arm::Single => 2,
    }
}

/// Groups readings by coefficient, preserving first-seen order.
fn group(set: &MeasurementSet) -> Result<Vec<(FrequencyCoord, Readings)>> {
    let mut order = Vec::new();
    let mut by_coord: HashMap<(usize, usize), usize> = HashMap::new();
    for r in &set.records {
        let key = (r.coord.u, r.coord.v);
        if r.coord.u >= set.width || r.coord.v >= set.height {
            return Err(Error::Integrity(format!(
                "coefficient ({},{}) outside the {}x{} grid",
                key.0, key.1, set.width, set.height
            )));
        }
        let slot = *by_coord.entry(key).or_insert_with(|| {
            order.push((r.coord, Readings::default()));
            order.len() - 1
        });
        let phase = r.phase_index as usize;
        if phase >= MAX_PHASES {
            return Err(Error::Integrity(format!("phase index {phase} out of range")));
        }
        let cell = &mut order[slot].1.slots[phase][arm_slot(r.arm)];
        if cell.is_some() {
            return Err(Error::Integrity(format!(
                "duplicate reading for ({},{}) phase {phase} arm {}",
                key.0,
                key.1,
                r.arm.as_str()
            )));
        }
        *cell = Some(r.value);
    }
    Ok(order)
}

fn assemble_with(
    set: &MeasurementSet,
    coefficient: impl Fn(FrequencyCoord, &Readings) -> Result<Complex64>,
) -> Result<SpectrumGrid> {
    let mut grid = SpectrumGrid::new(set.width, set.height);
    for (coord, readings) in group(set)? {
        grid.set(coord.u, coord.v, coefficient(coord, &readings)?);
    }
    Ok(grid)
}

/// `((I⁺₀ − I⁻₀) + j(I⁺_{π/2} − I⁻_{π/2})) / 2b` from the two detector arms.
pub fn assemble_cfsi(set: &MeasurementSet, b: f64) -> Result<SpectrumGrid> {
    assemble_with(set, |c, r| {
        let re = r.get(c, 0, Arm::Plus)? - r.get(c, 0, Arm::Minus)?;
        let im = r.get(c, 1, Arm::Plus)? - r.get(c, 1, Arm::Minus)?;
        Ok(Complex64::new(re, im) / (2.0 * b))
    })
}

/// `((I₀ − I_π) + j(I_{π/2} − I_{3π/2})) / 2b`.
pub fn assemble_four_step(set: &MeasurementSet, b: f64) -> Result<SpectrumGrid> {
    assemble_with(set, |c, r| {
        let i = |p| r.get(c, p, Arm::Single);
        Ok(Complex64::new(i(0)? - i(2)?, i(1)? - i(3)?) / (2.0 * b))
    })
}

/// `((2I₀ − I₁ − I₂) + j√3(I₁ − I₂)) / 3b` with phases `0, 2π/3, 4π/3`.
pub fn assemble_three_step(set: &MeasurementSet, b: f64) -> Result<SpectrumGrid> {
    assemble_with(set, |c, r| {
        let i = |p| r.get(c, p, Arm::Single);
        let (i0, i1, i2) = (i(0)?, i(1)?, i(2)?);
        Ok(Complex64::new(2.0 * i0 - i1 - i2, 3f64.sqrt() * (i1 - i2)) / (3.0 * b))
    })
}

/// `((I₀ − D) + j(I_{π/2} − D)) / b` where `D` is the DC reference level
/// `a · mean(O)` (see [`two_step_dc_reference`]).
pub fn assemble_two_step(set: &MeasurementSet, b: f64, dc_reading: Option<f64>) -> Result<SpectrumGrid> {
    let dc = dc_reading
        .ok_or_else(|| Error::Integrity("two-step assembly needs a DC reference reading".into()))?;
    assemble_with(set, |c, r| {
        let i = |p| r.get(c, p, Arm::Single);
        Ok(Complex64::new(i(0)? - dc, i(1)? - dc) / b)
    })
}

/// Estimates `a · mean(O)` from the zero-frequency, zero-phase reading. That
/// pattern is the uniform level `a + b`, so the reading is scaled by
/// `a / (a + b)`. No extra pattern is displayed.
pub fn two_step_dc_reference(set: &MeasurementSet, a: f64, b: f64) -> Result<f64> {
    set.records
        .iter()
        .find(|r| r.coord.is_dc() && r.phase_index == 0 && r.arm == Arm::Single)
        .map(|r| r.value * a / (a + b))
        .ok_or_else(|| {
            Error::Integrity("two-step acquisition did not measure the DC coefficient".into())
        })
}

/// Dispatches on `set.method` using pattern amplitudes `a = DEFAULT_DC` and
/// the given contrast.
pub fn assemble(set: &MeasurementSet, b: f64) -> Result<SpectrumGrid> {
    match set.method {
        Method::Cfsi => assemble_cfsi(set, b),
        Method::FourStep => assemble_four_step(set, b),
        Method::ThreeStep => assemble_three_step(set, b),
        Method::TwoStep => {
            let dc = two_step_dc_reference(set, DEFAULT_DC, b)?;
            assemble_two_step(set, b, Some(dc))
        }
    }
}

/// Completes a half-plane spectrum by conjugate symmetry. Self-conjugate
/// entries keep only their real part.
pub fn symmetrize(half: &SpectrumGrid) -> Result<SpectrumGrid> {
    let (w, h) = (half.width, half.height);
    let mut full = SpectrumGrid::new(w, h);
    for v in 0..h {
        for u in 0..w {
            if !half.is_filled(u, v) {
                continue;
            }
            let c = half.get(u, v);
            let coord = FrequencyCoord::new(u, v, w, h);
            if coord.kind == CoordKind::SelfConjugate {
                full.set(u, v, Complex64::new(c.re, 0.0));
                continue;
            }
            let (cu, cv) = coord.conjugate(w, h);
            if half.is_filled(cu, cv) {
                let other = half.get(cu, cv).conj();
                let scale = c.norm().max(other.norm()).max(1.0);
                if (c - other).norm() > 1e-9 * scale {
                    return Err(Error::Integrity(format!(
                        "conjugate pair ({u},{v}) and ({cu},{cv}) disagree: {c} vs {}",
                        other.conj()
                    )));
                }
            }
            full.set(u, v, c);
            full.set(cu, cv, c.conj());
        }
    }
    Ok(full)
}

/// Inverse transform of a conjugate-symmetric spectrum. The result is the
/// real part, unclipped; a relative imaginary residue above `1e-6` means the
/// spectrum was not symmetric and is reported as an error.
pub fn reconstruct(spectrum: &SpectrumGrid) -> Result<Image> {
    let (w, h) = (spectrum.width, spectrum.height);
    let mut buf = spectrum.coeffs.clone();
    let mut planner = FftPlanner::<f64>::new();

    // rows: index u within row v
    let row_fft = planner.plan_fft_inverse(w);
    for row in buf.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    // columns
    let col_fft = planner.plan_fft_inverse(h);
    let mut column = vec![Complex64::new(0.0, 0.0); h];
    for x in 0..w {
        for (y, c) in column.iter_mut().enumerate() {
            *c = buf[y * w + x];
        }
        col_fft.process(&mut column);
        for (y, c) in column.iter().enumerate() {
            buf[y * w + x] = *c;
        }
    }

    let max_re = buf.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
    let max_im = buf.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    if max_im > 1e-6 * max_re && max_im > 1e-12 {
        return Err(Error::Reconstruction(format!(
            "imaginary residue {max_im:.3e} exceeds 1e-6 of the real peak {max_re:.3e}; spectrum is not conjugate-symmetric"
        )));
    }
    Image::new(w, h, buf.into_iter().map(|c| c.re).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::{acquire, AcquisitionConfig, MeasurementRecord, Mode, NoiseSpec};
    use crate::patterns::{frequency_schedule, DEFAULT_CONTRAST};
    use std::f64::consts::PI;

    /// Direct O(N²) mean-normalized DFT, independent of the assembly path.
    fn dft_oracle(img: &Image) -> Vec<Complex64> {
        let (w, h) = (img.width(), img.height());
        let n = (w * h) as f64;
        let mut out = Vec::with_capacity(w * h);
        for v in 0..h {
            for u in 0..w {
                let mut acc = Complex64::new(0.0, 0.0);
                for y in 0..h {
                    for x in 0..w {
                        let angle = -2.0 * PI * ((u * x) as f64 / w as f64 + (v * y) as f64 / h as f64);
                        acc += img.get(x, y) * Complex64::from_polar(1.0, angle);
                    }
                }
                out.push(acc / n);
            }
        }
        out
    }

    fn random_object(w: usize, h: usize, seed: u64) -> Image {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Image::new(w, h, (0..w * h).map(|_| rng.random_range(0..=255) as f64).collect()).unwrap()
    }

    fn full_half_spectrum(obj: &Image, method: Method, mode: Mode) -> SpectrumGrid {
        let schedule = frequency_schedule(obj.width(), obj.height()).unwrap();
        let config = AcquisitionConfig::new(method, mode, schedule.len() * method.steps());
        assemble(&acquire(obj, &schedule, &config).unwrap(), DEFAULT_CONTRAST).unwrap()
    }

    fn record(u: usize, v: usize, phase: u8, arm: Arm, value: f64, seq: u64) -> MeasurementRecord {
        MeasurementRecord {
            coord: FrequencyCoord::new(u, v, 8, 8),
            phase_index: phase,
            arm,
            value,
            seq,
        }
    }

    fn set_of(method: Method, records: Vec<MeasurementRecord>) -> MeasurementSet {
        MeasurementSet {
            width: 8,
            height: 8,
            method,
            records,
        }
    }

    #[test]
    fn cfsi_dc_from_uniform_readings() {
        let m = 100.0;
        let set = set_of(
            Method::Cfsi,
            vec![
                record(0, 0, 0, Arm::Plus, m, 0),
                record(0, 0, 0, Arm::Minus, 0.0, 1),
                record(0, 0, 1, Arm::Plus, 0.5 * m, 2),
                record(0, 0, 1, Arm::Minus, 0.5 * m, 3),
            ],
        );
        let grid = assemble_cfsi(&set, 0.5).unwrap();
        assert_eq!(grid.get(0, 0), Complex64::new(m, 0.0));
        assert_eq!(grid.filled_count(), 1);
    }

    #[test]
    fn three_step_dc_simplifies_to_mean() {
        // uniform patterns a + b cos θ at θ = 0, 2π/3, 4π/3
        let m = 80.0;
        let (a, b) = (0.5, 0.5);
        let readings: Vec<f64> = [0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0]
            .iter()
            .map(|t: &f64| (a + b * t.cos()) * m)
            .collect();
        let set = set_of(
            Method::ThreeStep,
            readings
                .iter()
                .enumerate()
                .map(|(p, &v)| record(0, 0, p as u8, Arm::Single, v, p as u64))
                .collect(),
        );
        let c = assemble_three_step(&set, b).unwrap().get(0, 0);
        assert!((c - Complex64::new(m, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn missing_readings_are_integrity_errors() {
        let set = set_of(Method::Cfsi, vec![record(1, 0, 0, Arm::Plus, 1.0, 0)]);
        assert!(matches!(assemble_cfsi(&set, 0.5), Err(Error::Integrity(_))));
        let set = set_of(
            Method::FourStep,
            (0..3).map(|p| record(1, 0, p, Arm::Single, 1.0, p as u64)).collect(),
        );
        assert!(matches!(assemble_four_step(&set, 0.5), Err(Error::Integrity(_))));
        let set = set_of(Method::ThreeStep, vec![record(1, 0, 0, Arm::Single, 1.0, 0)]);
        assert!(matches!(assemble_three_step(&set, 0.5), Err(Error::Integrity(_))));
        let set = set_of(
            Method::TwoStep,
            (0..2).map(|p| record(1, 0, p, Arm::Single, 1.0, p as u64)).collect(),
        );
        assert!(matches!(assemble_two_step(&set, 0.5, None), Err(Error::Integrity(_))));
        assert!(matches!(two_step_dc_reference(&set, 0.5, 0.5), Err(Error::Integrity(_))));
    }

    #[test]
    fn duplicate_readings_are_rejected() {
        let set = set_of(
            Method::TwoStep,
            vec![
                record(1, 0, 0, Arm::Single, 1.0, 0),
                record(1, 0, 0, Arm::Single, 2.0, 1),
            ],
        );
        assert!(matches!(assemble_two_step(&set, 0.5, Some(0.0)), Err(Error::Integrity(_))));
    }

    #[test]
    fn zero_object_gives_zero_spectrum() {
        let obj = Image::filled(8, 8, 0.0).unwrap();
        for method in Method::ALL {
            let grid = full_half_spectrum(&obj, method, Mode::Grayscale);
            assert!(grid.coeffs().iter().all(|c| c.norm() == 0.0), "{method}");
        }
    }

    #[test]
    fn every_method_matches_dft_oracle() {
        let obj = random_object(8, 8, 11);
        let oracle = dft_oracle(&obj);
        for method in Method::ALL {
            let grid = full_half_spectrum(&obj, method, Mode::Grayscale);
            assert_eq!(grid.filled_count(), frequency_schedule(8, 8).unwrap().len());
            for v in 0..8 {
                for u in 0..8 {
                    if grid.is_filled(u, v) {
                        let err = (grid.get(u, v) - oracle[v * 8 + u]).norm();
                        assert!(err <= 1e-9, "{method} ({u},{v}) err {err}");
                    }
                }
            }
        }
    }

    #[test]
    fn grayscale_cfsi_equals_four_step() {
        let obj = random_object(8, 8, 5);
        let cfsi = full_half_spectrum(&obj, Method::Cfsi, Mode::Grayscale);
        let four = full_half_spectrum(&obj, Method::FourStep, Mode::Grayscale);
        for (a, b) in cfsi.coeffs().iter().zip(four.coeffs()) {
            assert!((a - b).norm() <= 1e-12);
        }
    }

    #[test]
    fn two_step_matches_four_step_noiseless() {
        let obj = random_object(8, 8, 9);
        let two = full_half_spectrum(&obj, Method::TwoStep, Mode::Grayscale);
        let four = full_half_spectrum(&obj, Method::FourStep, Mode::Grayscale);
        for (a, b) in two.coeffs().iter().zip(four.coeffs()) {
            assert!((a - b).norm() <= 1e-9);
        }
    }

    #[test]
    fn background_shifts_two_step_but_not_cfsi() {
        let obj = random_object(8, 8, 13);
        let schedule = frequency_schedule(8, 8).unwrap();
        let spectra = |method: Method, flux: f64| {
            let config = AcquisitionConfig::new(method, Mode::Grayscale, 20).with_background(flux);
            assemble(&acquire(&obj, &schedule, &config).unwrap(), DEFAULT_CONTRAST).unwrap()
        };
        let (c0, c1) = (spectra(Method::Cfsi, 0.0), spectra(Method::Cfsi, 12.0));
        for (a, b) in c0.coeffs().iter().zip(c1.coeffs()) {
            assert!((a - b).norm() <= 1e-12);
        }
        let (t0, t1) = (spectra(Method::TwoStep, 0.0), spectra(Method::TwoStep, 12.0));
        // D absorbs a/(a+b) of the flux, the rest survives as (1+j) B b/(a+b) / b
        for v in 0..8 {
            for u in 0..8 {
                if t0.is_filled(u, v) {
                    let shift = t1.get(u, v) - t0.get(u, v);
                    assert!((shift - Complex64::new(12.0, 12.0)).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn symmetrize_examples() {
        let mut half = SpectrumGrid::new(8, 8);
        half.set(1, 0, Complex64::new(2.0, 3.0));
        half.set(4, 0, Complex64::new(5.0, 0.01));
        let full = symmetrize(&half).unwrap();
        assert_eq!(full.get(7, 0), Complex64::new(2.0, -3.0));
        assert_eq!(full.get(4, 0), Complex64::new(5.0, 0.0));
        assert_eq!(full.filled_count(), 3);

        let empty = symmetrize(&SpectrumGrid::new(8, 8)).unwrap();
        assert!(empty.coeffs().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn symmetrize_rejects_inconsistent_pairs() {
        let mut half = SpectrumGrid::new(8, 8);
        half.set(1, 0, Complex64::new(2.0, 3.0));
        half.set(7, 0, Complex64::new(2.0, 3.0));
        assert!(matches!(symmetrize(&half), Err(Error::Integrity(_))));
        half.set(7, 0, Complex64::new(2.0, -3.0));
        assert!(symmetrize(&half).is_ok());
    }

    #[test]
    fn reconstruct_examples() {
        let mut dc = SpectrumGrid::new(4, 4);
        dc.set(0, 0, Complex64::new(42.0, 0.0));
        assert!(reconstruct(&dc).unwrap().data().iter().all(|&v| (v - 42.0).abs() < 1e-12));

        let zero = reconstruct(&SpectrumGrid::new(4, 4)).unwrap();
        assert!(zero.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn reconstruct_inverts_oracle_spectrum() {
        let obj = random_object(8, 8, 21);
        let mut grid = SpectrumGrid::new(8, 8);
        for (i, c) in dft_oracle(&obj).into_iter().enumerate() {
            grid.set(i % 8, i / 8, c);
        }
        let back = reconstruct(&grid).unwrap();
        let rms = crate::image::mse(&obj, &back).unwrap().sqrt();
        assert!(rms <= 1e-9, "rms {rms}");
    }

    #[test]
    fn reconstruct_flags_asymmetric_spectrum() {
        let mut grid = SpectrumGrid::new(8, 8);
        grid.set(0, 0, Complex64::new(10.0, 0.0));
        grid.set(1, 0, Complex64::new(3.0, 1.0));
        assert!(matches!(reconstruct(&grid), Err(Error::Reconstruction(_))));
    }

    #[test]
    fn end_to_end_identity_for_all_methods() {
        let obj = crate::image::synthetic_scene(16, 16);
        for method in Method::ALL {
            let half = full_half_spectrum(&obj, method, Mode::Grayscale);
            let image = reconstruct(&symmetrize(&half).unwrap()).unwrap();
            let rms = crate::image::mse(&obj, &image).unwrap().sqrt();
            assert!(rms <= 1e-6, "{method}: rms {rms}");
        }
    }

    #[test]
    fn binary_cfsi_differs_from_binary_four_step() {
        let obj = crate::image::synthetic_scene(16, 16);
        let cfsi = full_half_spectrum(&obj, Method::Cfsi, Mode::Binary);
        let four = full_half_spectrum(&obj, Method::FourStep, Mode::Binary);
        let max = cfsi
            .coeffs()
            .iter()
            .zip(four.coeffs())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(max > 1e-9);
    }

    #[test]
    fn noisy_assembly_is_seed_deterministic() {
        let obj = random_object(8, 8, 1);
        let schedule = frequency_schedule(8, 8).unwrap();
        let config = AcquisitionConfig::new(Method::ThreeStep, Mode::Grayscale, 30)
            .with_noise(NoiseSpec::new(1.0, 77).unwrap());
        let a = assemble(&acquire(&obj, &schedule, &config).unwrap(), 0.5).unwrap();
        let b = assemble(&acquire(&obj, &schedule, &config).unwrap(), 0.5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn spectrum_csv_has_one_row_per_bin() {
        let mut grid = SpectrumGrid::new(2, 2);
        grid.set(1, 0, Complex64::new(1.5, -2.0));
        let mut out = Vec::new();
        grid.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "u,v,re,im,filled\n0,0,0,0,0\n1,0,1.5,-2,1\n0,1,0,0,0\n1,1,0,0,0\n");
    }
}
