//! Simulation of Fourier single-pixel imaging with complementary
//! (dual-detector) acquisition and two-, three- and four-step phase-shift
//! baselines.
//!
//! The pipeline is `frequency_schedule → acquire → assemble → symmetrize →
//! reconstruct`, with [`image::psnr`] for scoring. [`bench`] wraps it into
//! single runs and parameter sweeps.

pub mod acquisition;
pub mod bench;
pub mod error;
pub mod image;
pub mod patterns;
pub mod reconstruction;

pub use acquisition::{
    acquire, add_noise, measure, measure_complementary, AcquisitionConfig, Arm, MeasurementRecord,
    MeasurementSet, Method, Mode, NoiseSpec,
};
pub use error::{Error, Result};
pub use image::{load_image, mse, psnr, save_image, Image, QualityReport};
pub use patterns::{
    complement_binary, complement_gray, floyd_steinberg, fourier_pattern, frequency_schedule,
    temporal_bitplanes, BinaryPattern, FrequencyCoord, GrayPattern, PatternParams,
};
pub use reconstruction::{assemble, reconstruct, symmetrize, SpectrumGrid};
