//! Acquisition physics and processing parameters.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// DAS operator formulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Dynamic indexing: per-pixel gather with linear interpolation.
    Gather,
    /// Dense selection matrices applied as a 1x1 convolution plus channel reduction.
    FullCnn,
    /// Compressed-row selection matrices.
    Sparse,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Gather, Variant::FullCnn, Variant::Sparse];

    /// Registry key.
    pub fn name(self) -> &'static str {
        match self {
            Variant::Gather => "gather",
            Variant::FullCnn => "full-cnn",
            Variant::Sparse => "sparse",
        }
    }

    /// Label used in benchmark reports.
    pub fn label(self) -> &'static str {
        match self {
            Variant::Gather => "Dynamic indexing",
            Variant::FullCnn => "Full CNN",
            Variant::Sparse => "Sparse matrices",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gather" | "dynamic-indexing" => Ok(Variant::Gather),
            "full-cnn" | "cnn" | "dense" => Ok(Variant::FullCnn),
            "sparse" | "sparse-matrices" => Ok(Variant::Sparse),
            _ => Err(Error::UnknownStrategy {
                kind: "variant",
                name: s.to_string(),
                available: "gather, full-cnn, sparse".into(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Modality {
    ColorDoppler,
    PowerDoppler,
    Bmode,
}

impl Modality {
    pub const ALL: [Modality; 3] = [
        Modality::ColorDoppler,
        Modality::PowerDoppler,
        Modality::Bmode,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Modality::ColorDoppler => "color-doppler",
            Modality::PowerDoppler => "power-doppler",
            Modality::Bmode => "bmode",
        }
    }

    /// Pipeline identifier used in benchmark reports.
    pub fn pipeline_id(self) -> &'static str {
        match self {
            Modality::ColorDoppler => "RF2IQ_DAS_DOPPLER",
            Modality::PowerDoppler => "RF2IQ_DAS_POWERDOPPLER",
            Modality::Bmode => "RF2IQ_DAS_BMODE",
        }
    }

    pub fn min_frames(self) -> usize {
        match self {
            Modality::ColorDoppler => 2,
            Modality::PowerDoppler | Modality::Bmode => 1,
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bmode" | "b-mode" => Ok(Modality::Bmode),
            "color-doppler" | "doppler" | "colour-doppler" => Ok(Modality::ColorDoppler),
            "power-doppler" | "powerdoppler" => Ok(Modality::PowerDoppler),
            _ => Err(Error::UnknownStrategy {
                kind: "modality",
                name: s.to_string(),
                available: "bmode, color-doppler, power-doppler".into(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Apodization {
    #[default]
    Rectangular,
    Hann,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// RF sampling rate, Hz.
    pub fs: f64,
    /// Carrier frequency, Hz.
    pub fc: f64,
    /// Speed of sound, m/s.
    pub c: f64,
    /// Pulse repetition frequency, Hz.
    pub prf: f64,
    /// Frames per forward pass (Doppler ensemble length).
    pub n_f: usize,
    pub dynamic_range_db: f64,
    /// Side of the square box kernel used to smooth the lag-1 autocorrelation.
    pub smoothing_kernel: usize,
    pub fir_taps: usize,
    pub variant: Variant,
    pub modality: Modality,
    pub apodization: Apodization,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            fs: 20e6,
            fc: 5e6,
            c: 1540.0,
            prf: 5000.0,
            n_f: 32,
            dynamic_range_db: 60.0,
            smoothing_kernel: 5,
            fir_taps: 63,
            variant: Variant::Gather,
            modality: Modality::Bmode,
            apodization: Apodization::Rectangular,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.fs) || !positive(self.fc) || !positive(self.c) || !positive(self.prf) {
            return Err(Error::invalid(
                "fs, fc, c and prf must be positive and finite",
            ));
        }
        if self.fs <= 2.0 * self.fc {
            return Err(Error::invalid(format!(
                "sampling rate {} Hz does not exceed twice the carrier {} Hz",
                self.fs, self.fc
            )));
        }
        if self.n_f < self.modality.min_frames() {
            return Err(Error::invalid(format!(
                "{} needs at least {} frames, got {}",
                self.modality,
                self.modality.min_frames(),
                self.n_f
            )));
        }
        if !positive(self.dynamic_range_db) {
            return Err(Error::invalid("dynamic range must be positive"));
        }
        if self.smoothing_kernel.is_multiple_of(2) || self.fir_taps.is_multiple_of(2) {
            return Err(Error::invalid(
                "smoothing kernel and FIR tap count must be odd",
            ));
        }
        Ok(())
    }

    /// Default low-pass cutoff in cycles/sample: half the carrier.
    pub fn fir_cutoff(&self) -> f64 {
        0.5 * self.fc / self.fs
    }

    /// Largest unambiguous axial velocity, `c * prf / (4 * fc)`.
    pub fn nyquist_velocity(&self) -> f64 {
        self.c * self.prf / (4.0 * self.fc)
    }
}
