//! JSON run configuration.

use std::path::Path;

use anyhow::{ensure, Context, Result};
use serde::{Deserialize, Serialize};
use usbench_core::bench::{DEFAULT_TIMED_ITERS, DEFAULT_WARMUP_ITERS};
use usbench_core::rf_io::{Dtype, Scatterer};
use usbench_core::{Apodization, ImageGrid, Modality, PipelineConfig, ProbeGeometry, Variant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Acquisition {
    pub fs: f64,
    pub fc: f64,
    pub c: f64,
    pub prf: f64,
    /// Samples per trace.
    pub n_l: usize,
    /// Frames per acquisition.
    pub n_f: usize,
}

impl Default for Acquisition {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            fs: p.fs,
            fc: p.fc,
            c: p.c,
            prf: p.prf,
            n_l: 1024,
            n_f: p.n_f,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Probe {
    pub n_elements: usize,
    /// Element pitch, m.
    pub pitch: f64,
}

impl Default for Probe {
    fn default() -> Self {
        Self {
            n_elements: 32,
            pitch: 0.3e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub nx: usize,
    pub nz: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            x_min: -4e-3,
            x_max: 4e-3,
            z_min: 15e-3,
            z_max: 25e-3,
            nx: 32,
            nz: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Processing {
    pub dynamic_range_db: f64,
    pub smoothing_kernel: usize,
    pub fir_taps: usize,
    pub apodization: Apodization,
    pub variant: Variant,
    pub modality: Modality,
}

impl Default for Processing {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            dynamic_range_db: p.dynamic_range_db,
            smoothing_kernel: p.smoothing_kernel,
            fir_taps: p.fir_taps,
            apodization: p.apodization,
            variant: p.variant,
            modality: p.modality,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSettings {
    pub warmup_iters: usize,
    pub timed_iters: usize,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self {
            warmup_iters: DEFAULT_WARMUP_ITERS,
            timed_iters: DEFAULT_TIMED_ITERS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleType {
    #[default]
    Float32,
    Int16,
}

impl From<SampleType> for Dtype {
    fn from(t: SampleType) -> Self {
        match t {
            SampleType::Float32 => Dtype::Float32,
            SampleType::Int16 => Dtype::Int16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Storage {
    pub dtype: SampleType,
    /// Multiplier applied before rounding to int16.
    pub int16_scale: f32,
}

impl Default for Storage {
    fn default() -> Self {
        Self {
            dtype: SampleType::Float32,
            int16_scale: 8192.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub acquisition: Acquisition,
    pub probe: Probe,
    pub grid: Grid,
    pub processing: Processing,
    pub scatterers: Vec<Scatterer>,
    pub bench: BenchSettings,
    pub storage: Storage,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            acquisition: Acquisition::default(),
            probe: Probe::default(),
            grid: Grid::default(),
            processing: Processing::default(),
            scatterers: vec![Scatterer::new(0.0, 20e-3, 1.0)],
            bench: BenchSettings::default(),
            storage: Storage::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn pipeline(&self) -> PipelineConfig {
        let (a, p) = (&self.acquisition, &self.processing);
        PipelineConfig {
            fs: a.fs,
            fc: a.fc,
            c: a.c,
            prf: a.prf,
            n_f: a.n_f,
            dynamic_range_db: p.dynamic_range_db,
            smoothing_kernel: p.smoothing_kernel,
            fir_taps: p.fir_taps,
            variant: p.variant,
            modality: p.modality,
            apodization: p.apodization,
        }
    }

    pub fn geometry(&self, sound_speed: f64) -> Result<ProbeGeometry> {
        Ok(ProbeGeometry::new(
            self.probe.n_elements,
            self.probe.pitch,
            sound_speed,
        )?)
    }

    pub fn image_grid(&self) -> Result<ImageGrid> {
        let g = &self.grid;
        Ok(ImageGrid::new(
            g.x_min, g.x_max, g.z_min, g.z_max, g.nx, g.nz,
        )?)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.acquisition.n_l > 0, "acquisition.n_l must be positive");
        ensure!(self.acquisition.n_f > 0, "acquisition.n_f must be positive");
        ensure!(
            self.storage.int16_scale.is_finite() && self.storage.int16_scale > 0.0,
            "storage.int16_scale must be positive"
        );
        self.geometry(self.acquisition.c)?;
        self.image_grid()?;
        Ok(())
    }
}
