//! End-to-end RF-to-image pipeline: demodulation, DAS, modality stage.

use std::sync::Arc;

use crate::beamformer::{compute_delay_table, Beamformer, BeamformerRegistry};
use crate::bench::{MemoryTracker, Reservation};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::frontend::{design_lowpass_fir, Demodulator};
use crate::geometry::{ImageGrid, ProbeGeometry};
use crate::modalities::{ImageShape, ModalityOutput, ModalityRegistry, ModalityStage};
use crate::tensor::{IqTensor, RfTensor};

/// Builds a [`Pipeline`], selecting strategies by registry name.
pub struct PipelineBuilder<'a> {
    cfg: PipelineConfig,
    geom: &'a ProbeGeometry,
    grid: &'a ImageGrid,
    n_l: usize,
    variant: Option<String>,
    modality: Option<String>,
    beamformers: Option<&'a BeamformerRegistry>,
    modalities: Option<&'a ModalityRegistry>,
    tracker: Option<Arc<MemoryTracker>>,
}

impl<'a> PipelineBuilder<'a> {
    /// Overrides `cfg.variant` with a registry name.
    pub fn variant_name(mut self, name: impl Into<String>) -> Self {
        self.variant = Some(name.into());
        self
    }

    /// Overrides `cfg.modality` with a registry name.
    pub fn modality_name(mut self, name: impl Into<String>) -> Self {
        self.modality = Some(name.into());
        self
    }

    pub fn beamformers(mut self, registry: &'a BeamformerRegistry) -> Self {
        self.beamformers = Some(registry);
        self
    }

    pub fn modalities(mut self, registry: &'a ModalityRegistry) -> Self {
        self.modalities = Some(registry);
        self
    }

    pub fn memory(mut self, tracker: Arc<MemoryTracker>) -> Self {
        self.tracker = Some(tracker);
        self
    }

    pub fn build(self) -> Result<Pipeline> {
        let cfg = self.cfg;
        cfg.validate()?;
        self.grid.validate()?;
        if self.n_l == 0 {
            return Err(Error::invalid("n_l must be positive"));
        }
        if self.geom.sound_speed() != cfg.c {
            return Err(Error::invalid(format!(
                "probe sound speed {} differs from pipeline sound speed {}",
                self.geom.sound_speed(),
                cfg.c
            )));
        }
        let builtin_bf;
        let beamformers = match self.beamformers {
            Some(r) => r,
            None => {
                builtin_bf = BeamformerRegistry::with_builtin();
                &builtin_bf
            }
        };
        let builtin_mod;
        let modalities = match self.modalities {
            Some(r) => r,
            None => {
                builtin_mod = ModalityRegistry::with_builtin();
                &builtin_mod
            }
        };

        let fir = design_lowpass_fir(cfg.fir_cutoff(), cfg.fir_taps)?;
        let demod = Demodulator::new(&cfg, fir, self.n_l)?;
        let table = Arc::new(compute_delay_table(self.geom, self.grid, &cfg, self.n_l)?);
        let variant = self
            .variant
            .unwrap_or_else(|| cfg.variant.name().to_string());
        let beamformer = beamformers.build(&variant, &table)?;
        drop(table);
        let shape = ImageShape::from(self.grid);
        let modality = self
            .modality
            .unwrap_or_else(|| cfg.modality.name().to_string());
        let stage = modalities.build(&modality, &cfg, shape)?;
        if cfg.n_f < stage.modality().min_frames() {
            return Err(Error::invalid(format!(
                "{} needs at least {} frames, got {}",
                stage.modality(),
                stage.modality().min_frames(),
                cfg.n_f
            )));
        }

        let resident = self
            .tracker
            .as_ref()
            .map(|t| t.reserve(demod.resident_bytes() + beamformer.resident_bytes()));
        Ok(Pipeline {
            cfg,
            grid: *self.grid,
            n_l: self.n_l,
            n_c: self.geom.n_elements(),
            demod,
            beamformer,
            stage,
            tracker: self.tracker,
            _resident: resident,
        })
    }
}

/// A fully initialized pipeline. All tables are built at construction;
/// [`Pipeline::forward`] only runs the per-frame arithmetic.
pub struct Pipeline {
    cfg: PipelineConfig,
    grid: ImageGrid,
    n_l: usize,
    n_c: usize,
    demod: Demodulator,
    beamformer: Box<dyn Beamformer>,
    stage: Box<dyn ModalityStage>,
    tracker: Option<Arc<MemoryTracker>>,
    _resident: Option<Reservation>,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline")
            .field("variant", &self.beamformer.variant())
            .field("modality", &self.stage.modality())
            .field("n_l", &self.n_l)
            .field("n_c", &self.n_c)
            .field("n_f", &self.cfg.n_f)
            .field("pixels", &self.grid.n_pixels())
            .finish()
    }
}

impl Pipeline {
    pub fn builder<'a>(
        cfg: &PipelineConfig,
        geom: &'a ProbeGeometry,
        grid: &'a ImageGrid,
        n_l: usize,
    ) -> PipelineBuilder<'a> {
        PipelineBuilder {
            cfg: cfg.clone(),
            geom,
            grid,
            n_l,
            variant: None,
            modality: None,
            beamformers: None,
            modalities: None,
            tracker: None,
        }
    }

    /// Pipeline with the built-in strategies named in `cfg`.
    pub fn new(
        cfg: &PipelineConfig,
        geom: &ProbeGeometry,
        grid: &ImageGrid,
        n_l: usize,
    ) -> Result<Self> {
        Self::builder(cfg, geom, grid, n_l).build()
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &ImageGrid {
        &self.grid
    }

    pub fn beamformer(&self) -> &dyn Beamformer {
        self.beamformer.as_ref()
    }

    pub fn stage(&self) -> &dyn ModalityStage {
        self.stage.as_ref()
    }

    /// Input shape `(n_l, n_c, n_f)` accepted by [`Pipeline::forward`].
    pub fn input_dims(&self) -> (usize, usize, usize) {
        (self.n_l, self.n_c, self.cfg.n_f)
    }

    fn reserve(&self, bytes: usize) -> Option<Reservation> {
        self.tracker.as_ref().map(|t| t.reserve(bytes))
    }

    fn check_input(&self, rf: &RfTensor) -> Result<()> {
        let (n_l, n_c, n_f) = self.input_dims();
        for (what, expected, found) in [
            ("n_l", n_l, rf.n_l()),
            ("n_c", n_c, rf.n_c()),
            ("n_f", n_f, rf.n_f()),
        ] {
            if expected != found {
                return Err(Error::mismatch(what, expected, found));
            }
        }
        Ok(())
    }

    /// RF to baseband IQ.
    pub fn demodulate(&self, rf: &RfTensor) -> Result<IqTensor> {
        self.check_input(rf)?;
        let _out = self.reserve(2 * 4 * rf.data().len());
        self.demod.apply(rf)
    }

    /// Channel IQ to beamformed pixel IQ.
    pub fn beamform(&self, iq: &IqTensor) -> Result<IqTensor> {
        let n_f = iq.n_f();
        let _scratch = self.reserve(self.beamformer.scratch_bytes(n_f));
        let _out = self.reserve(2 * 4 * self.grid.n_pixels() * n_f);
        self.beamformer.beamform(iq)
    }

    pub fn forward(&self, rf: &RfTensor) -> Result<ModalityOutput> {
        self.check_input(rf)?;
        let iq_bytes = 2 * 4 * rf.data().len();
        let iq_hold = self.reserve(iq_bytes);
        let iq = self.demod.apply(rf)?;
        let bf_hold = {
            let _scratch = self.reserve(self.beamformer.scratch_bytes(iq.n_f()));
            let hold = self.reserve(2 * 4 * self.grid.n_pixels() * iq.n_f());
            let bf = self.beamformer.beamform(&iq)?;
            (bf, hold)
        };
        drop(iq);
        drop(iq_hold);
        let (bf, _bf_hold) = bf_hold;
        let _scratch = self.reserve(self.stage.scratch_bytes(bf.n_f()));
        let out = self.stage.apply(&bf)?;
        let _out = self.reserve(out.byte_len());
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Modality, Variant};
    use crate::rf_io::{synth_rf, Scatterer};

    fn setup(modality: Modality, variant: Variant) -> (PipelineConfig, ProbeGeometry, ImageGrid) {
        let cfg = PipelineConfig {
            n_f: 4,
            modality,
            variant,
            ..Default::default()
        };
        let geom = ProbeGeometry::new(16, 0.3e-3, cfg.c).unwrap();
        let grid = ImageGrid::new(-2e-3, 2e-3, 8e-3, 12e-3, 9, 9).unwrap();
        (cfg, geom, grid)
    }

    #[test]
    fn forward_produces_expected_shapes() {
        for modality in Modality::ALL {
            let (cfg, geom, grid) = setup(modality, Variant::Gather);
            let p = Pipeline::new(&cfg, &geom, &grid, 512).unwrap();
            let rf = synth_rf(&[Scatterer::new(0.0, 10e-3, 1.0)], &geom, &cfg, 512).unwrap();
            let out = p.forward(&rf).unwrap();
            let images = out.images();
            let expected = if modality == Modality::Bmode { 4 } else { 1 };
            assert_eq!(images.len(), expected);
            assert!(images.iter().all(|i| i.pixels.len() == 81));
        }
    }

    #[test]
    fn rejects_wrong_input_dims() {
        let (cfg, geom, grid) = setup(Modality::Bmode, Variant::Sparse);
        let p = Pipeline::new(&cfg, &geom, &grid, 512).unwrap();
        let rf = RfTensor::zeros(256, 16, 4).unwrap();
        assert!(matches!(
            p.forward(&rf),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn unknown_strategy_names() {
        let (cfg, geom, grid) = setup(Modality::Bmode, Variant::Gather);
        let err = Pipeline::builder(&cfg, &geom, &grid, 512)
            .variant_name("fft")
            .build()
            .unwrap_err();
        assert!(matches!(err, Error::UnknownStrategy { .. }));
        let err = Pipeline::builder(&cfg, &geom, &grid, 512)
            .modality_name("elasto")
            .build()
            .unwrap_err();
        assert!(matches!(err, Error::UnknownStrategy { .. }));
    }

    #[test]
    fn memory_is_released_after_forward() {
        let (cfg, geom, grid) = setup(Modality::ColorDoppler, Variant::FullCnn);
        let tracker = Arc::new(MemoryTracker::new());
        let p = Pipeline::builder(&cfg, &geom, &grid, 512)
            .memory(Arc::clone(&tracker))
            .build()
            .unwrap();
        let resident = tracker.current();
        assert!(resident > 0);
        let rf = RfTensor::zeros(512, 16, 4).unwrap();
        p.forward(&rf).unwrap();
        assert_eq!(tracker.current(), resident);
        assert!(tracker.peak() > resident);
        drop(p);
        assert_eq!(tracker.current(), 0);
    }
}
