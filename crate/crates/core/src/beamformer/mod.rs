//! Delay-and-sum image formation.
//!
//! Three interchangeable formulations share one [`DelayTable`]:
//!
//! | name       | operator form                                      |
//! |------------|----------------------------------------------------|
//! | `gather`   | per-pixel indexed reads with 2-tap interpolation   |
//! | `full-cnn` | dense selection matrices (1x1 conv) + channel sum  |
//! | `sparse`   | compressed-row selection matrices + channel sum    |
//!
//! All three use identical interpolation weights, identical carrier
//! re-rotation and ascending channel summation, so their outputs agree
//! bit for bit. Each is a [`Beamformer`] registered by name in a
//! [`BeamformerRegistry`].

mod delay;
mod dense;
mod gather;
mod sparse;

use std::sync::Arc;

pub use delay::{compute_delay_table, DelayTable};
pub use dense::{das_dense_cnn, DenseCnnBeamformer, DenseSelectionMatrix};
pub use gather::{das_gather, GatherBeamformer};
pub use sparse::{
    build_selection_matrix, das_sparse, CsrMatrix, SelectionMatrix, SparseBeamformer,
};

use crate::config::Variant;
use crate::error::{Error, Result};
use crate::tensor::IqTensor;

/// A fully initialized DAS back-end.
///
/// Implementations hold every table they need; `beamform` performs no table
/// construction.
pub trait Beamformer: Send + Sync {
    fn variant(&self) -> Variant;

    fn n_pixels(&self) -> usize;

    fn n_channels(&self) -> usize;

    fn n_s(&self) -> usize;

    /// Beamforms `(n_s, n_c, n_f)` IQ into `(n_pixels, 1, n_f)`.
    fn beamform(&self, iq: &IqTensor) -> Result<IqTensor>;

    /// Bytes of constant tables held for the lifetime of the back-end.
    fn resident_bytes(&self) -> usize;

    /// Transient bytes allocated by one `beamform` call besides its output.
    fn scratch_bytes(&self, n_f: usize) -> usize;
}

pub type BeamformerFactory = fn(&Arc<DelayTable>) -> Box<dyn Beamformer>;

/// Name-keyed set of beamformer constructors.
pub struct BeamformerRegistry {
    entries: Vec<(String, BeamformerFactory)>,
}

impl BeamformerRegistry {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    /// Registry with the three built-in formulations.
    pub fn with_builtin() -> Self {
        let mut registry = Self::new();
        registry.register(Variant::Gather.name(), |t| {
            Box::new(GatherBeamformer::new(t.clone()))
        });
        registry.register(Variant::FullCnn.name(), |t| {
            Box::new(DenseCnnBeamformer::new(t))
        });
        registry.register(Variant::Sparse.name(), |t| {
            Box::new(SparseBeamformer::new(t))
        });
        registry
    }

    /// Adds or replaces the factory registered under `name`.
    pub fn register(&mut self, name: &str, factory: BeamformerFactory) {
        match self.entries.iter_mut().find(|(n, _)| n == name) {
            Some(entry) => entry.1 = factory,
            None => self.entries.push((name.to_string(), factory)),
        }
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// Builds the back-end registered under `name`; variant aliases
    /// (e.g. `dynamic-indexing`) resolve to their canonical name.
    pub fn build(&self, name: &str, table: &Arc<DelayTable>) -> Result<Box<dyn Beamformer>> {
        let lookup = |key: &str| self.entries.iter().find(|(n, _)| n == key).map(|(_, f)| *f);
        let factory = lookup(name)
            .or_else(|| name.parse::<Variant>().ok().and_then(|v| lookup(v.name())))
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "beamformer",
                name: name.to_string(),
                available: self.names().join(", "),
            })?;
        Ok(factory(table))
    }
}

impl Default for BeamformerRegistry {
    fn default() -> Self {
        Self::with_builtin()
    }
}

pub(crate) fn check_input(iq: &IqTensor, n_s: usize, n_c: usize) -> Result<()> {
    if iq.n_s() != n_s {
        return Err(Error::mismatch("IQ axial length", n_s, iq.n_s()));
    }
    if iq.n_c() != n_c {
        return Err(Error::mismatch("IQ channel count", n_c, iq.n_c()));
    }
    Ok(())
}

#[inline]
pub(crate) fn rotate(re: f64, im: f64, rot: Option<&[f64; 2]>) -> (f64, f64) {
    match rot {
        Some(&[cos, sin]) => (re * cos - im * sin, re * sin + im * cos),
        None => (re, im),
    }
}

/// Adds one channel's `(n_pixels, n_f)` product into the accumulator after
/// carrier re-rotation.
pub(crate) fn accumulate_channel(
    acc_re: &mut [f64],
    acc_im: &mut [f64],
    y_re: &[f64],
    y_im: &[f64],
    rotation: Option<&[[f64; 2]]>,
    n_pixels: usize,
) {
    use rayon::prelude::*;
    acc_re
        .par_iter_mut()
        .zip(acc_im.par_iter_mut())
        .zip(y_re.par_iter().zip(y_im.par_iter()))
        .enumerate()
        .for_each(|(o, ((ar, ai), (yr, yi)))| {
            let (r, i) = rotate(*yr, *yi, rotation.map(|r| &r[o % n_pixels]));
            *ar += r;
            *ai += i;
        });
}
