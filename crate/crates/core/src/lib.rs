//! Deterministic ultrasound RF-to-image pipelines and a steady-state
//! benchmark harness.
//!
//! A [`Pipeline`] demodulates RF to baseband IQ, forms an image with one of
//! three delay-and-sum formulations, and applies a modality estimator
//! (B-mode, color Doppler or power Doppler). [`bench::run_benchmark`] times
//! repeated forward passes and reports latency, frame rate, throughput,
//! energy per run and peak memory.

pub mod beamformer;
pub mod bench;
pub mod config;
mod error;
pub mod frontend;
pub mod geometry;
pub mod kernels;
pub mod modalities;
mod pipeline;
pub mod rf_io;
pub mod tensor;

pub use config::{Apodization, Modality, PipelineConfig, Variant};
pub use error::{Error, Result};
pub use geometry::{ImageGrid, ProbeGeometry};
pub use pipeline::{Pipeline, PipelineBuilder};
pub use tensor::{IqTensor, RfTensor};
