//! Point-scatterer RF simulator: zero-angle plane-wave transmit, per-element
//! receive, Gaussian-modulated cosine pulse, linear superposition.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::geometry::ProbeGeometry;
use crate::tensor::RfTensor;

/// Fractional bandwidth of the transmit pulse, at the -6 dB level.
pub const PULSE_BANDWIDTH: f64 = 0.6;
/// The pulse is cut off beyond this many envelope standard deviations.
pub const PULSE_TRUNCATION_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub x: f64,
    pub z: f64,
    #[serde(default = "unit")]
    pub amplitude: f64,
    /// Axial velocity in m/s, positive away from the probe.
    #[serde(default)]
    pub v_axial: f64,
}

fn unit() -> f64 {
    1.0
}

impl Scatterer {
    pub fn new(x: f64, z: f64, amplitude: f64) -> Self {
        Self {
            x,
            z,
            amplitude,
            v_axial: 0.0,
        }
    }

    pub fn moving(mut self, v_axial: f64) -> Self {
        self.v_axial = v_axial;
        self
    }
}

/// Envelope standard deviation (s) of a Gaussian pulse with the given
/// fractional bandwidth measured at -6 dB.
pub fn pulse_sigma(fc: f64, bandwidth: f64) -> f64 {
    let reference = 10f64.powf(-6.0 / 20.0).ln();
    let a = -(PI * fc * bandwidth).powi(2) / (4.0 * reference);
    (1.0 / (2.0 * a)).sqrt()
}

/// Pulse value at time `t` relative to its center.
pub fn pulse(t: f64, fc: f64, sigma: f64) -> f64 {
    if t.abs() > PULSE_TRUNCATION_SIGMAS * sigma {
        return 0.0;
    }
    (-t * t / (2.0 * sigma * sigma)).exp() * (2.0 * PI * fc * t).cos()
}

/// Synthesizes `(n_l, n_elements, cfg.n_f)` RF frames.
///
/// In frame `f` a scatterer sits at depth `z + v_axial * f / prf`; its echo on
/// element `x_e` is centered at `(z_f + sqrt((x - x_e)^2 + z_f^2)) / c`.
/// Echo samples past `n_l` are dropped.
pub fn synth_rf(
    scatterers: &[Scatterer],
    geom: &ProbeGeometry,
    cfg: &PipelineConfig,
    n_l: usize,
) -> Result<RfTensor> {
    if n_l == 0 || cfg.n_f == 0 {
        return Err(Error::invalid("n_l and n_f must be positive"));
    }
    if !(cfg.fs > 0.0 && cfg.fc > 0.0 && cfg.c > 0.0 && cfg.prf > 0.0) {
        return Err(Error::invalid("fs, fc, c and prf must be positive"));
    }
    if let Some(s) = scatterers.iter().find(|s| {
        !(s.x.is_finite()
            && s.z.is_finite()
            && s.z >= 0.0
            && s.amplitude.is_finite()
            && s.v_axial.is_finite())
    }) {
        return Err(Error::invalid(format!("invalid scatterer {s:?}")));
    }
    let n_c = geom.n_elements();
    let sigma = pulse_sigma(cfg.fc, PULSE_BANDWIDTH);
    let half_span = PULSE_TRUNCATION_SIGMAS * sigma * cfg.fs;
    let mut data = vec![0.0f32; n_l * n_c * cfg.n_f];
    data.par_chunks_mut(n_l)
        .enumerate()
        .for_each(|(trace, out)| {
            let (e, f) = (trace % n_c, trace / n_c);
            let xe = geom.element_x()[e];
            let mut acc = vec![0.0f64; n_l];
            for s in scatterers {
                let z = s.z + s.v_axial * f as f64 / cfg.prf;
                let dx = s.x - xe;
                let tau = (z + (dx * dx + z * z).sqrt()) / cfg.c;
                let center = tau * cfg.fs;
                let lo = (center - half_span).ceil().max(0.0) as usize;
                let hi = (center + half_span).floor();
                if hi < 0.0 {
                    continue;
                }
                let hi = (hi as usize).min(n_l - 1);
                for (n, a) in acc.iter_mut().enumerate().take(hi + 1).skip(lo) {
                    *a += s.amplitude * pulse(n as f64 / cfg.fs - tau, cfg.fc, sigma);
                }
            }
            for (o, a) in out.iter_mut().zip(&acc) {
                *o = *a as f32;
            }
        });
    RfTensor::new(data, n_l, n_c, cfg.n_f)
}
