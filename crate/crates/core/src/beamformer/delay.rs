use std::sync::Arc;

use crate::config::{Apodization, PipelineConfig};
use crate::error::{Error, Result};
use crate::geometry::{ImageGrid, ProbeGeometry};

/// Per-(pixel, channel) fractional receive delays and apodization weights.
///
/// Entries are channel-major: `(pixel p, channel c)` is at `c * n_pixels + p`.
/// Any entry whose delay leaves no room for 2-tap interpolation
/// (`delay < 0` or `delay > n_s - 2`) carries zero apodization.
///
/// When built for demodulated data the table also carries the phasor
/// `exp(+j * 2*pi * fc/fs * delay)` per entry, which restores the carrier
/// phase removed by mixing so that channels add coherently.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayTable {
    n_pixels: usize,
    n_channels: usize,
    n_s: usize,
    delay_samples: Vec<f64>,
    apod: Vec<f64>,
    rotation: Option<Arc<Vec<[f64; 2]>>>,
}

fn in_range(delay: f64, n_s: usize) -> bool {
    delay >= 0.0 && delay <= n_s as f64 - 2.0
}

impl DelayTable {
    /// Builds a table from raw delays and weights without carrier phase.
    pub fn from_parts(
        n_pixels: usize,
        n_channels: usize,
        n_s: usize,
        delay_samples: Vec<f64>,
        mut apod: Vec<f64>,
    ) -> Result<Self> {
        let len = n_pixels * n_channels;
        if n_pixels == 0 || n_channels == 0 {
            return Err(Error::invalid("delay table needs pixels and channels"));
        }
        if n_s < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 axial samples, got {n_s}"
            )));
        }
        if delay_samples.len() != len {
            return Err(Error::mismatch(
                "delay table length",
                len,
                delay_samples.len(),
            ));
        }
        if apod.len() != len {
            return Err(Error::mismatch("apodization length", len, apod.len()));
        }
        for (w, &d) in apod.iter_mut().zip(&delay_samples) {
            if !(w.is_finite() && *w >= 0.0 && *w <= 1.0) {
                return Err(Error::invalid(format!("apodization {w} outside [0, 1]")));
            }
            if !in_range(d, n_s) {
                *w = 0.0;
            }
        }
        Ok(Self {
            n_pixels,
            n_channels,
            n_s,
            delay_samples,
            apod,
            rotation: None,
        })
    }

    /// Attaches carrier re-rotation for baseband data mixed at
    /// `carrier_cycles_per_sample` (= fc / fs).
    pub fn with_carrier(mut self, carrier_cycles_per_sample: f64) -> Self {
        let two_pi = 2.0 * std::f64::consts::PI;
        let rot = self
            .delay_samples
            .iter()
            .map(|&d| {
                let phase = two_pi * (d * carrier_cycles_per_sample).rem_euclid(1.0);
                [phase.cos(), phase.sin()]
            })
            .collect();
        self.rotation = Some(Arc::new(rot));
        self
    }

    pub fn n_pixels(&self) -> usize {
        self.n_pixels
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn delay_samples(&self) -> &[f64] {
        &self.delay_samples
    }

    pub fn apod(&self) -> &[f64] {
        &self.apod
    }

    pub fn rotation(&self) -> Option<&Arc<Vec<[f64; 2]>>> {
        self.rotation.as_ref()
    }

    pub fn index(&self, pixel: usize, channel: usize) -> usize {
        channel * self.n_pixels + pixel
    }

    /// Interpolation taps for one entry: `(k, w0, w1)` with weights on
    /// samples `k` and `k + 1`, or `None` when the entry is inactive.
    pub fn taps(&self, idx: usize) -> Option<(usize, f64, f64)> {
        let a = self.apod[idx];
        if a == 0.0 {
            return None;
        }
        let d = self.delay_samples[idx];
        let k = d.floor();
        let frac = d - k;
        Some((k as usize, a * (1.0 - frac), a * frac))
    }

    pub fn resident_bytes(&self) -> usize {
        let rot = self.rotation.as_ref().map_or(0, |r| r.len() * 16);
        (self.delay_samples.len() + self.apod.len()) * 8 + rot
    }
}

fn hann_weight(offset: f64, half_width: f64) -> f64 {
    if offset.abs() >= half_width {
        0.0
    } else {
        0.5 * (1.0 + (std::f64::consts::PI * offset / half_width).cos())
    }
}

/// Two-way delays for a zero-angle plane-wave transmit and per-element receive.
///
/// For pixel `(x, z)` and element `x_e`: `tau = (z + sqrt((x - x_e)^2 + z^2)) / c`,
/// `delay_samples = tau * fs`. Hann apodization is centered on the pixel's
/// lateral position with a half-width of half the array aperture.
pub fn compute_delay_table(
    geom: &ProbeGeometry,
    grid: &ImageGrid,
    cfg: &PipelineConfig,
    n_s: usize,
) -> Result<DelayTable> {
    grid.validate()?;
    if !(cfg.fs > 0.0 && cfg.c > 0.0) {
        return Err(Error::invalid("fs and c must be positive"));
    }
    let n_pixels = grid.n_pixels();
    let n_c = geom.n_elements();
    let half_aperture = 0.5 * geom.aperture();
    let mut delays = Vec::with_capacity(n_pixels * n_c);
    let mut apod = Vec::with_capacity(n_pixels * n_c);
    for &xe in geom.element_x() {
        for p in 0..n_pixels {
            let (x, z) = grid.pixel(p);
            let dx = x - xe;
            let tau = (z + (dx * dx + z * z).sqrt()) / cfg.c;
            delays.push(tau * cfg.fs);
            apod.push(match cfg.apodization {
                Apodization::Rectangular => 1.0,
                Apodization::Hann => hann_weight(dx, half_aperture),
            });
        }
    }
    Ok(DelayTable::from_parts(n_pixels, n_c, n_s, delays, apod)?.with_carrier(cfg.fc / cfg.fs))
}
