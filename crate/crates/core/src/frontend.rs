//! RF-to-IQ demodulation: carrier mixing followed by FIR low-pass filtering.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::kernels::conv1d_same_into;
use crate::tensor::{IqTensor, RfTensor};

/// Linear-phase low-pass FIR with unit DC gain.
#[derive(Debug, Clone, PartialEq)]
pub struct FirKernel {
    taps: Vec<f64>,
    normalized_cutoff: f64,
}

impl FirKernel {
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn normalized_cutoff(&self) -> f64 {
        self.normalized_cutoff
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Hamming-windowed sinc low-pass, normalized to unit tap sum.
///
/// `normalized_cutoff` is in cycles/sample and must lie in `(0, 0.5)`.
pub fn design_lowpass_fir(normalized_cutoff: f64, taps: usize) -> Result<FirKernel> {
    if !(normalized_cutoff > 0.0 && normalized_cutoff < 0.5) {
        return Err(Error::invalid(format!(
            "cutoff must lie in (0, 0.5) cycles/sample, got {normalized_cutoff}"
        )));
    }
    if taps < 3 || taps.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "tap count must be odd and >= 3, got {taps}"
        )));
    }
    let mid = taps / 2;
    let mut h = vec![0.0; taps];
    // Only the left half is evaluated; the right half mirrors it exactly.
    for n in 0..=mid {
        let m = n as f64 - mid as f64;
        let window = 0.54 - 0.46 * (2.0 * PI * n as f64 / (taps - 1) as f64).cos();
        let v = 2.0 * normalized_cutoff * sinc(2.0 * normalized_cutoff * m) * window;
        h[n] = v;
        h[taps - 1 - n] = v;
    }
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= sum);
    Ok(FirKernel {
        taps: h,
        normalized_cutoff,
    })
}

/// Demodulator with its mixing tables precomputed for a fixed axial length.
#[derive(Debug, Clone)]
pub struct Demodulator {
    fir: FirKernel,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Demodulator {
    pub fn new(cfg: &PipelineConfig, fir: FirKernel, n_l: usize) -> Result<Self> {
        if !(cfg.fs.is_finite() && cfg.fs > 2.0 * cfg.fc) {
            return Err(Error::invalid(format!(
                "sampling rate {} Hz does not exceed twice the carrier {} Hz",
                cfg.fs, cfg.fc
            )));
        }
        let ratio = cfg.fc / cfg.fs;
        // Phase reference: sample 0. Reduce to one cycle before scaling by 2*pi.
        let phase = |n: usize| 2.0 * PI * (n as f64 * ratio).fract();
        let cos = (0..n_l).map(|n| phase(n).cos()).collect();
        let sin = (0..n_l).map(|n| phase(n).sin()).collect();
        Ok(Self { fir, cos, sin })
    }

    pub fn n_l(&self) -> usize {
        self.cos.len()
    }

    pub fn fir(&self) -> &FirKernel {
        &self.fir
    }

    /// Bytes held by the mixing tables and taps.
    pub fn resident_bytes(&self) -> usize {
        (self.cos.len() + self.sin.len() + self.fir.len()) * std::mem::size_of::<f64>()
    }

    pub fn apply(&self, rf: &RfTensor) -> Result<IqTensor> {
        let n_l = self.n_l();
        if rf.n_l() != n_l {
            return Err(Error::mismatch("axial sample count", n_l, rf.n_l()));
        }
        let total = rf.data().len();
        let mut re = vec![0.0f32; total];
        let mut im = vec![0.0f32; total];
        re.par_chunks_mut(n_l)
            .zip(im.par_chunks_mut(n_l))
            .zip(rf.data().par_chunks(n_l))
            .try_for_each_init(
                || (vec![0.0f64; n_l], vec![0.0f64; n_l], vec![0.0f64; n_l]),
                |(mix, filt_re, filt_im), ((out_re, out_im), trace)| -> Result<()> {
                    for ((m, &x), &c) in mix.iter_mut().zip(trace).zip(&self.cos) {
                        *m = x as f64 * c;
                    }
                    conv1d_same_into(mix, self.fir.taps(), filt_re)?;
                    for ((m, &x), &s) in mix.iter_mut().zip(trace).zip(&self.sin) {
                        *m = -(x as f64) * s;
                    }
                    conv1d_same_into(mix, self.fir.taps(), filt_im)?;
                    for (o, v) in out_re.iter_mut().zip(filt_re.iter()) {
                        *o = *v as f32;
                    }
                    for (o, v) in out_im.iter_mut().zip(filt_im.iter()) {
                        *o = *v as f32;
                    }
                    Ok(())
                },
            )?;
        IqTensor::new(re, im, n_l, rf.n_c(), rf.n_f())
    }
}

/// Mixes every channel/frame trace to baseband and low-pass filters it.
///
/// The output keeps the axial length (no decimation).
pub fn demodulate(rf: &RfTensor, cfg: &PipelineConfig, fir: &FirKernel) -> Result<IqTensor> {
    Demodulator::new(cfg, fir.clone(), rf.n_l())?.apply(rf)
}
