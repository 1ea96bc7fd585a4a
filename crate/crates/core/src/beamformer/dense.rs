use std::sync::Arc;

use rayon::prelude::*;

use super::{accumulate_channel, check_input, Beamformer};
use crate::beamformer::{build_selection_matrix, DelayTable, SelectionMatrix};
use crate::config::Variant;
use crate::error::Result;
use crate::tensor::IqTensor;

/// Dense per-channel selection matrices, stored `[channel][pixel][sample]`.
///
/// Applying channel `c`'s matrix to the `(n_s, n_f)` block of that channel is
/// a 1x1 convolution over the frame axis with `n_s` input and `n_pixels`
/// output feature maps; summing the channel results is a plain reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSelectionMatrix {
    n_pixels: usize,
    n_s: usize,
    n_channels: usize,
    weights: Vec<f64>,
    rotation: Option<Arc<Vec<[f64; 2]>>>,
}

impl DenseSelectionMatrix {
    /// Densifies a sparse selection matrix entry for entry.
    pub fn from_sparse(sel: &SelectionMatrix) -> Self {
        let (n_p, n_s, n_c) = (sel.n_pixels(), sel.n_s(), sel.n_channels());
        let mut weights = vec![0.0f64; n_c * n_p * n_s];
        for c in 0..n_c {
            let csr = sel.channel(c);
            for p in 0..n_p {
                let row = (c * n_p + p) * n_s;
                for (col, w) in csr.row(p) {
                    weights[row + col] = w;
                }
            }
        }
        Self {
            n_pixels: n_p,
            n_s,
            n_channels: n_c,
            weights,
            rotation: sel.rotation().cloned(),
        }
    }

    pub fn n_pixels(&self) -> usize {
        self.n_pixels
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn row(&self, channel: usize, pixel: usize) -> &[f64] {
        let start = (channel * self.n_pixels + pixel) * self.n_s;
        &self.weights[start..start + self.n_s]
    }

    pub fn resident_bytes(&self) -> usize {
        self.weights.len() * std::mem::size_of::<f64>()
            + self.rotation.as_ref().map_or(0, |r| r.len() * 16)
    }
}

fn dot(row: &[f64], x: &[f64]) -> f64 {
    row.iter().zip(x).fold(0.0, |acc, (w, v)| acc + w * v)
}

/// Dense DAS: per channel a full matrix product, then a sum over channels.
pub fn das_dense_cnn(iq: &IqTensor, dense: &DenseSelectionMatrix) -> Result<IqTensor> {
    check_input(iq, dense.n_s, dense.n_channels)?;
    let (n_p, n_s) = (dense.n_pixels, dense.n_s);
    let n_f = iq.n_f();
    let mut acc_re = vec![0.0f64; n_p * n_f];
    let mut acc_im = vec![0.0f64; n_p * n_f];
    let mut y_re = vec![0.0f64; n_p * n_f];
    let mut y_im = vec![0.0f64; n_p * n_f];
    let mut x_re = vec![0.0f64; n_s * n_f];
    let mut x_im = vec![0.0f64; n_s * n_f];
    for c in 0..dense.n_channels {
        for f in 0..n_f {
            let (tr, ti) = iq.trace(c, f);
            for (dst, src) in x_re[f * n_s..(f + 1) * n_s].iter_mut().zip(tr) {
                *dst = *src as f64;
            }
            for (dst, src) in x_im[f * n_s..(f + 1) * n_s].iter_mut().zip(ti) {
                *dst = *src as f64;
            }
        }
        y_re.par_iter_mut()
            .zip(y_im.par_iter_mut())
            .enumerate()
            .for_each(|(o, (yr, yi))| {
                let (p, f) = (o % n_p, o / n_p);
                let row = dense.row(c, p);
                *yr = dot(row, &x_re[f * n_s..(f + 1) * n_s]);
                *yi = dot(row, &x_im[f * n_s..(f + 1) * n_s]);
            });
        let rot = dense.rotation.as_ref().map(|r| &r[c * n_p..(c + 1) * n_p]);
        accumulate_channel(&mut acc_re, &mut acc_im, &y_re, &y_im, rot, n_p);
    }
    let re = acc_re.iter().map(|&v| v as f32).collect();
    let im = acc_im.iter().map(|&v| v as f32).collect();
    IqTensor::new(re, im, n_p, 1, n_f)
}

#[derive(Debug, Clone)]
pub struct DenseCnnBeamformer {
    dense: DenseSelectionMatrix,
}

impl DenseCnnBeamformer {
    pub fn new(table: &DelayTable) -> Self {
        Self {
            dense: DenseSelectionMatrix::from_sparse(&build_selection_matrix(table)),
        }
    }
}

impl Beamformer for DenseCnnBeamformer {
    fn variant(&self) -> Variant {
        Variant::FullCnn
    }

    fn n_pixels(&self) -> usize {
        self.dense.n_pixels
    }

    fn n_channels(&self) -> usize {
        self.dense.n_channels
    }

    fn n_s(&self) -> usize {
        self.dense.n_s
    }

    fn beamform(&self, iq: &IqTensor) -> Result<IqTensor> {
        das_dense_cnn(iq, &self.dense)
    }

    fn resident_bytes(&self) -> usize {
        self.dense.resident_bytes()
    }

    fn scratch_bytes(&self, n_f: usize) -> usize {
        // Accumulator and channel product (complex f64) plus the widened input block.
        2 * 2 * 8 * self.dense.n_pixels * n_f + 2 * 8 * self.dense.n_s * n_f
    }
}
