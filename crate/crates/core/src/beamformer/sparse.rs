use std::sync::Arc;

use rayon::prelude::*;

use super::{accumulate_channel, check_input, Beamformer};
use crate::beamformer::DelayTable;
use crate::config::Variant;
use crate::error::{Error, Result};
use crate::tensor::IqTensor;

/// One channel's selection operator in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_offsets[r]..self.row_offsets[r + 1];
        self.col_indices[span.clone()]
            .iter()
            .zip(&self.values[span])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn bytes(&self) -> usize {
        self.row_offsets.len() * std::mem::size_of::<usize>()
            + self.col_indices.len() * std::mem::size_of::<u32>()
            + self.values.len() * std::mem::size_of::<f64>()
    }
}

/// Per-channel sparse interpolation matrices, `n_pixels x n_s` each.
///
/// Row `p` of channel `c` is empty when that entry is inactive and otherwise
/// holds `apod * (1 - frac)` at column `k` and `apod * frac` at column `k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionMatrix {
    n_pixels: usize,
    n_s: usize,
    channels: Vec<CsrMatrix>,
    rotation: Option<Arc<Vec<[f64; 2]>>>,
}

impl SelectionMatrix {
    pub fn n_pixels(&self) -> usize {
        self.n_pixels
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, c: usize) -> &CsrMatrix {
        &self.channels[c]
    }

    pub fn rotation(&self) -> Option<&Arc<Vec<[f64; 2]>>> {
        self.rotation.as_ref()
    }

    pub fn resident_bytes(&self) -> usize {
        self.channels.iter().map(CsrMatrix::bytes).sum::<usize>()
            + self.rotation.as_ref().map_or(0, |r| r.len() * 16)
    }
}

pub fn build_selection_matrix(table: &DelayTable) -> SelectionMatrix {
    let n_p = table.n_pixels();
    let channels = (0..table.n_channels())
        .map(|c| {
            let mut row_offsets = Vec::with_capacity(n_p + 1);
            let mut col_indices = Vec::new();
            let mut values = Vec::new();
            row_offsets.push(0);
            for p in 0..n_p {
                if let Some((k, w0, w1)) = table.taps(table.index(p, c)) {
                    col_indices.extend([k as u32, k as u32 + 1]);
                    values.extend([w0, w1]);
                }
                row_offsets.push(values.len());
            }
            CsrMatrix {
                row_offsets,
                col_indices,
                values,
            }
        })
        .collect();
    SelectionMatrix {
        n_pixels: n_p,
        n_s: table.n_s(),
        channels,
        rotation: table.rotation().cloned(),
    }
}

/// Sparse DAS: `out[., f] = sum_c Sel_c * iq[., c, f]`, real and imaginary
/// parts handled independently.
pub fn das_sparse(iq: &IqTensor, sel: &SelectionMatrix) -> Result<IqTensor> {
    check_input(iq, sel.n_s, sel.n_channels())?;
    if sel.n_pixels == 0 {
        return Err(Error::invalid("selection matrix has no rows"));
    }
    let n_p = sel.n_pixels;
    let n_f = iq.n_f();
    let mut acc_re = vec![0.0f64; n_p * n_f];
    let mut acc_im = vec![0.0f64; n_p * n_f];
    let mut y_re = vec![0.0f64; n_p * n_f];
    let mut y_im = vec![0.0f64; n_p * n_f];
    for (c, csr) in sel.channels.iter().enumerate() {
        // y[p, f] = row_p . iq[:, c, f]
        y_re.par_iter_mut()
            .zip(y_im.par_iter_mut())
            .enumerate()
            .for_each(|(o, (yr, yi))| {
                let (p, f) = (o % n_p, o / n_p);
                let (tr, ti) = iq.trace(c, f);
                let (mut sr, mut si) = (0.0f64, 0.0f64);
                for (col, w) in csr.row(p) {
                    sr += w * tr[col] as f64;
                    si += w * ti[col] as f64;
                }
                *yr = sr;
                *yi = si;
            });
        let rot = sel.rotation.as_ref().map(|r| &r[c * n_p..(c + 1) * n_p]);
        accumulate_channel(&mut acc_re, &mut acc_im, &y_re, &y_im, rot, n_p);
    }
    let re = acc_re.iter().map(|&v| v as f32).collect();
    let im = acc_im.iter().map(|&v| v as f32).collect();
    IqTensor::new(re, im, n_p, 1, n_f)
}

#[derive(Debug, Clone)]
pub struct SparseBeamformer {
    sel: SelectionMatrix,
}

impl SparseBeamformer {
    pub fn new(table: &DelayTable) -> Self {
        Self {
            sel: build_selection_matrix(table),
        }
    }
}

impl Beamformer for SparseBeamformer {
    fn variant(&self) -> Variant {
        Variant::Sparse
    }

    fn n_pixels(&self) -> usize {
        self.sel.n_pixels
    }

    fn n_channels(&self) -> usize {
        self.sel.n_channels()
    }

    fn n_s(&self) -> usize {
        self.sel.n_s
    }

    fn beamform(&self, iq: &IqTensor) -> Result<IqTensor> {
        das_sparse(iq, &self.sel)
    }

    fn resident_bytes(&self) -> usize {
        self.sel.resident_bytes()
    }

    fn scratch_bytes(&self, n_f: usize) -> usize {
        // Accumulator plus one channel's product, both complex f64.
        2 * 2 * 8 * self.sel.n_pixels * n_f
    }
}
