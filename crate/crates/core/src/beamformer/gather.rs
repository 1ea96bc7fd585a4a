use std::sync::Arc;

use rayon::prelude::*;

use super::{check_input, rotate, Beamformer};
use crate::beamformer::DelayTable;
use crate::config::Variant;
use crate::error::Result;
use crate::tensor::IqTensor;

/// Dynamic-indexing DAS: every output sample gathers two neighbouring input
/// samples per channel at the table's fractional delay.
///
/// `out[p, f] = sum_c apod * ((1 - frac) * iq[k, c, f] + frac * iq[k + 1, c, f])`,
/// with channels summed in ascending order.
pub fn das_gather(iq: &IqTensor, table: &DelayTable) -> Result<IqTensor> {
    check_input(iq, table.n_s(), table.n_channels())?;
    let n_p = table.n_pixels();
    let n_c = table.n_channels();
    let n_f = iq.n_f();
    let rotation = table.rotation().map(|r| r.as_slice());
    let mut re = vec![0.0f32; n_p * n_f];
    let mut im = vec![0.0f32; n_p * n_f];
    re.par_iter_mut()
        .zip(im.par_iter_mut())
        .enumerate()
        .for_each(|(o, (out_re, out_im))| {
            let (p, f) = (o % n_p, o / n_p);
            let (mut acc_re, mut acc_im) = (0.0f64, 0.0f64);
            for c in 0..n_c {
                let idx = table.index(p, c);
                let Some((k, w0, w1)) = table.taps(idx) else {
                    continue;
                };
                let (tr, ti) = iq.trace(c, f);
                let v_re = w0 * tr[k] as f64 + w1 * tr[k + 1] as f64;
                let v_im = w0 * ti[k] as f64 + w1 * ti[k + 1] as f64;
                let (r, i) = rotate(v_re, v_im, rotation.map(|r| &r[idx]));
                acc_re += r;
                acc_im += i;
            }
            *out_re = acc_re as f32;
            *out_im = acc_im as f32;
        });
    IqTensor::new(re, im, n_p, 1, n_f)
}

#[derive(Debug, Clone)]
pub struct GatherBeamformer {
    table: Arc<DelayTable>,
}

impl GatherBeamformer {
    pub fn new(table: Arc<DelayTable>) -> Self {
        Self { table }
    }
}

impl Beamformer for GatherBeamformer {
    fn variant(&self) -> Variant {
        Variant::Gather
    }

    fn n_pixels(&self) -> usize {
        self.table.n_pixels()
    }

    fn n_channels(&self) -> usize {
        self.table.n_channels()
    }

    fn n_s(&self) -> usize {
        self.table.n_s()
    }

    fn beamform(&self, iq: &IqTensor) -> Result<IqTensor> {
        das_gather(iq, &self.table)
    }

    fn resident_bytes(&self) -> usize {
        self.table.resident_bytes()
    }

    fn scratch_bytes(&self, _n_f: usize) -> usize {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn zero_input_gives_zero() {
        let table = DelayTable::from_parts(4, 2, 16, vec![1.5; 8], vec![1.0; 8]).unwrap();
        let out = das_gather(&IqTensor::zeros(16, 2, 3).unwrap(), &table).unwrap();
        assert_eq!((out.n_s(), out.n_c(), out.n_f()), (4, 1, 3));
        assert!(out.re().iter().chain(out.im()).all(|v| *v == 0.0));
    }

    #[test]
    fn half_sample_delay_interpolates() {
        let mut re = vec![0.0f32; 32];
        re[10] = 1.0;
        let iq = IqTensor::new(re, vec![0.0; 32], 32, 1, 1).unwrap();
        for apod in [1.0, 0.5] {
            let table = DelayTable::from_parts(1, 1, 32, vec![10.5], vec![apod]).unwrap();
            let out = das_gather(&iq, &table).unwrap();
            assert_eq!(out.re()[0], 0.5 * apod as f32);
            assert_eq!(out.im()[0], 0.0);
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let table = DelayTable::from_parts(1, 2, 32, vec![1.0; 2], vec![1.0; 2]).unwrap();
        assert!(matches!(
            das_gather(&IqTensor::zeros(31, 2, 1).unwrap(), &table),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(das_gather(&IqTensor::zeros(32, 3, 1).unwrap(), &table).is_err());
    }
}
