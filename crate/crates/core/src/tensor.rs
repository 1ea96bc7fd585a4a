//! Sample tensors shared by every pipeline stage.
//!
//! Both tensors use the same flat layout: the axial (sample) index varies
//! fastest, then channel, then frame. Element `(s, c, f)` lives at
//! `s + n_s * (c + n_c * f)`.

use crate::error::{Error, Result};

fn first_non_finite(data: &[f32]) -> Option<usize> {
    data.iter().position(|v| !v.is_finite())
}

/// Raw real-valued RF samples with dims `(n_l, n_c, n_f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RfTensor {
    data: Vec<f32>,
    n_l: usize,
    n_c: usize,
    n_f: usize,
}

impl RfTensor {
    pub fn new(data: Vec<f32>, n_l: usize, n_c: usize, n_f: usize) -> Result<Self> {
        let len = n_l * n_c * n_f;
        if n_l == 0 || n_c == 0 || n_f == 0 {
            return Err(Error::invalid(format!(
                "RF dims must be positive, got ({n_l}, {n_c}, {n_f})"
            )));
        }
        if data.len() != len {
            return Err(Error::mismatch("RF data length", len, data.len()));
        }
        if let Some(index) = first_non_finite(&data) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            data,
            n_l,
            n_c,
            n_f,
        })
    }

    pub fn zeros(n_l: usize, n_c: usize, n_f: usize) -> Result<Self> {
        Self::new(vec![0.0; n_l * n_c * n_f], n_l, n_c, n_f)
    }

    pub fn n_l(&self) -> usize {
        self.n_l
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    pub fn n_f(&self) -> usize {
        self.n_f
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Axial trace of one channel in one frame.
    pub fn trace(&self, channel: usize, frame: usize) -> &[f32] {
        let start = self.n_l * (channel + self.n_c * frame);
        &self.data[start..start + self.n_l]
    }

    /// Number of payload bytes when stored as 32-bit floats.
    pub fn byte_len(&self) -> usize {
        self.data.len() * std::mem::size_of::<f32>()
    }
}

/// Complex baseband samples, stored as separate real and imaginary planes.
///
/// A beamformed image is an `IqTensor` with `n_s = n_pixels` and `n_c = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct IqTensor {
    re: Vec<f32>,
    im: Vec<f32>,
    n_s: usize,
    n_c: usize,
    n_f: usize,
}

impl IqTensor {
    pub fn new(re: Vec<f32>, im: Vec<f32>, n_s: usize, n_c: usize, n_f: usize) -> Result<Self> {
        let len = n_s * n_c * n_f;
        if n_s == 0 || n_c == 0 || n_f == 0 {
            return Err(Error::invalid(format!(
                "IQ dims must be positive, got ({n_s}, {n_c}, {n_f})"
            )));
        }
        if re.len() != len {
            return Err(Error::mismatch("IQ real length", len, re.len()));
        }
        if im.len() != len {
            return Err(Error::mismatch("IQ imaginary length", len, im.len()));
        }
        if let Some(index) = first_non_finite(&re).or_else(|| first_non_finite(&im)) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            re,
            im,
            n_s,
            n_c,
            n_f,
        })
    }

    pub fn zeros(n_s: usize, n_c: usize, n_f: usize) -> Result<Self> {
        let len = n_s * n_c * n_f;
        Self::new(vec![0.0; len], vec![0.0; len], n_s, n_c, n_f)
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    pub fn n_f(&self) -> usize {
        self.n_f
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn re(&self) -> &[f32] {
        &self.re
    }

    pub fn im(&self) -> &[f32] {
        &self.im
    }

    pub(crate) fn offset(&self, channel: usize, frame: usize) -> usize {
        self.n_s * (channel + self.n_c * frame)
    }

    /// Real and imaginary axial traces of one channel in one frame.
    pub fn trace(&self, channel: usize, frame: usize) -> (&[f32], &[f32]) {
        let start = self.offset(channel, frame);
        let end = start + self.n_s;
        (&self.re[start..end], &self.im[start..end])
    }

    pub fn scaled(&self, alpha: f32) -> Self {
        Self {
            re: self.re.iter().map(|v| v * alpha).collect(),
            im: self.im.iter().map(|v| v * alpha).collect(),
            ..*self
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            re: self.re.clone(),
            im: self.im.iter().map(|v| -v).collect(),
            ..*self
        }
    }

    pub fn byte_len(&self) -> usize {
        2 * self.re.len() * std::mem::size_of::<f32>()
    }

    pub fn into_parts(self) -> (Vec<f32>, Vec<f32>) {
        (self.re, self.im)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rf_rejects_wrong_length_and_nan() {
        assert!(matches!(
            RfTensor::new(vec![0.0; 5], 2, 3, 1),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            RfTensor::new(vec![0.0, f32::NAN], 2, 1, 1),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(RfTensor::new(vec![], 0, 1, 1).is_err());
    }

    #[test]
    fn layout_is_axial_fastest() {
        let data: Vec<f32> = (0..24).map(|v| v as f32).collect();
        let rf = RfTensor::new(data, 4, 3, 2).unwrap();
        assert_eq!(rf.trace(0, 0), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(rf.trace(2, 0), &[8.0, 9.0, 10.0, 11.0]);
        assert_eq!(rf.trace(0, 1), &[12.0, 13.0, 14.0, 15.0]);
    }

    #[test]
    fn iq_rejects_mismatched_planes() {
        assert!(IqTensor::new(vec![0.0; 4], vec![0.0; 3], 4, 1, 1).is_err());
        assert!(IqTensor::new(vec![0.0; 4], vec![f32::INFINITY; 4], 4, 1, 1).is_err());
    }
}
