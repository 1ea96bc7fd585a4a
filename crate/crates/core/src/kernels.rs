//! Convolution, reduction and pointwise kernels.
//!
//! Every "same" convolution zero-pads at the borders and keeps the input
//! length. Kernels are applied correlation-style:
//! `out[i] = sum_k kernel[k] * signal[i + k - (K - 1) / 2]`.

use std::ops::{Add, Mul};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor::IqTensor;

/// Sample types a real-valued kernel can be applied to.
pub trait ConvSample: Copy + Add<Output = Self> + Mul<f64, Output = Self> {
    const ZERO: Self;
}

impl ConvSample for f64 {
    const ZERO: Self = 0.0;
}

impl ConvSample for Complex64 {
    const ZERO: Self = Complex64::new(0.0, 0.0);
}

/// 1-D zero-padded convolution returning a vector of the input length.
pub fn conv1d_same<T: ConvSample>(signal: &[T], kernel: &[f64]) -> Result<Vec<T>> {
    let mut out = vec![T::ZERO; signal.len()];
    conv1d_same_into(signal, kernel, &mut out)?;
    Ok(out)
}

/// As [`conv1d_same`], writing into a caller-provided buffer.
pub fn conv1d_same_into<T: ConvSample>(signal: &[T], kernel: &[f64], out: &mut [T]) -> Result<()> {
    if kernel.len().is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "kernel length must be odd, got {}",
            kernel.len()
        )));
    }
    if signal.is_empty() {
        return Err(Error::invalid("signal must be non-empty"));
    }
    if out.len() != signal.len() {
        return Err(Error::mismatch("output length", signal.len(), out.len()));
    }
    let n = signal.len() as isize;
    let half = (kernel.len() / 2) as isize;
    for (i, o) in out.iter_mut().enumerate() {
        let i = i as isize;
        // Clip the tap range so only in-bounds samples are visited.
        let k_lo = (half - i).max(0);
        let k_hi = (n - 1 - i + half).min(kernel.len() as isize - 1);
        let mut acc = T::ZERO;
        for k in k_lo..=k_hi {
            acc = acc + signal[(i + k - half) as usize] * kernel[k as usize];
        }
        *o = acc;
    }
    Ok(())
}

/// Row-major real matrix, `rows x cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("matrix dims must be positive"));
        }
        if data.len() != rows * cols {
            return Err(Error::mismatch(
                "matrix data length",
                rows * cols,
                data.len(),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Result<Self> {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    /// Normalized `side x side` box (moving-average) kernel.
    pub fn box_kernel(side: usize) -> Result<Self> {
        Self::filled(side, side, 1.0 / (side * side) as f64)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }
}

/// 2-D zero-padded convolution (correlation-style), same size as `image`.
pub fn conv2d_same(image: &Matrix, kernel: &Matrix) -> Result<Matrix> {
    if kernel.rows.is_multiple_of(2) || kernel.cols.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "kernel dims must be odd, got {}x{}",
            kernel.rows, kernel.cols
        )));
    }
    let (rows, cols) = (image.rows as isize, image.cols as isize);
    let (hr, hc) = ((kernel.rows / 2) as isize, (kernel.cols / 2) as isize);
    let mut out = vec![0.0; image.data.len()];
    for r in 0..rows {
        let kr_lo = (hr - r).max(0);
        let kr_hi = (rows - 1 - r + hr).min(kernel.rows as isize - 1);
        for c in 0..cols {
            let kc_lo = (hc - c).max(0);
            let kc_hi = (cols - 1 - c + hc).min(kernel.cols as isize - 1);
            let mut acc = 0.0;
            for kr in kr_lo..=kr_hi {
                let src_row = ((r + kr - hr) * cols) as usize;
                let k_row = kr as usize * kernel.cols;
                for kc in kc_lo..=kc_hi {
                    acc += kernel.data[k_row + kc as usize]
                        * image.data[src_row + (c + kc - hc) as usize];
                }
            }
            out[(r * cols + c) as usize] = acc;
        }
    }
    Ok(Matrix {
        rows: image.rows,
        cols: image.cols,
        data: out,
    })
}

/// Elementwise magnitude `sqrt(re^2 + im^2)`, same layout as the input.
pub fn complex_mag(iq: &IqTensor) -> Vec<f64> {
    iq.re()
        .iter()
        .zip(iq.im())
        .map(|(&re, &im)| {
            let (re, im) = (re as f64, im as f64);
            (re * re + im * im).sqrt()
        })
        .collect()
}

/// Two-argument arctangent with range `(-pi, pi]` and `atan2(0, 0) = 0`.
pub fn atan2_phase(im: f64, re: f64) -> f64 {
    if im == 0.0 && re == 0.0 {
        return 0.0;
    }
    let phase = im.atan2(re);
    if phase == -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        phase
    }
}
