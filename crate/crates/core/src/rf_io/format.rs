//! RFB1 binary container.
//!
//! Little-endian throughout, no padding:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "RFB1"
//!      4     4  version (u32, = 1)
//!      8     1  dtype (u8: 0 = int16, 1 = float32)
//!      9     4  n_l (u32)
//!     13     4  n_c (u32)
//!     17     4  n_f (u32)
//!     21     8  fs  (f64, Hz)
//!     29     8  fc  (f64, Hz)
//!     37     8  c   (f64, m/s)
//!     45     8  prf (f64, Hz)
//!     53     .  payload, n_l * n_c * n_f samples, axial fastest
//! ```

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::tensor::RfTensor;

pub const MAGIC: [u8; 4] = *b"RFB1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 53;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("bad magic {0:?}, expected \"RFB1\"")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("unknown dtype code {0}")]
    UnknownDtype(u8),
    #[error("invalid header: {0}")]
    InvalidHeader(String),
    #[error("truncated file: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("trailing data: expected {expected} bytes, found {found}")]
    TrailingData { expected: usize, found: usize },
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    Int16,
    Float32,
}

impl Dtype {
    pub fn code(self) -> u8 {
        match self {
            Dtype::Int16 => 0,
            Dtype::Float32 => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self, LoadError> {
        match code {
            0 => Ok(Dtype::Int16),
            1 => Ok(Dtype::Float32),
            other => Err(LoadError::UnknownDtype(other)),
        }
    }

    pub fn size(self) -> usize {
        match self {
            Dtype::Int16 => 2,
            Dtype::Float32 => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfFileHeader {
    pub version: u32,
    pub dtype: Dtype,
    pub n_l: u32,
    pub n_c: u32,
    pub n_f: u32,
    pub fs: f64,
    pub fc: f64,
    pub c: f64,
    pub prf: f64,
}

impl RfFileHeader {
    pub fn for_tensor(rf: &RfTensor, dtype: Dtype, cfg: &PipelineConfig) -> Self {
        Self {
            version: VERSION,
            dtype,
            n_l: rf.n_l() as u32,
            n_c: rf.n_c() as u32,
            n_f: rf.n_f() as u32,
            fs: cfg.fs,
            fc: cfg.fc,
            c: cfg.c,
            prf: cfg.prf,
        }
    }

    pub fn n_samples(&self) -> usize {
        self.n_l as usize * self.n_c as usize * self.n_f as usize
    }

    /// Payload size in bytes; this is the per-pass input byte count.
    pub fn payload_len(&self) -> usize {
        self.n_samples() * self.dtype.size()
    }

    fn encode(&self) -> [u8; HEADER_LEN] {
        let mut buf = [0u8; HEADER_LEN];
        buf[0..4].copy_from_slice(&MAGIC);
        buf[4..8].copy_from_slice(&self.version.to_le_bytes());
        buf[8] = self.dtype.code();
        buf[9..13].copy_from_slice(&self.n_l.to_le_bytes());
        buf[13..17].copy_from_slice(&self.n_c.to_le_bytes());
        buf[17..21].copy_from_slice(&self.n_f.to_le_bytes());
        buf[21..29].copy_from_slice(&self.fs.to_le_bytes());
        buf[29..37].copy_from_slice(&self.fc.to_le_bytes());
        buf[37..45].copy_from_slice(&self.c.to_le_bytes());
        buf[45..53].copy_from_slice(&self.prf.to_le_bytes());
        buf
    }

    fn decode(bytes: &[u8]) -> Result<Self, LoadError> {
        if bytes.len() < HEADER_LEN {
            return Err(LoadError::Truncated {
                expected: HEADER_LEN,
                found: bytes.len(),
            });
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(LoadError::BadMagic(magic));
        }
        let version = u32_at(4);
        if version != VERSION {
            return Err(LoadError::UnsupportedVersion(version));
        }
        let header = Self {
            version,
            dtype: Dtype::from_code(bytes[8])?,
            n_l: u32_at(9),
            n_c: u32_at(13),
            n_f: u32_at(17),
            fs: f64_at(21),
            fc: f64_at(29),
            c: f64_at(37),
            prf: f64_at(45),
        };
        if header.n_l == 0 || header.n_c == 0 || header.n_f == 0 {
            return Err(LoadError::InvalidHeader(format!(
                "dims must be positive, got ({}, {}, {})",
                header.n_l, header.n_c, header.n_f
            )));
        }
        Ok(header)
    }

    /// Copies the acquisition physics into a pipeline configuration.
    pub fn apply_to(&self, cfg: &mut PipelineConfig) {
        cfg.fs = self.fs;
        cfg.fc = self.fc;
        cfg.c = self.c;
        cfg.prf = self.prf;
        cfg.n_f = self.n_f as usize;
    }
}

/// Serializes a tensor. Int16 payloads store the sample values verbatim, so
/// every sample must already be an integer in the int16 range.
pub fn encode_rf(rf: &RfTensor, header: &RfFileHeader) -> Result<Vec<u8>> {
    let dims = (
        header.n_l as usize,
        header.n_c as usize,
        header.n_f as usize,
    );
    if dims != (rf.n_l(), rf.n_c(), rf.n_f()) {
        return Err(Error::invalid(format!(
            "header dims {dims:?} do not match tensor ({}, {}, {})",
            rf.n_l(),
            rf.n_c(),
            rf.n_f()
        )));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + header.payload_len());
    out.extend_from_slice(&header.encode());
    match header.dtype {
        Dtype::Float32 => out.extend(rf.data().iter().flat_map(|v| v.to_le_bytes())),
        Dtype::Int16 => {
            for (i, &v) in rf.data().iter().enumerate() {
                if v.fract() != 0.0 || v < i16::MIN as f32 || v > i16::MAX as f32 {
                    return Err(Error::invalid(format!(
                        "sample {i} = {v} is not representable as int16"
                    )));
                }
                out.extend_from_slice(&(v as i16).to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn decode_rf(bytes: &[u8]) -> Result<(RfTensor, RfFileHeader), LoadError> {
    let header = RfFileHeader::decode(bytes)?;
    let expected = HEADER_LEN + header.payload_len();
    if bytes.len() < expected {
        return Err(LoadError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(LoadError::TrailingData {
            expected,
            found: bytes.len(),
        });
    }
    let payload = &bytes[HEADER_LEN..];
    let data: Vec<f32> = match header.dtype {
        Dtype::Float32 => payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect(),
        Dtype::Int16 => payload
            .chunks_exact(2)
            .map(|b| i16::from_le_bytes(b.try_into().unwrap()) as f32)
            .collect(),
    };
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(LoadError::NonFinite(i));
    }
    let rf = RfTensor::new(
        data,
        header.n_l as usize,
        header.n_c as usize,
        header.n_f as usize,
    )
    .map_err(|e| LoadError::InvalidHeader(e.to_string()))?;
    Ok((rf, header))
}

pub fn save_rf(path: impl AsRef<Path>, rf: &RfTensor, header: &RfFileHeader) -> Result<()> {
    fs::write(path, encode_rf(rf, header)?)?;
    Ok(())
}

pub fn load_rf(path: impl AsRef<Path>) -> Result<(RfTensor, RfFileHeader)> {
    let bytes = fs::read(path)?;
    Ok(decode_rf(&bytes)?)
}

/// Scales and rounds samples to integers clamped to the int16 range.
pub fn quantize_int16(rf: &RfTensor, scale: f32) -> Result<RfTensor> {
    let data = rf
        .data()
        .iter()
        .map(|v| (v * scale).round().clamp(i16::MIN as f32, i16::MAX as f32))
        .collect();
    RfTensor::new(data, rf.n_l(), rf.n_c(), rf.n_f())
}
