//! Binary PGM (P5, 8-bit) and raw little-endian float32 image dumps.

use std::fs;
use std::path::Path;

use super::Image;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PgmRange {
    /// Map `[lo, hi]` onto `[0, 255]`, clipping outside values.
    Fixed(f32, f32),
    /// Use each image's own min and max.
    Auto,
}

fn quantize(v: f32, lo: f32, hi: f32) -> u8 {
    if hi <= lo {
        return 0;
    }
    (((v - lo) / (hi - lo)).clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Encodes images as consecutive P5 rasters in one buffer.
pub fn encode_pgm(images: &[&Image], range: PgmRange) -> Vec<u8> {
    let mut out = Vec::new();
    for img in images {
        let (lo, hi) = match range {
            PgmRange::Fixed(lo, hi) => (lo, hi),
            PgmRange::Auto => img
                .pixels
                .iter()
                .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                }),
        };
        out.extend_from_slice(format!("P5\n{} {}\n255\n", img.shape.nx, img.shape.nz).as_bytes());
        out.extend(img.pixels.iter().map(|&v| quantize(v, lo, hi)));
    }
    out
}

pub fn write_pgm(path: impl AsRef<Path>, images: &[&Image], range: PgmRange) -> Result<()> {
    fs::write(path, encode_pgm(images, range))?;
    Ok(())
}

/// Row-major little-endian float32 dump, no header.
pub fn write_raw_f32(path: impl AsRef<Path>, values: &[f32]) -> Result<()> {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes)?;
    Ok(())
}
