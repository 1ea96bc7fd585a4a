//! Shared fixtures and reference implementations for integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use usbench_core::{Apodization, ImageGrid, IqTensor, PipelineConfig, ProbeGeometry};

/// Scalar delay-and-sum computed straight from the geometry, one pixel,
/// channel and frame at a time.
pub fn das_oracle(
    iq: &IqTensor,
    geom: &ProbeGeometry,
    grid: &ImageGrid,
    cfg: &PipelineConfig,
) -> (Vec<f64>, Vec<f64>) {
    let (n_s, n_c, n_f) = (iq.n_s(), iq.n_c(), iq.n_f());
    let n_p = grid.nx * grid.nz;
    let half = 0.5 * geom.n_elements() as f64 * geom.pitch();
    let mut out_re = vec![0.0; n_p * n_f];
    let mut out_im = vec![0.0; n_p * n_f];
    for f in 0..n_f {
        for iz in 0..grid.nz {
            for ix in 0..grid.nx {
                let p = iz * grid.nx + ix;
                let x = linspace(grid.x_min, grid.x_max, grid.nx, ix);
                let z = linspace(grid.z_min, grid.z_max, grid.nz, iz);
                let (mut sr, mut si) = (0.0, 0.0);
                for c in 0..n_c {
                    let xe = (c as f64 - (n_c as f64 - 1.0) / 2.0) * geom.pitch();
                    let tau = (z + ((x - xe).powi(2) + z * z).sqrt()) / cfg.c;
                    let d = tau * cfg.fs;
                    if d < 0.0 || d > (n_s - 2) as f64 {
                        continue;
                    }
                    let w = match cfg.apodization {
                        Apodization::Rectangular => 1.0,
                        Apodization::Hann => {
                            let u = (x - xe).abs();
                            if u >= half {
                                0.0
                            } else {
                                0.5 + 0.5 * (PI * u / half).cos()
                            }
                        }
                    };
                    let k = d.floor() as usize;
                    let t = d - k as f64;
                    let (re, im) = iq.trace(c, f);
                    let vr = (1.0 - t) * re[k] as f64 + t * re[k + 1] as f64;
                    let vi = (1.0 - t) * im[k] as f64 + t * im[k + 1] as f64;
                    let phi = 2.0 * PI * cfg.fc * tau;
                    let (cs, sn) = (phi.cos(), phi.sin());
                    sr += w * (vr * cs - vi * sn);
                    si += w * (vr * sn + vi * cs);
                }
                out_re[p + n_p * f] = sr;
                out_im[p + n_p * f] = si;
            }
        }
    }
    (out_re, out_im)
}

fn linspace(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
    if n == 1 {
        0.5 * (lo + hi)
    } else {
        lo + (hi - lo) * i as f64 / (n - 1) as f64
    }
}

/// `max |a - b| / max |reference|` over complex samples.
pub fn max_rel_dev(a: (&[f64], &[f64]), b: (&[f64], &[f64]), reference: (&[f64], &[f64])) -> f64 {
    let scale = reference
        .0
        .iter()
        .zip(reference.1)
        .map(|(r, i)| r.hypot(*i))
        .fold(0.0, f64::max);
    let diff =
        a.0.iter()
            .zip(a.1)
            .zip(b.0.iter().zip(b.1))
            .map(|((ar, ai), (br, bi))| (ar - br).hypot(ai - bi))
            .fold(0.0, f64::max);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

pub fn widen(iq: &IqTensor) -> (Vec<f64>, Vec<f64>) {
    (
        iq.re().iter().map(|&v| v as f64).collect(),
        iq.im().iter().map(|&v| v as f64).collect(),
    )
}

pub fn random_iq(rng: &mut ChaCha8Rng, n_s: usize, n_c: usize, n_f: usize) -> IqTensor {
    let n = n_s * n_c * n_f;
    let re = (0..n).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
    let im = (0..n).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
    IqTensor::new(re, im, n_s, n_c, n_f).unwrap()
}

pub struct Instance {
    pub cfg: PipelineConfig,
    pub geom: ProbeGeometry,
    pub grid: ImageGrid,
    pub n_s: usize,
}

/// Random probe, grid and sampling setup. Part of each grid falls outside
/// the recorded depth so inactive taps are exercised.
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    max_side: usize,
    max_channels: usize,
    n_f: usize,
) -> Instance {
    let cfg = PipelineConfig {
        n_f,
        apodization: if rng.gen_bool(0.5) {
            Apodization::Hann
        } else {
            Apodization::Rectangular
        },
        ..Default::default()
    };
    let n_c = rng.gen_range(1..=max_channels);
    let geom = ProbeGeometry::new(n_c, rng.gen_range(0.2e-3..0.4e-3), cfg.c).unwrap();
    let n_s = rng.gen_range(64..=256);
    let z_reach = n_s as f64 * cfg.c / cfg.fs / 2.0;
    let nx = rng.gen_range(2..=max_side);
    let nz = rng.gen_range(2..=max_side);
    let half_w = rng.gen_range(1e-3..5e-3);
    let z_min = rng.gen_range(0.5e-3..0.5 * z_reach);
    let z_max = z_min + rng.gen_range(0.5..1.2) * z_reach;
    let grid = ImageGrid::new(-half_w, half_w, z_min, z_max, nx, nz).unwrap();
    Instance {
        cfg,
        geom,
        grid,
        n_s,
    }
}

/// The largest instance: 64x64 pixels, 32 channels.
pub fn full_instance(n_f: usize, n_s: usize) -> Instance {
    let cfg = PipelineConfig {
        n_f,
        ..Default::default()
    };
    let geom = ProbeGeometry::new(32, 0.3e-3, cfg.c).unwrap();
    let z_reach = n_s as f64 * cfg.c / cfg.fs / 2.0;
    let grid = ImageGrid::new(-4e-3, 4e-3, 0.1 * z_reach, 0.9 * z_reach, 64, 64).unwrap();
    Instance {
        cfg,
        geom,
        grid,
        n_s,
    }
}
