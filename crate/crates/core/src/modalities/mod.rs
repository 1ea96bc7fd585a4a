//! Image-domain estimators applied to beamformed IQ.

mod export;

pub use export::{encode_pgm, write_pgm, write_raw_f32, PgmRange};

use crate::config::{Modality, PipelineConfig};
use crate::error::{Error, Result};
use crate::geometry::ImageGrid;
use crate::kernels::{atan2_phase, conv2d_same, Matrix};
use crate::tensor::IqTensor;

/// Floor inside both log-domain stages.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageShape {
    pub nz: usize,
    pub nx: usize,
}

impl ImageShape {
    pub fn n_pixels(self) -> usize {
        self.nz * self.nx
    }
}

impl From<&ImageGrid> for ImageShape {
    fn from(grid: &ImageGrid) -> Self {
        Self {
            nz: grid.nz,
            nx: grid.nx,
        }
    }
}

/// Row-major `nz x nx` image.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub shape: ImageShape,
    pub pixels: Vec<f32>,
}

impl Image {
    pub fn get(&self, iz: usize, ix: usize) -> f32 {
        self.pixels[iz * self.shape.nx + ix]
    }

    /// `(ix, iz)` of the first maximum pixel.
    pub fn argmax(&self) -> (usize, usize) {
        let (p, _) =
            self.pixels
                .iter()
                .enumerate()
                .fold((0, f32::NEG_INFINITY), |(bp, bv), (p, &v)| {
                    if v > bv {
                        (p, v)
                    } else {
                        (bp, bv)
                    }
                });
        (p % self.shape.nx, p / self.shape.nx)
    }
}

/// Dynamic-range compressed envelope, one image per frame, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BmodeImage {
    pub frames: Vec<Image>,
}

/// Axial velocity in m/s, bounded by `v_nyquist`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityImage {
    pub image: Image,
    pub v_nyquist: f64,
}

/// Accumulated Doppler power in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerImage {
    pub image: Image,
}

fn check_pixels(iq: &IqTensor, shape: ImageShape) -> Result<()> {
    if iq.n_c() != 1 {
        return Err(Error::mismatch("beamformed channel count", 1, iq.n_c()));
    }
    if iq.n_s() != shape.n_pixels() {
        return Err(Error::mismatch("pixel count", shape.n_pixels(), iq.n_s()));
    }
    Ok(())
}

fn power(re: f32, im: f32) -> f64 {
    let (re, im) = (re as f64, im as f64);
    re * re + im * im
}

/// Log-compresses each frame's envelope into `[0, 1]`.
///
/// `env_db = 20 log10(env / max(env) + 1e-12)`, clipped to `[-DR, 0]` and
/// mapped linearly to `[0, 1]`. Normalization is per frame; an all-zero
/// frame maps to an all-zero image.
pub fn bmode(iq_bf: &IqTensor, shape: ImageShape, dynamic_range_db: f64) -> Result<BmodeImage> {
    check_pixels(iq_bf, shape)?;
    if !(dynamic_range_db > 0.0 && dynamic_range_db.is_finite()) {
        return Err(Error::invalid(format!(
            "dynamic range must be positive, got {dynamic_range_db}"
        )));
    }
    let n_p = shape.n_pixels();
    let frames = (0..iq_bf.n_f())
        .map(|f| {
            let (re, im) = iq_bf.trace(0, f);
            let p: Vec<f64> = re.iter().zip(im).map(|(&r, &i)| power(r, i)).collect();
            let p_max = p.iter().copied().fold(0.0, f64::max);
            let pixels = if p_max == 0.0 {
                vec![0.0; n_p]
            } else {
                // Normalizing in the power domain keeps the result exact under
                // input scalings that are exact in f32.
                p.iter()
                    .map(|&pi| {
                        let db = 20.0 * ((pi / p_max).sqrt() + LOG_FLOOR).log10();
                        let db = db.clamp(-dynamic_range_db, 0.0);
                        ((db + dynamic_range_db) / dynamic_range_db) as f32
                    })
                    .collect()
            };
            Image { shape, pixels }
        })
        .collect();
    Ok(BmodeImage { frames })
}

/// Lag-1 autocorrelation summed over the ensemble, per pixel.
pub fn lag1_autocorrelation(iq_bf: &IqTensor, shape: ImageShape) -> Result<(Matrix, Matrix)> {
    check_pixels(iq_bf, shape)?;
    if iq_bf.n_f() < 2 {
        return Err(Error::invalid(format!(
            "autocorrelation needs at least 2 frames, got {}",
            iq_bf.n_f()
        )));
    }
    let n_p = shape.n_pixels();
    let mut r_re = vec![0.0f64; n_p];
    let mut r_im = vec![0.0f64; n_p];
    for f in 0..iq_bf.n_f() - 1 {
        let (a_re, a_im) = iq_bf.trace(0, f);
        let (b_re, b_im) = iq_bf.trace(0, f + 1);
        for p in 0..n_p {
            let (ar, ai) = (a_re[p] as f64, a_im[p] as f64);
            let (br, bi) = (b_re[p] as f64, b_im[p] as f64);
            // conj(a) * b
            r_re[p] += ar * br + ai * bi;
            r_im[p] += ar * bi - ai * br;
        }
    }
    Ok((
        Matrix::new(shape.nz, shape.nx, r_re)?,
        Matrix::new(shape.nz, shape.nx, r_im)?,
    ))
}

/// Color Doppler stage with its smoothing kernel prepared up front.
#[derive(Debug, Clone)]
pub struct ColorDopplerEstimator {
    kernel: Matrix,
    scale: f64,
    v_nyquist: f64,
}

impl ColorDopplerEstimator {
    pub fn new(cfg: &PipelineConfig) -> Result<Self> {
        if cfg.smoothing_kernel.is_multiple_of(2) {
            return Err(Error::invalid("smoothing kernel side must be odd"));
        }
        if !(cfg.fc > 0.0 && cfg.prf > 0.0 && cfg.c > 0.0) {
            return Err(Error::invalid("c, prf and fc must be positive"));
        }
        Ok(Self {
            kernel: Matrix::box_kernel(cfg.smoothing_kernel)?,
            scale: cfg.c * cfg.prf / (4.0 * std::f64::consts::PI * cfg.fc),
            v_nyquist: cfg.nyquist_velocity(),
        })
    }

    pub fn estimate(&self, iq_bf: &IqTensor, shape: ImageShape) -> Result<VelocityImage> {
        let (r_re, r_im) = lag1_autocorrelation(iq_bf, shape)?;
        let s_re = conv2d_same(&r_re, &self.kernel)?;
        let s_im = conv2d_same(&r_im, &self.kernel)?;
        let pixels = s_re
            .data()
            .iter()
            .zip(s_im.data())
            .map(|(&re, &im)| {
                let v = self.scale * atan2_phase(im, re);
                v.clamp(-self.v_nyquist, self.v_nyquist) as f32
            })
            .collect();
        Ok(VelocityImage {
            image: Image { shape, pixels },
            v_nyquist: self.v_nyquist,
        })
    }
}

/// Kasai velocity estimate: `v = c * prf / (4 pi fc) * arg(R1)` with `R1`'s
/// real and imaginary parts box-smoothed before the angle is taken.
///
/// A phase advancing from frame to frame gives a positive velocity.
pub fn color_doppler(
    iq_bf: &IqTensor,
    shape: ImageShape,
    cfg: &PipelineConfig,
) -> Result<VelocityImage> {
    ColorDopplerEstimator::new(cfg)?.estimate(iq_bf, shape)
}

/// `10 log10(max(sum_f |x_f|^2, 1e-12))` per pixel.
pub fn power_doppler(iq_bf: &IqTensor, shape: ImageShape) -> Result<PowerImage> {
    check_pixels(iq_bf, shape)?;
    let n_p = shape.n_pixels();
    let mut acc = vec![0.0f64; n_p];
    for f in 0..iq_bf.n_f() {
        let (re, im) = iq_bf.trace(0, f);
        for (a, (&r, &i)) in acc.iter_mut().zip(re.iter().zip(im)) {
            *a += power(r, i);
        }
    }
    let pixels = acc
        .iter()
        .map(|&p| (10.0 * p.max(LOG_FLOOR).log10()) as f32)
        .collect();
    Ok(PowerImage {
        image: Image { shape, pixels },
    })
}

/// Output of one modality stage.
#[derive(Debug, Clone, PartialEq)]
pub enum ModalityOutput {
    Bmode(BmodeImage),
    Velocity(VelocityImage),
    Power(PowerImage),
}

impl ModalityOutput {
    pub fn images(&self) -> Vec<&Image> {
        match self {
            ModalityOutput::Bmode(b) => b.frames.iter().collect(),
            ModalityOutput::Velocity(v) => vec![&v.image],
            ModalityOutput::Power(p) => vec![&p.image],
        }
    }

    /// All pixel values, image after image.
    pub fn raw(&self) -> Vec<f32> {
        self.images()
            .into_iter()
            .flat_map(|img| img.pixels.iter().copied())
            .collect()
    }

    /// Display range used when rendering to 8-bit.
    pub fn display_range(&self) -> PgmRange {
        match self {
            ModalityOutput::Bmode(_) => PgmRange::Fixed(0.0, 1.0),
            ModalityOutput::Velocity(v) => PgmRange::Fixed(-v.v_nyquist as f32, v.v_nyquist as f32),
            ModalityOutput::Power(_) => PgmRange::Auto,
        }
    }

    pub fn byte_len(&self) -> usize {
        self.images().iter().map(|i| i.pixels.len() * 4).sum()
    }
}

/// A modality estimator configured for one image shape.
pub trait ModalityStage: Send + Sync {
    fn modality(&self) -> Modality;

    fn apply(&self, iq_bf: &IqTensor) -> Result<ModalityOutput>;

    /// Transient bytes allocated by one `apply` call besides its output.
    fn scratch_bytes(&self, n_f: usize) -> usize;
}

struct BmodeStage {
    shape: ImageShape,
    dynamic_range_db: f64,
}

impl ModalityStage for BmodeStage {
    fn modality(&self) -> Modality {
        Modality::Bmode
    }

    fn apply(&self, iq_bf: &IqTensor) -> Result<ModalityOutput> {
        bmode(iq_bf, self.shape, self.dynamic_range_db).map(ModalityOutput::Bmode)
    }

    fn scratch_bytes(&self, _n_f: usize) -> usize {
        8 * self.shape.n_pixels()
    }
}

struct ColorDopplerStage {
    shape: ImageShape,
    estimator: ColorDopplerEstimator,
}

impl ModalityStage for ColorDopplerStage {
    fn modality(&self) -> Modality {
        Modality::ColorDoppler
    }

    fn apply(&self, iq_bf: &IqTensor) -> Result<ModalityOutput> {
        self.estimator
            .estimate(iq_bf, self.shape)
            .map(ModalityOutput::Velocity)
    }

    fn scratch_bytes(&self, _n_f: usize) -> usize {
        // Raw and smoothed autocorrelation, real and imaginary.
        4 * 8 * self.shape.n_pixels()
    }
}

struct PowerDopplerStage {
    shape: ImageShape,
}

impl ModalityStage for PowerDopplerStage {
    fn modality(&self) -> Modality {
        Modality::PowerDoppler
    }

    fn apply(&self, iq_bf: &IqTensor) -> Result<ModalityOutput> {
        power_doppler(iq_bf, self.shape).map(ModalityOutput::Power)
    }

    fn scratch_bytes(&self, _n_f: usize) -> usize {
        8 * self.shape.n_pixels()
    }
}

pub type ModalityFactory = fn(&PipelineConfig, ImageShape) -> Result<Box<dyn ModalityStage>>;

/// Name-keyed set of modality stage constructors.
pub struct ModalityRegistry {
    entries: Vec<(String, ModalityFactory)>,
}

impl ModalityRegistry {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    pub fn with_builtin() -> Self {
        let mut registry = Self::new();
        registry.register(Modality::Bmode.name(), |cfg, shape| {
            Ok(Box::new(BmodeStage {
                shape,
                dynamic_range_db: cfg.dynamic_range_db,
            }))
        });
        registry.register(Modality::ColorDoppler.name(), |cfg, shape| {
            Ok(Box::new(ColorDopplerStage {
                shape,
                estimator: ColorDopplerEstimator::new(cfg)?,
            }))
        });
        registry.register(Modality::PowerDoppler.name(), |_, shape| {
            Ok(Box::new(PowerDopplerStage { shape }))
        });
        registry
    }

    pub fn register(&mut self, name: &str, factory: ModalityFactory) {
        match self.entries.iter_mut().find(|(n, _)| n == name) {
            Some(entry) => entry.1 = factory,
            None => self.entries.push((name.to_string(), factory)),
        }
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn build(
        &self,
        name: &str,
        cfg: &PipelineConfig,
        shape: ImageShape,
    ) -> Result<Box<dyn ModalityStage>> {
        let lookup = |key: &str| self.entries.iter().find(|(n, _)| n == key).map(|(_, f)| *f);
        let factory = lookup(name)
            .or_else(|| name.parse::<Modality>().ok().and_then(|m| lookup(m.name())))
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "modality",
                name: name.to_string(),
                available: self.names().join(", "),
            })?;
        factory(cfg, shape)
    }
}

impl Default for ModalityRegistry {
    fn default() -> Self {
        Self::with_builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const SHAPE: ImageShape = ImageShape { nz: 6, nx: 5 };

    fn field(n_f: usize, value: impl Fn(usize, usize) -> (f32, f32)) -> IqTensor {
        let n_p = SHAPE.n_pixels();
        let mut re = vec![0.0; n_p * n_f];
        let mut im = vec![0.0; n_p * n_f];
        for f in 0..n_f {
            for p in 0..n_p {
                let (r, i) = value(p, f);
                re[f * n_p + p] = r;
                im[f * n_p + p] = i;
            }
        }
        IqTensor::new(re, im, n_p, 1, n_f).unwrap()
    }

    fn doppler_cfg() -> PipelineConfig {
        PipelineConfig {
            c: 1540.0,
            prf: 5000.0,
            fc: 5e6,
            smoothing_kernel: 3,
            modality: Modality::ColorDoppler,
            ..PipelineConfig::default()
        }
    }

    fn ensemble(dphi: f64, n_f: usize) -> IqTensor {
        field(n_f, |p, f| {
            let amp = 1.0 + 0.1 * p as f64;
            let ph = f as f64 * dphi + 0.3;
            ((amp * ph.cos()) as f32, (amp * ph.sin()) as f32)
        })
    }

    #[test]
    fn bmode_constant_field_is_white() {
        let out = bmode(&field(2, |_, _| (3.0, -4.0)), SHAPE, 60.0).unwrap();
        assert_eq!(out.frames.len(), 2);
        assert!(out
            .frames
            .iter()
            .all(|img| img.pixels.iter().all(|&v| v == 1.0)));
    }

    #[test]
    fn bmode_clips_at_dynamic_range() {
        let iq = field(1, |p, _| match p {
            0 => (1000.0, 0.0),
            1 => (1.0, 0.0),
            _ => (0.0, 0.0),
        });
        let img = &bmode(&iq, SHAPE, 60.0).unwrap().frames[0];
        assert_eq!(img.pixels[0], 1.0);
        // -60 dB plus the 1e-12 floor sits ~1e-10 above the clip level.
        assert!(img.pixels[1].abs() <= 1e-6);
        assert!(img.pixels[2..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bmode_scale_invariant_bitwise() {
        // Power-of-two magnitudes keep 7.3 * x exact in f32.
        let iq = field(3, |p, f| {
            let e = (p + 2 * f) % 9;
            let v = 2f32.powi(e as i32 - 4);
            if p % 2 == 0 {
                (v, 0.0)
            } else {
                (-v, v)
            }
        });
        let a = bmode(&iq, SHAPE, 60.0).unwrap();
        let b = bmode(&iq.scaled(7.3), SHAPE, 60.0).unwrap();
        for (fa, fb) in a.frames.iter().zip(&b.frames) {
            for (x, y) in fa.pixels.iter().zip(&fb.pixels) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn bmode_zero_frame_and_errors() {
        let out = bmode(&field(1, |_, _| (0.0, 0.0)), SHAPE, 60.0).unwrap();
        assert!(out.frames[0].pixels.iter().all(|&v| v == 0.0));
        assert!(bmode(&field(1, |_, _| (1.0, 0.0)), SHAPE, 0.0).is_err());
        let wrong = ImageShape { nz: 5, nx: 5 };
        assert!(bmode(&field(1, |_, _| (1.0, 0.0)), wrong, 60.0).is_err());
    }

    #[test]
    fn doppler_recovers_quarter_cycle_shift() {
        let cfg = doppler_cfg();
        let out = color_doppler(&ensemble(PI / 2.0, 8), SHAPE, &cfg).unwrap();
        let want = 1540.0 * 5000.0 / (4.0 * PI * 5e6) * (PI / 2.0);
        assert!((want - 0.1925).abs() < 1e-12);
        for &v in &out.image.pixels {
            assert!((v as f64 - want).abs() <= 1e-6 * want);
        }
        assert!((out.v_nyquist - 0.385).abs() < 1e-12);
    }

    #[test]
    fn doppler_static_and_conjugate() {
        let cfg = doppler_cfg();
        let static_out = color_doppler(&ensemble(0.0, 6), SHAPE, &cfg).unwrap();
        assert!(static_out.image.pixels.iter().all(|&v| v == 0.0));

        let iq = ensemble(0.7, 6);
        let fwd = color_doppler(&iq, SHAPE, &cfg).unwrap();
        let back = color_doppler(&iq.conj(), SHAPE, &cfg).unwrap();
        for (a, b) in fwd.image.pixels.iter().zip(&back.image.pixels) {
            assert_eq!(*a, -*b);
        }
        assert!(fwd.image.pixels.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn doppler_needs_two_frames() {
        assert!(matches!(
            color_doppler(&ensemble(0.1, 1), SHAPE, &doppler_cfg()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn power_doppler_examples() {
        let zero = power_doppler(&field(4, |_, _| (0.0, 0.0)), SHAPE).unwrap();
        assert!(zero.image.pixels.iter().all(|&v| v == -120.0));

        let unit = power_doppler(
            &field(32, |p, f| {
                if p == 3 {
                    ((f as f32).cos(), (f as f32).sin())
                } else {
                    (0.0, 0.0)
                }
            }),
            SHAPE,
        )
        .unwrap();
        assert!((unit.image.pixels[3] as f64 - 10.0 * 32f64.log10()).abs() < 1e-5);
        assert!((unit.image.pixels[3] - 15.051).abs() < 1e-3);

        let iq = field(4, |p, f| (0.5 + p as f32 * 0.01, 0.25 * f as f32));
        let base = power_doppler(&iq, SHAPE).unwrap();
        let alpha = 3.0f32;
        let scaled = power_doppler(&iq.scaled(alpha), SHAPE).unwrap();
        for (s, b) in scaled.image.pixels.iter().zip(&base.image.pixels) {
            assert!((s - b - 20.0 * alpha.log10()).abs() < 1e-4);
        }
    }

    #[test]
    fn registry_builds_stages() {
        let cfg = doppler_cfg();
        let registry = ModalityRegistry::with_builtin();
        for m in Modality::ALL {
            let stage = registry.build(m.name(), &cfg, SHAPE).unwrap();
            assert_eq!(stage.modality(), m);
        }
        let stage = registry.build("doppler", &cfg, SHAPE).unwrap();
        assert!(matches!(
            stage.apply(&ensemble(0.2, 4)).unwrap(),
            ModalityOutput::Velocity(_)
        ));
        assert!(registry.build("elastography", &cfg, SHAPE).is_err());
    }

    proptest! {
        #[test]
        fn bmode_in_unit_range(vals in prop::collection::vec((-1e3f32..1e3, -1e3f32..1e3), 30), dr in 1.0f64..120.0) {
            let iq = field(1, |p, _| vals[p]);
            let img = &bmode(&iq, SHAPE, dr).unwrap().frames[0];
            prop_assert!(img.pixels.iter().all(|v| (0.0..=1.0).contains(v)));
        }

        #[test]
        fn bmode_nearly_scale_invariant(vals in prop::collection::vec((-1e3f32..1e3, -1e3f32..1e3), 30), alpha in 0.01f32..100.0) {
            let iq = field(1, |p, _| vals[p]);
            let a = &bmode(&iq, SHAPE, 60.0).unwrap().frames[0];
            let b = &bmode(&iq.scaled(alpha), SHAPE, 60.0).unwrap().frames[0];
            for (x, y) in a.pixels.iter().zip(&b.pixels) {
                prop_assert!((x - y).abs() <= 1e-5);
            }
        }

        #[test]
        fn velocity_bounded(
            vals in prop::collection::vec((-1.0f32..1.0, -1.0f32..1.0), 120),
        ) {
            let cfg = doppler_cfg();
            let iq = field(4, |p, f| vals[f * 30 + p]);
            let out = color_doppler(&iq, SHAPE, &cfg).unwrap();
            prop_assert!(out.image.pixels.iter().all(|v| (v.abs() as f64) <= out.v_nyquist));
        }

        #[test]
        fn power_is_monotone(
            vals in prop::collection::vec((-1.0f32..1.0, -1.0f32..1.0, 1.0f32..2.0), 60),
        ) {
            let x = field(2, |p, f| { let (r, i, _) = vals[f * 30 + p]; (r, i) });
            let y = field(2, |p, f| { let (r, i, g) = vals[f * 30 + p]; (r * g, i * g) });
            let px = power_doppler(&x, SHAPE).unwrap();
            let py = power_doppler(&y, SHAPE).unwrap();
            for (a, b) in px.image.pixels.iter().zip(&py.image.pixels) {
                prop_assert!(a <= b);
            }
        }
    }
}
