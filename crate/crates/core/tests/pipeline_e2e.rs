use usbench_core::modalities::ModalityOutput;
use usbench_core::rf_io::{
    decode_rf, encode_rf, quantize_int16, synth_rf, Dtype, RfFileHeader, Scatterer,
};
use usbench_core::{
    Apodization, ImageGrid, Modality, Pipeline, PipelineConfig, ProbeGeometry, Variant,
};

fn setup(modality: Modality, n_f: usize) -> (PipelineConfig, ProbeGeometry, ImageGrid) {
    let cfg = PipelineConfig {
        n_f,
        modality,
        ..Default::default()
    };
    let geom = ProbeGeometry::new(32, 0.3e-3, cfg.c).unwrap();
    let grid = ImageGrid::new(-3e-3, 3e-3, 12e-3, 18e-3, 25, 25).unwrap();
    (cfg, geom, grid)
}

const N_L: usize = 640;

#[test]
fn psf_peak_with_hann_apodization() {
    let (mut cfg, geom, grid) = setup(Modality::Bmode, 1);
    cfg.apodization = Apodization::Hann;
    let (x0, z0) = (grid.x(15), grid.z(9));
    let rf = synth_rf(&[Scatterer::new(x0, z0, 1.0)], &geom, &cfg, N_L).unwrap();
    let p = Pipeline::new(&cfg, &geom, &grid, N_L).unwrap();
    let ModalityOutput::Bmode(img) = p.forward(&rf).unwrap() else {
        panic!("expected B-mode")
    };
    let (ix, iz) = img.frames[0].argmax();
    assert!(
        ix.abs_diff(15) <= 1 && iz.abs_diff(9) <= 1,
        "peak at ({ix}, {iz})"
    );
}

#[test]
fn receding_scatterer_has_negative_velocity() {
    let (cfg, geom, grid) = setup(Modality::ColorDoppler, 8);
    let v_true = 0.1;
    let (x0, z0) = (grid.x(12), grid.z(12));
    let rf = synth_rf(
        &[Scatterer::new(x0, z0, 1.0).moving(v_true)],
        &geom,
        &cfg,
        N_L,
    )
    .unwrap();
    let p = Pipeline::new(&cfg, &geom, &grid, N_L).unwrap();
    let ModalityOutput::Velocity(v) = p.forward(&rf).unwrap() else {
        panic!("expected velocity")
    };
    let at = v.image.get(12, 12) as f64;
    assert!((at + v_true).abs() < 0.05 * v_true, "estimated {at}");

    let rf = synth_rf(
        &[Scatterer::new(x0, z0, 1.0).moving(-v_true)],
        &geom,
        &cfg,
        N_L,
    )
    .unwrap();
    let ModalityOutput::Velocity(v) = p.forward(&rf).unwrap() else {
        panic!("expected velocity")
    };
    assert!((v.image.get(12, 12) as f64 - v_true).abs() < 0.05 * v_true);
}

#[test]
fn static_scatterer_has_zero_velocity() {
    let (cfg, geom, grid) = setup(Modality::ColorDoppler, 4);
    let rf = synth_rf(&[Scatterer::new(0.0, 15e-3, 1.0)], &geom, &cfg, N_L).unwrap();
    let p = Pipeline::new(&cfg, &geom, &grid, N_L).unwrap();
    let ModalityOutput::Velocity(v) = p.forward(&rf).unwrap() else {
        panic!("expected velocity")
    };
    let limit = 1e-6 * cfg.nyquist_velocity();
    assert!(v.image.pixels.iter().all(|&x| (x as f64).abs() < limit));
}

#[test]
fn power_doppler_peaks_at_scatterer() {
    let (cfg, geom, grid) = setup(Modality::PowerDoppler, 4);
    let (x0, z0) = (grid.x(6), grid.z(18));
    let rf = synth_rf(&[Scatterer::new(x0, z0, 1.0)], &geom, &cfg, N_L).unwrap();
    for variant in Variant::ALL {
        let cfg = PipelineConfig {
            variant,
            ..cfg.clone()
        };
        let p = Pipeline::new(&cfg, &geom, &grid, N_L).unwrap();
        let ModalityOutput::Power(img) = p.forward(&rf).unwrap() else {
            panic!("expected power")
        };
        let (ix, iz) = img.image.argmax();
        assert!(
            ix.abs_diff(6) <= 1 && iz.abs_diff(18) <= 1,
            "{variant}: peak at ({ix}, {iz})"
        );
    }
}

#[test]
fn int16_file_round_trip_feeds_pipeline() {
    let (cfg, geom, grid) = setup(Modality::Bmode, 2);
    let rf = synth_rf(&[Scatterer::new(0.0, 15e-3, 1.0)], &geom, &cfg, N_L).unwrap();
    let q = quantize_int16(&rf, 8000.0).unwrap();
    let header = RfFileHeader::for_tensor(&q, Dtype::Int16, &cfg);
    let bytes = encode_rf(&q, &header).unwrap();
    let (loaded, hdr) = decode_rf(&bytes).unwrap();
    assert_eq!(loaded, q);
    let mut cfg2 = PipelineConfig::default();
    hdr.apply_to(&mut cfg2);
    assert_eq!(cfg2.n_f, 2);
    let p = Pipeline::new(&cfg2, &geom, &grid, N_L).unwrap();
    let ModalityOutput::Bmode(img) = p.forward(&loaded).unwrap() else {
        panic!("expected B-mode")
    };
    let (ix, iz) = img.frames[1].argmax();
    let (ex, ez) = grid.nearest(0.0, 15e-3);
    assert!(ix.abs_diff(ex) <= 1 && iz.abs_diff(ez) <= 1);
}
