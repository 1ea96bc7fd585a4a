use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, Context};
use usbench_core::bench::{
    emit_report, run_benchmark, BenchResult, BenchSpec, CommandPowerProvider, MemoryTracker,
    PowerProvider, PowerSample, Providers, ScriptedTrace,
};
use usbench_core::modalities::{write_pgm, write_raw_f32};
use usbench_core::rf_io::{load_rf, quantize_int16, save_rf, synth_rf, Dtype, RfFileHeader};
use usbench_core::{Error, Modality, Pipeline, PipelineConfig, RfTensor, Variant};

use crate::config::RunConfig;
use crate::{BenchArgs, ReportArgs, RunArgs, Source, SynthArgs};

#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
    Pipeline(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
            Failure::Pipeline(_) => 4,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Data(e) | Failure::Pipeline(e) => e,
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

trait Classify<T> {
    fn data(self) -> Outcome<T>;
    fn pipeline(self) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn data(self) -> Outcome<T> {
        self.map_err(|e| Failure::Data(e.into()))
    }

    fn pipeline(self) -> Outcome<T> {
        self.map_err(|e| Failure::Pipeline(e.into()))
    }
}

/// Unknown strategy names are usage errors; everything else at build time
/// is a pipeline error.
fn build_failure(e: Error) -> Failure {
    match e {
        Error::UnknownStrategy { .. } => Failure::Usage(e.into()),
        other => Failure::Pipeline(anyhow!(other).context("building pipeline")),
    }
}

fn load_config(path: Option<&Path>) -> Outcome<RunConfig> {
    let cfg = RunConfig::load(path).data()?;
    cfg.validate().context("invalid configuration").data()?;
    Ok(cfg)
}

struct Dataset {
    rf: RfTensor,
    header: RfFileHeader,
}

fn synthesize(cfg: &RunConfig) -> Outcome<Dataset> {
    let pc = cfg.pipeline();
    let geom = cfg.geometry(pc.c).data()?;
    let mut rf = synth_rf(&cfg.scatterers, &geom, &pc, cfg.acquisition.n_l)
        .context("synthesizing RF")
        .data()?;
    let dtype = Dtype::from(cfg.storage.dtype);
    if dtype == Dtype::Int16 {
        rf = quantize_int16(&rf, cfg.storage.int16_scale).data()?;
    }
    let header = RfFileHeader::for_tensor(&rf, dtype, &pc);
    Ok(Dataset { rf, header })
}

/// Exactly one input source: a file or the configuration's scatterers.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSource {
    File(PathBuf),
    Synth,
}

/// Everything that determines a run besides measured timings.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub config: RunConfig,
    pub input: InputSource,
}

impl RunManifest {
    fn new(config: Option<&Path>, source: &Source) -> Outcome<Self> {
        let input = match (&source.input, source.synth) {
            (Some(path), false) => InputSource::File(path.clone()),
            (None, true) => InputSource::Synth,
            _ => {
                return Err(Failure::Usage(anyhow!(
                    "give exactly one of --input or --synth"
                )))
            }
        };
        Ok(Self {
            config: load_config(config)?,
            input,
        })
    }

    fn dataset(&self) -> Outcome<Dataset> {
        match &self.input {
            InputSource::File(path) => {
                let (rf, header) = load_rf(path)
                    .with_context(|| format!("loading {}", path.display()))
                    .data()?;
                Ok(Dataset { rf, header })
            }
            InputSource::Synth => synthesize(&self.config),
        }
    }

    /// Pipeline configuration with the acquisition physics taken from the data.
    fn pipeline_config(&self, data: &Dataset) -> Outcome<PipelineConfig> {
        let mut pc = self.config.pipeline();
        data.header.apply_to(&mut pc);
        let n_elements = self.config.probe.n_elements;
        if data.header.n_c as usize != n_elements {
            return Err(Failure::Data(anyhow!(
                "input has {} channels but the probe has {n_elements} elements",
                data.header.n_c
            )));
        }
        Ok(pc)
    }

    fn build(
        &self,
        data: &Dataset,
        pc: &PipelineConfig,
        variant: &str,
        modality: &str,
        tracker: Option<Arc<MemoryTracker>>,
    ) -> Outcome<Pipeline> {
        let geom = self.config.geometry(pc.c).data()?;
        let grid = self.config.image_grid().data()?;
        let mut builder = Pipeline::builder(pc, &geom, &grid, data.header.n_l as usize)
            .variant_name(variant)
            .modality_name(modality);
        if let Some(t) = tracker {
            builder = builder.memory(t);
        }
        builder.build().map_err(build_failure)
    }
}

pub fn synth(args: SynthArgs) -> Outcome {
    let cfg = load_config(args.config.as_deref())?;
    let data = synthesize(&cfg)?;
    save_rf(&args.out, &data.rf, &data.header)
        .with_context(|| format!("writing {}", args.out.display()))
        .data()?;
    let h = &data.header;
    println!(
        "wrote {}: {} x {} x {} {:?} samples, payload {} bytes",
        args.out.display(),
        h.n_l,
        h.n_c,
        h.n_f,
        h.dtype,
        h.payload_len()
    );
    Ok(())
}

fn with_extension(prefix: &Path, ext: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_owned();
    name.push(".");
    name.push(ext);
    PathBuf::from(name)
}

pub fn run(args: RunArgs) -> Outcome {
    let manifest = RunManifest::new(args.config.as_deref(), &args.source)?;
    let data = manifest.dataset()?;
    let pc = manifest.pipeline_config(&data)?;
    let variant = args
        .variant
        .unwrap_or_else(|| pc.variant.name().to_string());
    let modality = args
        .modality
        .unwrap_or_else(|| pc.modality.name().to_string());
    let pipeline = manifest.build(&data, &pc, &variant, &modality, None)?;
    let out = pipeline
        .forward(&data.rf)
        .context("forward pass")
        .pipeline()?;

    let pgm = with_extension(&args.out, "pgm");
    let raw = with_extension(&args.out, "f32");
    write_pgm(&pgm, &out.images(), out.display_range())
        .with_context(|| format!("writing {}", pgm.display()))
        .data()?;
    write_raw_f32(&raw, &out.raw())
        .with_context(|| format!("writing {}", raw.display()))
        .data()?;
    println!(
        "{} / {}: {} image(s) of {} x {} written to {} and {}",
        pipeline.stage().modality().pipeline_id(),
        pipeline.beamformer().variant().label(),
        out.images().len(),
        pipeline.grid().nz,
        pipeline.grid().nx,
        pgm.display(),
        raw.display()
    );
    Ok(())
}

fn expand<T: Copy>(
    arg: Option<&str>,
    default: T,
    all: &[T],
    name: fn(T) -> &'static str,
) -> Vec<String> {
    match arg {
        None => vec![name(default).to_string()],
        Some("all") => all.iter().map(|&v| name(v).to_string()).collect(),
        Some(list) => list
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect(),
    }
}

/// Reports a fixed idle level in place of the wrapped provider's measurement.
struct FixedIdle<P> {
    inner: P,
    watts: f64,
}

impl<P: PowerProvider> PowerProvider for FixedIdle<P> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn idle_watts(&mut self) -> usbench_core::Result<f64> {
        Ok(self.watts)
    }

    fn start(&mut self) -> usbench_core::Result<()> {
        self.inner.start()
    }

    fn stop(&mut self) -> usbench_core::Result<Vec<PowerSample>> {
        self.inner.stop()
    }
}

fn power_provider(args: &BenchArgs) -> Result<Option<Box<dyn PowerProvider>>, String> {
    if args.no_energy {
        return Ok(None);
    }
    if let Some(path) = &args.power_trace {
        let mut trace =
            ScriptedTrace::from_file(path).map_err(|e| format!("{}: {e}", path.display()))?;
        if let Some(w) = args.idle_watts {
            trace = trace.with_idle_watts(w);
        }
        return Ok(Some(Box::new(trace)));
    }
    if let Some(cmd) = &args.power_cmd {
        if !(args.idle_secs >= 0.0 && args.idle_secs.is_finite()) {
            return Err(format!("invalid idle window {} s", args.idle_secs));
        }
        let provider = CommandPowerProvider::new(cmd.clone())
            .with_idle_window(Duration::from_secs_f64(args.idle_secs));
        return Ok(Some(match args.idle_watts {
            Some(watts) => Box::new(FixedIdle {
                inner: provider,
                watts,
            }),
            None => Box::new(provider),
        }));
    }
    Ok(None)
}

pub fn bench(args: BenchArgs) -> Outcome {
    let manifest = RunManifest::new(args.config.as_deref(), &args.source)?;
    let data = manifest.dataset()?;
    let pc = manifest.pipeline_config(&data)?;
    let variants = expand(
        args.variant.as_deref(),
        pc.variant,
        &Variant::ALL,
        Variant::name,
    );
    let modalities = expand(
        args.modality.as_deref(),
        pc.modality,
        &Modality::ALL,
        Modality::name,
    );
    let warmup = args.warmup.unwrap_or(manifest.config.bench.warmup_iters);
    let iters = args.iters.unwrap_or(manifest.config.bench.timed_iters);
    if iters == 0 {
        return Err(Failure::Usage(anyhow!("--iters must be at least 1")));
    }
    let input_bytes = data.header.payload_len() as u64;

    let mut results = Vec::new();
    for modality in &modalities {
        for variant in &variants {
            let tracker = Arc::new(MemoryTracker::new());
            let pipeline =
                manifest.build(&data, &pc, variant, modality, Some(Arc::clone(&tracker)))?;
            let spec = BenchSpec::new(
                pipeline.stage().modality(),
                pipeline.beamformer().variant(),
                input_bytes,
            )
            .with_iters(warmup, iters);
            let mut power = match power_provider(&args) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("warning: energy unavailable: {e}");
                    None
                }
            };
            let providers = Providers {
                power: power.as_mut().map(|p| p.as_mut() as &mut dyn PowerProvider),
                memory: Some(Arc::clone(&tracker)),
                sync: None,
            };
            let run = run_benchmark(|rf| pipeline.forward(rf), &data.rf, &spec, providers)
                .with_context(|| {
                    format!(
                        "benchmarking {} / {}",
                        spec.pipeline_id(),
                        spec.variant.label()
                    )
                })
                .pipeline()?;
            for w in &run.warnings {
                eprintln!(
                    "warning: {} / {}: {w}",
                    spec.pipeline_id(),
                    spec.variant.label()
                );
            }
            results.push(run.result);
        }
    }

    if let Some(path) = &args.save {
        let json = serde_json::to_string_pretty(&results).expect("results serialize");
        fs::write(path, json)
            .with_context(|| format!("writing {}", path.display()))
            .data()?;
    }
    print!("{}", emit_report(&results, args.format.into()));
    Ok(())
}

pub fn report(args: ReportArgs) -> Outcome {
    let mut results: Vec<BenchResult> = Vec::new();
    for path in &args.results {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))
            .data()?;
        let batch: Vec<BenchResult> = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", path.display()))
            .data()?;
        results.extend(batch);
    }
    if results.is_empty() {
        return Err(Failure::Data(anyhow!("no results to report")));
    }
    print!("{}", emit_report(&results, args.format.into()));
    Ok(())
}
