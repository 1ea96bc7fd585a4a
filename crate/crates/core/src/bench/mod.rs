//! Steady-state benchmark runner and metrics.

mod energy;
mod memory;
mod report;

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{Modality, Variant};
use crate::error::{Error, Result};

pub use energy::{
    energy_per_run, mean_watts, parse_watts, CommandPowerProvider, PowerProvider, PowerSample,
    ScriptedTrace, DEFAULT_IDLE_WINDOW, DEFAULT_SAMPLE_INTERVAL,
};
pub use memory::{MemoryTracker, Reservation};
pub use report::{emit_report, ReportFormat, ABSENT, REPORT_COLUMNS};

pub const DEFAULT_WARMUP_ITERS: usize = 10;
pub const DEFAULT_TIMED_ITERS: usize = 100;

/// Frame rate from mean latency.
pub fn fps(t_avg: f64) -> Result<f64> {
    if !(t_avg.is_finite() && t_avg > 0.0) {
        return Err(Error::invalid(format!(
            "t_avg must be positive, got {t_avg}"
        )));
    }
    Ok(1.0 / t_avg)
}

/// Input throughput in MB/s (1 MB = 1e6 bytes).
pub fn throughput_mbps(b_in: f64, t_avg: f64) -> Result<f64> {
    if !(b_in.is_finite() && b_in > 0.0) {
        return Err(Error::invalid(format!("b_in must be positive, got {b_in}")));
    }
    if !(t_avg.is_finite() && t_avg > 0.0) {
        return Err(Error::invalid(format!(
            "t_avg must be positive, got {t_avg}"
        )));
    }
    Ok(b_in / (t_avg * 1e6))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub warmup_iters: usize,
    pub timed_iters: usize,
    pub input_bytes: u64,
    pub modality: Modality,
    pub variant: Variant,
}

impl BenchSpec {
    pub fn new(modality: Modality, variant: Variant, input_bytes: u64) -> Self {
        Self {
            warmup_iters: DEFAULT_WARMUP_ITERS,
            timed_iters: DEFAULT_TIMED_ITERS,
            input_bytes,
            modality,
            variant,
        }
    }

    pub fn with_iters(mut self, warmup: usize, timed: usize) -> Self {
        self.warmup_iters = warmup;
        self.timed_iters = timed;
        self
    }

    pub fn pipeline_id(&self) -> &'static str {
        self.modality.pipeline_id()
    }

    pub fn validate(&self) -> Result<()> {
        if self.timed_iters < 1 {
            return Err(Error::invalid("timed_iters must be at least 1"));
        }
        if self.input_bytes == 0 {
            return Err(Error::invalid("input_bytes must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub modality: Modality,
    pub variant: Variant,
    pub input_bytes: u64,
    pub timed_iters: usize,
    /// Seconds.
    pub t_avg: f64,
    pub fps: f64,
    pub throughput_mbps: f64,
    pub energy_j_per_run: Option<f64>,
    pub peak_mem_bytes: Option<u64>,
}

impl BenchResult {
    /// Derives the rate metrics from a measured mean latency.
    pub fn from_timing(
        spec: &BenchSpec,
        t_avg: f64,
        energy_j_per_run: Option<f64>,
        peak_mem_bytes: Option<u64>,
    ) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            modality: spec.modality,
            variant: spec.variant,
            input_bytes: spec.input_bytes,
            timed_iters: spec.timed_iters,
            t_avg,
            fps: fps(t_avg)?,
            throughput_mbps: throughput_mbps(spec.input_bytes as f64, t_avg)?,
            energy_j_per_run,
            peak_mem_bytes,
        })
    }

    pub fn pipeline_id(&self) -> &'static str {
        self.modality.pipeline_id()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Warmup,
    Timed,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Warmup => "warmup",
            Phase::Timed => "timed",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError<E> {
    #[error("invalid benchmark: {0}")]
    Setup(#[from] Error),
    #[error("pipeline failed at {phase} iteration {iteration}: {source}")]
    Pipeline {
        phase: Phase,
        iteration: usize,
        source: E,
    },
}

/// Optional measurement hooks for [`run_benchmark`].
#[derive(Default)]
pub struct Providers<'a> {
    pub power: Option<&'a mut dyn PowerProvider>,
    pub memory: Option<Arc<MemoryTracker>>,
    /// Called after every timed pass before the clock stops. Device
    /// back-ends block here until queued work completes.
    pub sync: Option<&'a dyn Fn()>,
}

#[derive(Debug)]
pub struct BenchRun<O> {
    pub result: BenchResult,
    /// Output of the final timed pass.
    pub output: O,
    /// Provider failures that left a metric absent.
    pub warnings: Vec<String>,
}

/// Warmup passes, then `timed_iters` timed passes on the same input.
///
/// The idle power baseline is taken before warmup. The memory tracker's
/// peak is reset after warmup so it reflects steady state. Provider errors
/// leave the corresponding field absent and are reported in `warnings`.
pub fn run_benchmark<I, O, E, F>(
    mut forward: F,
    input: &I,
    spec: &BenchSpec,
    providers: Providers<'_>,
) -> std::result::Result<BenchRun<O>, BenchError<E>>
where
    I: ?Sized,
    F: FnMut(&I) -> std::result::Result<O, E>,
{
    spec.validate()?;
    let Providers {
        mut power,
        memory,
        sync,
    } = providers;
    let mut warnings = Vec::new();

    let idle = match power.as_deref_mut().map(|p| p.idle_watts()) {
        Some(Ok(w)) => Some(w),
        Some(Err(e)) => {
            warnings.push(format!("energy unavailable: idle baseline: {e}"));
            None
        }
        None => None,
    };

    for iteration in 0..spec.warmup_iters {
        forward(input).map_err(|source| BenchError::Pipeline {
            phase: Phase::Warmup,
            iteration,
            source,
        })?;
    }

    if let Some(m) = &memory {
        m.reset_peak();
    }
    let mut sampling = false;
    if let (Some(p), Some(_)) = (power.as_deref_mut(), idle) {
        match p.start() {
            Ok(()) => sampling = true,
            Err(e) => warnings.push(format!("energy unavailable: start sampling: {e}")),
        }
    }

    let mut last = None;
    let started = Instant::now();
    for iteration in 0..spec.timed_iters {
        let out = forward(input);
        if let Some(sync) = sync {
            sync();
        }
        match out {
            Ok(o) => last = Some(o),
            Err(source) => {
                if sampling {
                    let _ = power.as_deref_mut().map(|p| p.stop());
                }
                return Err(BenchError::Pipeline {
                    phase: Phase::Timed,
                    iteration,
                    source,
                });
            }
        }
    }
    let t_avg = started.elapsed().as_secs_f64() / spec.timed_iters as f64;

    let mut energy = None;
    if sampling {
        let measured = power
            .expect("sampling implies a provider")
            .stop()
            .and_then(|trace| energy_per_run(&trace, idle.unwrap_or(0.0), spec.timed_iters));
        match measured {
            Ok(e) => energy = Some(e),
            Err(e) => warnings.push(format!("energy unavailable: {e}")),
        }
    }
    let peak = memory.as_ref().map(|m| m.peak());

    let result = BenchResult::from_timing(spec, t_avg, energy, peak)?;
    Ok(BenchRun {
        result,
        output: last.expect("timed_iters >= 1"),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;
    use std::time::Duration;

    fn spec(warmup: usize, timed: usize) -> BenchSpec {
        BenchSpec::new(Modality::Bmode, Variant::Gather, 1_000_000).with_iters(warmup, timed)
    }

    #[test]
    fn metric_examples() {
        assert_eq!(fps(1.0).unwrap(), 1.0);
        assert_eq!(throughput_mbps(1e6, 1.0).unwrap(), 1.0);
        assert!(fps(0.0).is_err());
        assert!(fps(-1.0).is_err());
        assert!(throughput_mbps(0.0, 1.0).is_err());
        assert!(throughput_mbps(1.0, 0.0).is_err());
    }

    #[test]
    fn result_json_round_trip() {
        let r = BenchResult::from_timing(&spec(0, 100), 0.002, None, Some(1 << 20)).unwrap();
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains("\"energy_j_per_run\":null"));
        assert!(text.contains("\"variant\":\"gather\""));
        assert_eq!(serde_json::from_str::<BenchResult>(&text).unwrap(), r);
    }

    #[test]
    fn spec_validation() {
        assert!(spec(0, 0).validate().is_err());
        let mut s = spec(0, 1);
        s.input_bytes = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn sleeping_mock_timing() {
        let run = run_benchmark(
            |_: &()| {
                std::thread::sleep(Duration::from_millis(5));
                Ok::<_, ()>(())
            },
            &(),
            &spec(5, 20),
            Providers::default(),
        )
        .unwrap();
        let t = run.result.t_avg;
        assert!((0.005..=0.007).contains(&t), "t_avg = {t}");
        assert_eq!(run.result.energy_j_per_run, None);
        assert_eq!(run.result.peak_mem_bytes, None);
    }

    #[test]
    fn warmup_is_excluded() {
        let calls = Cell::new(0);
        let run = run_benchmark(
            |_: &()| {
                let ms = if calls.get() == 0 { 100 } else { 1 };
                calls.set(calls.get() + 1);
                std::thread::sleep(Duration::from_millis(ms));
                Ok::<_, ()>(calls.get())
            },
            &(),
            &spec(1, 10),
            Providers::default(),
        )
        .unwrap();
        assert!(run.result.t_avg < 0.005);
        assert_eq!(run.output, 11);
    }

    #[test]
    fn failure_reports_iteration() {
        let calls = Cell::new(0);
        let err = run_benchmark(
            |_: &()| {
                calls.set(calls.get() + 1);
                if calls.get() == 5 {
                    Err("boom")
                } else {
                    Ok(())
                }
            },
            &(),
            &spec(2, 10),
            Providers::default(),
        )
        .unwrap_err();
        match err {
            BenchError::Pipeline {
                phase,
                iteration,
                source,
            } => {
                assert_eq!((phase, iteration, source), (Phase::Timed, 2, "boom"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sync_hook_runs_each_timed_pass() {
        let syncs = Cell::new(0);
        let sync = || syncs.set(syncs.get() + 1);
        run_benchmark(
            |_: &()| Ok::<_, ()>(()),
            &(),
            &spec(3, 7),
            Providers {
                sync: Some(&sync),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(syncs.get(), 7);
    }

    #[test]
    fn memory_peak_excludes_warmup() {
        let tracker = Arc::new(MemoryTracker::new());
        let calls = Cell::new(0);
        let run = run_benchmark(
            |_: &()| {
                let bytes = if calls.get() == 0 { 1 << 20 } else { 1 << 10 };
                calls.set(calls.get() + 1);
                let _r = tracker.reserve(bytes);
                Ok::<_, ()>(())
            },
            &(),
            &spec(1, 3),
            Providers {
                memory: Some(Arc::clone(&tracker)),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(run.result.peak_mem_bytes, Some(1 << 10));
    }

    #[test]
    fn scripted_energy_and_degradation() {
        let mut trace = ScriptedTrace::parse("-1 20\n0 100\n10 100").unwrap();
        let run = run_benchmark(
            |_: &()| Ok::<_, ()>(()),
            &(),
            &spec(0, 100),
            Providers {
                power: Some(&mut trace),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(run.result.energy_j_per_run, Some(8.0));

        let mut no_idle = ScriptedTrace::parse("0 100\n10 100").unwrap();
        let run = run_benchmark(
            |_: &()| Ok::<_, ()>(()),
            &(),
            &spec(0, 1),
            Providers {
                power: Some(&mut no_idle),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(run.result.energy_j_per_run, None);
        assert_eq!(run.warnings.len(), 1);
    }
}
