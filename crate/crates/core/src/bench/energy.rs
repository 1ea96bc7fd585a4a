//! Incremental energy from sampled board power.

use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_INTERVAL: Duration = Duration::from_millis(100);
pub const DEFAULT_IDLE_WINDOW: Duration = Duration::from_secs(2);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSample {
    /// Monotonic timestamp, seconds.
    pub t: f64,
    pub watts: f64,
}

impl PowerSample {
    pub fn new(t: f64, watts: f64) -> Self {
        Self { t, watts }
    }
}

fn validate_trace(trace: &[PowerSample]) -> Result<()> {
    if let Some(s) = trace
        .iter()
        .find(|s| !(s.t.is_finite() && s.watts.is_finite() && s.watts >= 0.0))
    {
        return Err(Error::Power(format!("invalid sample {s:?}")));
    }
    if trace.windows(2).any(|w| w[1].t < w[0].t) {
        return Err(Error::Power("sample timestamps decrease".into()));
    }
    Ok(())
}

/// Energy per run above the idle baseline.
///
/// Incremental power `max(watts - idle, 0)` is integrated with the
/// trapezoidal rule over the trace and divided by `n_runs`.
pub fn energy_per_run(trace: &[PowerSample], idle_watts: f64, n_runs: usize) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::EnergyUnavailable("empty power trace".into()));
    }
    if n_runs == 0 {
        return Err(Error::invalid("n_runs must be at least 1"));
    }
    validate_trace(trace)?;
    let inc = |s: &PowerSample| (s.watts - idle_watts).max(0.0);
    let total: f64 = trace
        .windows(2)
        .map(|w| (w[1].t - w[0].t) * 0.5 * (inc(&w[0]) + inc(&w[1])))
        .sum();
    Ok(total / n_runs as f64)
}

pub fn mean_watts(trace: &[PowerSample]) -> Option<f64> {
    (!trace.is_empty()).then(|| trace.iter().map(|s| s.watts).sum::<f64>() / trace.len() as f64)
}

/// Source of board power readings.
///
/// `start`/`stop` bracket the timed window; sampling happens off the timed
/// thread.
pub trait PowerProvider: Send {
    fn name(&self) -> &str;

    /// Idle baseline in watts, measured before the workload runs.
    fn idle_watts(&mut self) -> Result<f64>;

    fn start(&mut self) -> Result<()>;

    /// Ends the window and returns its samples.
    fn stop(&mut self) -> Result<Vec<PowerSample>>;
}

/// Replays a fixed trace.
///
/// Text form: one `t_seconds watts` pair per line; blank lines and `#`
/// comments are ignored. Samples with negative timestamps form the idle
/// window, the rest form the timed window.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedTrace {
    idle: Vec<PowerSample>,
    window: Vec<PowerSample>,
    idle_override: Option<f64>,
}

impl ScriptedTrace {
    pub fn new(idle: Vec<PowerSample>, window: Vec<PowerSample>) -> Result<Self> {
        validate_trace(&idle)?;
        validate_trace(&window)?;
        Ok(Self {
            idle,
            window,
            idle_override: None,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut samples = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parsed = match fields.as_slice() {
                [t, w] => t.parse::<f64>().ok().zip(w.parse::<f64>().ok()),
                _ => None,
            };
            let (t, watts) = parsed.ok_or_else(|| {
                Error::Power(format!(
                    "line {}: expected `t_seconds watts`, got `{line}`",
                    lineno + 1
                ))
            })?;
            samples.push(PowerSample::new(t, watts));
        }
        validate_trace(&samples)?;
        let split = samples.partition_point(|s| s.t < 0.0);
        let window = samples.split_off(split);
        Self::new(samples, window)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Uses a fixed idle level instead of the trace's idle window.
    pub fn with_idle_watts(mut self, watts: f64) -> Self {
        self.idle_override = Some(watts);
        self
    }

    pub fn window(&self) -> &[PowerSample] {
        &self.window
    }
}

impl PowerProvider for ScriptedTrace {
    fn name(&self) -> &str {
        "scripted-trace"
    }

    fn idle_watts(&mut self) -> Result<f64> {
        self.idle_override
            .or_else(|| mean_watts(&self.idle))
            .ok_or_else(|| {
                Error::Power("trace has no idle window (t < 0) and no idle override".into())
            })
    }

    fn start(&mut self) -> Result<()> {
        Ok(())
    }

    fn stop(&mut self) -> Result<Vec<PowerSample>> {
        Ok(self.window.clone())
    }
}

/// Parses the first token of a telemetry line as watts, ignoring a unit
/// suffix such as `W`.
pub fn parse_watts(line: &str) -> Option<f64> {
    let token = line
        .split(|c: char| c.is_whitespace() || c == ',')
        .find(|t| !t.is_empty())?;
    token
        .trim_end_matches(|c: char| c.is_ascii_alphabetic())
        .parse()
        .ok()
}

struct Sampler {
    stop: Arc<AtomicBool>,
    child: Arc<Mutex<Option<Child>>>,
    handle: JoinHandle<std::result::Result<Vec<PowerSample>, String>>,
}

impl Sampler {
    fn spawn(command: String, interval: Duration) -> Self {
        let stop = Arc::new(AtomicBool::new(false));
        let child: Arc<Mutex<Option<Child>>> = Arc::new(Mutex::new(None));
        let (stop_t, child_t) = (Arc::clone(&stop), Arc::clone(&child));
        let handle = std::thread::spawn(move || {
            let epoch = Instant::now();
            let mut trace = Vec::new();
            // Long-running commands stream lines; one-shot commands are
            // re-run every `interval`.
            while !stop_t.load(Ordering::SeqCst) {
                let mut proc = Command::new("sh")
                    .arg("-c")
                    .arg(&command)
                    .stdin(Stdio::null())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::null())
                    .spawn()
                    .map_err(|e| format!("failed to spawn `{command}`: {e}"))?;
                let stdout = proc.stdout.take().expect("piped stdout");
                *child_t.lock().unwrap() = Some(proc);
                if stop_t.load(Ordering::SeqCst) {
                    break;
                }
                for line in BufReader::new(stdout).lines() {
                    let Ok(line) = line else { break };
                    if let Some(w) = parse_watts(&line) {
                        trace.push(PowerSample::new(epoch.elapsed().as_secs_f64(), w));
                    }
                    if stop_t.load(Ordering::SeqCst) {
                        break;
                    }
                }
                if let Some(mut p) = child_t.lock().unwrap().take() {
                    let _ = p.kill();
                    let _ = p.wait();
                }
                if !stop_t.load(Ordering::SeqCst) {
                    std::thread::sleep(interval);
                }
            }
            if let Some(mut p) = child_t.lock().unwrap().take() {
                let _ = p.kill();
                let _ = p.wait();
            }
            Ok(trace)
        });
        Self {
            stop,
            child,
            handle,
        }
    }

    fn finish(self) -> Result<Vec<PowerSample>> {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(p) = self.child.lock().unwrap().as_mut() {
            let _ = p.kill();
        }
        self.handle
            .join()
            .map_err(|_| Error::Power("sampler thread panicked".into()))?
            .map_err(Error::Power)
    }
}

/// Reads watts from a user-supplied shell command, one number per line.
pub struct CommandPowerProvider {
    command: String,
    interval: Duration,
    idle_window: Duration,
    sampler: Option<Sampler>,
}

impl CommandPowerProvider {
    pub fn new(command: impl Into<String>) -> Self {
        Self {
            command: command.into(),
            interval: DEFAULT_SAMPLE_INTERVAL,
            idle_window: DEFAULT_IDLE_WINDOW,
            sampler: None,
        }
    }

    pub fn with_interval(mut self, interval: Duration) -> Self {
        self.interval = interval;
        self
    }

    pub fn with_idle_window(mut self, window: Duration) -> Self {
        self.idle_window = window;
        self
    }
}

impl PowerProvider for CommandPowerProvider {
    fn name(&self) -> &str {
        "command"
    }

    fn idle_watts(&mut self) -> Result<f64> {
        let sampler = Sampler::spawn(self.command.clone(), self.interval);
        std::thread::sleep(self.idle_window);
        let trace = sampler.finish()?;
        mean_watts(&trace)
            .ok_or_else(|| Error::Power(format!("`{}` produced no readings", self.command)))
    }

    fn start(&mut self) -> Result<()> {
        if self.sampler.is_some() {
            return Err(Error::Power("sampler already running".into()));
        }
        self.sampler = Some(Sampler::spawn(self.command.clone(), self.interval));
        Ok(())
    }

    fn stop(&mut self) -> Result<Vec<PowerSample>> {
        self.sampler
            .take()
            .ok_or_else(|| Error::Power("sampler not running".into()))?
            .finish()
    }
}
