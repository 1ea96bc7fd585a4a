//! Table-style benchmark reports.

use std::cmp::Ordering;

use super::BenchResult;

pub const ABSENT: &str = "—";

pub const REPORT_COLUMNS: [&str; 7] = [
    "Pipeline",
    "Variant",
    "T_avg (ms)",
    "FPS",
    "MB/s",
    "J/run",
    "Peak Mem (GB)",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

fn ordering(a: &BenchResult, b: &BenchResult) -> Ordering {
    let opt = |x: Option<f64>| x.unwrap_or(f64::NEG_INFINITY);
    a.modality
        .cmp(&b.modality)
        .then(a.variant.cmp(&b.variant))
        .then(a.t_avg.total_cmp(&b.t_avg))
        .then(opt(a.energy_j_per_run).total_cmp(&opt(b.energy_j_per_run)))
        .then(a.peak_mem_bytes.cmp(&b.peak_mem_bytes))
        .then(a.input_bytes.cmp(&b.input_bytes))
}

fn row(r: &BenchResult) -> [String; 7] {
    [
        r.pipeline_id().to_string(),
        r.variant.label().to_string(),
        format!("{:.3}", r.t_avg * 1e3),
        format!("{:.2}", r.fps),
        format!("{:.2}", r.throughput_mbps),
        r.energy_j_per_run
            .map_or(ABSENT.to_string(), |e| format!("{e:.3}")),
        r.peak_mem_bytes
            .map_or(ABSENT.to_string(), |b| format!("{:.3}", b as f64 / 1e9)),
    ]
}

/// Renders results sorted by pipeline, then variant.
pub fn emit_report(results: &[BenchResult], format: ReportFormat) -> String {
    let mut sorted: Vec<&BenchResult> = results.iter().collect();
    sorted.sort_by(|a, b| ordering(a, b));
    let rows: Vec<[String; 7]> = sorted.into_iter().map(row).collect();
    match format {
        ReportFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::CRLF)
                .from_writer(Vec::new());
            w.write_record(REPORT_COLUMNS).expect("in-memory write");
            for r in &rows {
                w.write_record(r).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
        }
        ReportFormat::Markdown => {
            let mut out = format!("| {} |\n", REPORT_COLUMNS.join(" | "));
            out.push_str(&format!("|{}\n", ["---|"; 7].concat()));
            for r in &rows {
                out.push_str(&format!("| {} |\n", r.join(" | ")));
            }
            out
        }
    }
}
