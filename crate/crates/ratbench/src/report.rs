//! Rendering of aggregate tables.

use std::fmt::Write as _;

use ratbench_core::{AggregateCell, Metric, PayloadBucket, Scenario, Sentinel, Technology};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    Csv,
    #[default]
    Json,
    Md,
}

/// Table column order: scenario, then technology.
const COLUMNS: [(Scenario, Technology); 9] = [
    (Scenario::STATIC_INDOOR, Technology::NBIoT),
    (Scenario::STATIC_INDOOR, Technology::LoRaWAN),
    (Scenario::STATIC_INDOOR, Technology::Sigfox),
    (Scenario::STATIC_OUTDOOR, Technology::NBIoT),
    (Scenario::STATIC_OUTDOOR, Technology::LoRaWAN),
    (Scenario::STATIC_OUTDOOR, Technology::Sigfox),
    (Scenario::MOBILE_OUTDOOR, Technology::NBIoT),
    (Scenario::MOBILE_OUTDOOR, Technology::LoRaWAN),
    (Scenario::MOBILE_OUTDOOR, Technology::Sigfox),
];

pub fn render(cells: &[AggregateCell], format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(cells).expect("cells serialize") + "\n",
        Format::Csv => csv_table(cells),
        Format::Md => markdown(cells),
    }
}

fn metric_str(m: Metric) -> String {
    match m {
        Metric::Value(v) => format!("{v}"),
        Metric::Sentinel(Sentinel::Unsupported) => "UNSUPPORTED".into(),
        Metric::Sentinel(Sentinel::Insufficient) => "INSUFFICIENT".into(),
    }
}

#[derive(Serialize)]
struct CsvCell {
    technology: Technology,
    bucket: &'static str,
    scenario: String,
    pdr_pct: String,
    eb_uwh_per_byte: String,
    n_sent: u64,
    n_received: u64,
    energy_uwh_sum: f64,
    bytes_sum: u64,
}

fn csv_table(cells: &[AggregateCell]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for c in cells {
        w.serialize(CsvCell {
            technology: c.technology,
            bucket: c.bucket.label(),
            scenario: c.scenario.to_string(),
            pdr_pct: metric_str(c.pdr_pct),
            eb_uwh_per_byte: metric_str(c.eb_uwh_per_byte),
            n_sent: c.n_sent,
            n_received: c.n_received,
            energy_uwh_sum: c.energy_uwh_sum,
            bytes_sum: c.bytes_sum,
        })
        .expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

fn md_value(cells: &[AggregateCell], tech: Technology, bucket: PayloadBucket, scenario: Scenario, pdr: bool) -> String {
    if !bucket.supported_by(tech) {
        return "-".into();
    }
    let found = cells.iter().find(|c| c.technology == tech && c.bucket == bucket && c.scenario == scenario);
    match found.map(|c| if pdr { c.pdr_pct } else { c.eb_uwh_per_byte }) {
        Some(Metric::Value(v)) => format!("{v:.2}"),
        Some(Metric::Sentinel(Sentinel::Unsupported)) => "-".into(),
        _ => "/".into(),
    }
}

/// Payload buckets as rows, one column per (scenario, technology); `-`
/// marks payloads a technology cannot carry and `/` cells without enough
/// samples.
fn markdown(cells: &[AggregateCell]) -> String {
    let mut out = String::new();
    for (title, pdr) in [("PDR (%)", true), ("E_b (µWh/B)", false)] {
        let _ = writeln!(out, "### {title}\n");
        out.push_str("| Payload (B) |");
        for (s, t) in COLUMNS {
            let _ = write!(out, " {s} {t} |");
        }
        out.push_str("\n|---|");
        out.push_str(&"---:|".repeat(COLUMNS.len()));
        out.push('\n');
        for bucket in PayloadBucket::ALL {
            let _ = write!(out, "| {} |", bucket.label());
            for (s, t) in COLUMNS {
                let _ = write!(out, " {} |", md_value(cells, t, bucket, s, pdr));
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}
