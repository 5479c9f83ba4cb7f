//! Filters, table aggregation and plot series over stored records.

use std::collections::BTreeMap;

use ratbench_core::model::DEFAULT_MIN_SAMPLES;
use ratbench_core::{AggregateCell, MeasurementRecord, Metric, PayloadBucket, Scenario, SpeedBucket, Technology};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QueryError {
    #[error("range {0} has lower bound above upper bound")]
    BadRange(&'static str),
    #[error("unknown field {0:?}")]
    UnknownField(String),
}

/// Conjunction of optional field filters; bounds are inclusive.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterExpr {
    pub technology: Option<Technology>,
    pub scenario: Option<Scenario>,
    pub min_payload: Option<u32>,
    pub max_payload: Option<u32>,
    pub min_speed: Option<f64>,
    pub max_speed: Option<f64>,
    /// UTC ms, applied to `timestamp_tx`.
    pub from_ms: Option<i64>,
    pub to_ms: Option<i64>,
    pub delivered: Option<bool>,
}

fn ordered<T: PartialOrd>(lo: Option<T>, hi: Option<T>, name: &'static str) -> Result<(), QueryError> {
    match (lo, hi) {
        (Some(lo), Some(hi)) if lo > hi => Err(QueryError::BadRange(name)),
        _ => Ok(()),
    }
}

impl FilterExpr {
    pub fn technology(tech: Technology) -> Self {
        FilterExpr { technology: Some(tech), ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), QueryError> {
        ordered(self.min_payload, self.max_payload, "payload")?;
        ordered(self.min_speed, self.max_speed, "speed")?;
        ordered(self.from_ms, self.to_ms, "time")
    }

    pub fn matches(&self, r: &MeasurementRecord) -> bool {
        self.technology.is_none_or(|t| r.technology == t)
            && self.scenario.is_none_or(|s| r.scenario == s)
            && self.min_payload.is_none_or(|v| r.payload_bytes >= v)
            && self.max_payload.is_none_or(|v| r.payload_bytes <= v)
            && self.min_speed.is_none_or(|v| r.speed_kmh >= v)
            && self.max_speed.is_none_or(|v| r.speed_kmh <= v)
            && self.from_ms.is_none_or(|v| r.timestamp_tx >= v)
            && self.to_ms.is_none_or(|v| r.timestamp_tx <= v)
            && self.delivered.is_none_or(|v| r.delivered == v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AggregateOptions {
    /// Energy per byte over delivered packets only; the default divides by
    /// the bytes of every sent packet.
    pub delivered_only: bool,
    pub min_samples: u64,
}

impl Default for AggregateOptions {
    fn default() -> Self {
        AggregateOptions { delivered_only: false, min_samples: DEFAULT_MIN_SAMPLES }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    sent: u64,
    received: u64,
    energy: f64,
    bytes: u64,
}

type CellKey = (Technology, PayloadBucket, Scenario);

fn cell(key: CellKey, s: Sums, min_samples: u64) -> AggregateCell {
    let (tech, bucket, scenario) = key;
    let mut c = AggregateCell::from_sums(tech, bucket, scenario, s.sent, s.received, s.energy, s.bytes, min_samples);
    if !bucket.supported_by(tech) {
        c.pdr_pct = Metric::UNSUPPORTED;
        c.eb_uwh_per_byte = Metric::UNSUPPORTED;
    }
    c
}

/// One cell per (technology, bucket, scenario) with data, ordered by that
/// key. Cells a technology's measured coverage does not include are marked
/// `Unsupported`; cells under `min_samples` are `Insufficient`.
pub fn aggregate_table<'a>(
    records: impl IntoIterator<Item = &'a MeasurementRecord>,
    filter: &FilterExpr,
    opts: AggregateOptions,
) -> Vec<AggregateCell> {
    let mut sums: BTreeMap<CellKey, Sums> = BTreeMap::new();
    for r in records.into_iter().filter(|r| filter.matches(r)) {
        let Ok(bucket) = r.bucket() else { continue };
        let s = sums.entry((r.technology, bucket, r.scenario)).or_default();
        s.sent += 1;
        s.received += r.delivered as u64;
        if r.delivered || !opts.delivered_only {
            s.energy += r.energy_uwh;
            s.bytes += r.payload_bytes as u64;
        }
    }
    sums.into_iter().map(|(k, s)| cell(k, s, opts.min_samples)).collect()
}

/// Merges cell lists from disjoint record sets by adding their sums and
/// recomputing the ratios.
pub fn merge_tables(a: &[AggregateCell], b: &[AggregateCell], min_samples: u64) -> Vec<AggregateCell> {
    let mut sums: BTreeMap<CellKey, Sums> = BTreeMap::new();
    for c in a.iter().chain(b) {
        let s = sums.entry((c.technology, c.bucket, c.scenario)).or_default();
        s.sent += c.n_sent;
        s.received += c.n_received;
        s.energy += c.energy_uwh_sum;
        s.bytes += c.bytes_sum;
    }
    sums.into_iter().map(|(k, s)| cell(k, s, min_samples)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedPoint {
    pub speed_bucket: SpeedBucket,
    pub pdr_pct: f64,
    pub n_sent: u64,
    pub n_received: u64,
}

/// Delivery ratio per speed bucket for 1-12 byte packets of `tech`, static
/// first. Buckets without records are omitted.
pub fn speed_series<'a>(
    records: impl IntoIterator<Item = &'a MeasurementRecord>,
    tech: Technology,
    filter: &FilterExpr,
) -> Vec<SpeedPoint> {
    let mut counts: BTreeMap<SpeedBucket, (u64, u64)> = BTreeMap::new();
    for r in records {
        if r.technology != tech || r.bucket() != Ok(PayloadBucket::B1_12) || !filter.matches(r) {
            continue;
        }
        let c = counts.entry(r.speed_bucket()).or_default();
        c.0 += 1;
        c.1 += r.delivered as u64;
    }
    counts
        .into_iter()
        .map(|(speed_bucket, (n_sent, n_received))| SpeedPoint {
            speed_bucket,
            pdr_pct: 100.0 * n_received as f64 / n_sent as f64,
            n_sent,
            n_received,
        })
        .collect()
}

/// Numeric record fields accepted by [`export_series`]. Booleans map to 0/1.
pub const SERIES_FIELDS: [&str; 14] = [
    "timestamp_tx",
    "timestamp_rx",
    "latency_ms",
    "payload_bytes",
    "tx_power_dbm",
    "energy_uwh",
    "eb_uwh_per_byte",
    "delivered",
    "rssi_dbm",
    "snr_db",
    "lat",
    "lon",
    "speed_kmh",
    "gateway_count",
];

fn field(r: &MeasurementRecord, name: &str) -> Option<f64> {
    match name {
        "timestamp_tx" => Some(r.timestamp_tx as f64),
        "timestamp_rx" => r.timestamp_rx.map(|t| t as f64),
        "latency_ms" => r.timestamp_rx.map(|t| (t - r.timestamp_tx) as f64),
        "payload_bytes" => Some(r.payload_bytes as f64),
        "tx_power_dbm" => Some(r.tx_power_dbm as f64),
        "energy_uwh" => Some(r.energy_uwh),
        "eb_uwh_per_byte" => Some(r.energy_uwh / r.payload_bytes as f64),
        "delivered" => Some(if r.delivered { 1.0 } else { 0.0 }),
        "rssi_dbm" => r.rssi_dbm,
        "snr_db" => r.snr_db,
        "lat" => r.position.map(|p| p.lat),
        "lon" => r.position.map(|p| p.lon),
        "speed_kmh" => Some(r.speed_kmh),
        "gateway_count" => Some(r.gateway_positions.len() as f64),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub x: f64,
    pub y: f64,
    pub record_id: String,
    pub technology: Technology,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub x_field: String,
    pub y_field: String,
    /// Matching records lacking either field.
    pub skipped: usize,
    pub points: Vec<SeriesPoint>,
}

/// Projects matching records onto two fields, stably sorted by x.
pub fn export_series<'a>(
    records: impl IntoIterator<Item = &'a MeasurementRecord>,
    x_field: &str,
    y_field: &str,
    filter: &FilterExpr,
) -> Result<Series, QueryError> {
    for f in [x_field, y_field] {
        if !SERIES_FIELDS.contains(&f) {
            return Err(QueryError::UnknownField(f.to_string()));
        }
    }
    filter.validate()?;
    let mut skipped = 0;
    let mut points = Vec::new();
    for r in records.into_iter().filter(|r| filter.matches(r)) {
        match (field(r, x_field), field(r, y_field)) {
            (Some(x), Some(y)) => {
                points.push(SeriesPoint { x, y, record_id: r.record_id.clone(), technology: r.technology })
            }
            _ => skipped += 1,
        }
    }
    points.sort_by(|a, b| a.x.total_cmp(&b.x));
    Ok(Series { x_field: x_field.to_string(), y_field: y_field.to_string(), skipped, points })
}
