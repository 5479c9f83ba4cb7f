//! JSON Lines and CSV encodings of measurement records.

use std::io::{BufRead, Write};

use ratbench_core::{MeasurementRecord, TechParams};
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ReadError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn parse_record(line: &str) -> Result<MeasurementRecord, serde_json::Error> {
    serde_json::from_str(line)
}

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(r: impl BufRead) -> Result<Vec<T>, ReadError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| ReadError::Parse { line: i + 1, source })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(mut w: impl Write, items: &[T]) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Flat row for spreadsheets; technology-specific columns stay empty when
/// they do not apply.
#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    record_id: &'a str,
    technology: &'static str,
    scenario: String,
    timestamp_tx: i64,
    timestamp_rx: Option<i64>,
    payload_bytes: u32,
    tx_power_dbm: i32,
    energy_uwh: f64,
    delivered: bool,
    rssi_dbm: Option<f64>,
    snr_db: Option<f64>,
    lat: Option<f64>,
    lon: Option<f64>,
    speed_kmh: f64,
    gateway_count: usize,
    sf: Option<u8>,
    adr_enabled: Option<bool>,
    estimated_region: Option<&'a str>,
    ce_level: Option<u8>,
    rsrp_dbm: Option<f64>,
    sinr_db: Option<f64>,
    rsrq_db: Option<f64>,
    edrx_s: Option<f64>,
    psm_tau_s: Option<f64>,
}

impl<'a> From<&'a MeasurementRecord> for CsvRow<'a> {
    fn from(r: &'a MeasurementRecord) -> Self {
        let mut row = CsvRow {
            record_id: &r.record_id,
            technology: r.technology.as_str(),
            scenario: r.scenario.to_string(),
            timestamp_tx: r.timestamp_tx,
            timestamp_rx: r.timestamp_rx,
            payload_bytes: r.payload_bytes,
            tx_power_dbm: r.tx_power_dbm,
            energy_uwh: r.energy_uwh,
            delivered: r.delivered,
            rssi_dbm: r.rssi_dbm,
            snr_db: r.snr_db,
            lat: r.position.map(|p| p.lat),
            lon: r.position.map(|p| p.lon),
            speed_kmh: r.speed_kmh,
            gateway_count: r.gateway_positions.len(),
            sf: None,
            adr_enabled: None,
            estimated_region: None,
            ce_level: None,
            rsrp_dbm: None,
            sinr_db: None,
            rsrq_db: None,
            edrx_s: None,
            psm_tau_s: None,
        };
        match &r.tech_params {
            TechParams::LoRaWAN { sf, adr_enabled } => {
                row.sf = Some(*sf);
                row.adr_enabled = Some(*adr_enabled);
            }
            TechParams::Sigfox { estimated_region } => row.estimated_region = estimated_region.as_deref(),
            TechParams::NBIoT { ce_level, rsrp_dbm, sinr_db, rsrq_db, edrx_s, psm_tau_s } => {
                row.ce_level = Some(*ce_level);
                row.rsrp_dbm = *rsrp_dbm;
                row.sinr_db = *sinr_db;
                row.rsrq_db = *rsrq_db;
                row.edrx_s = *edrx_s;
                row.psm_tau_s = *psm_tau_s;
            }
        }
        row
    }
}

pub fn write_records_csv(w: impl Write, records: &[MeasurementRecord]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(CsvRow::from(r))?;
    }
    out.flush()?;
    Ok(())
}
