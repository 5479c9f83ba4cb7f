#![allow(dead_code)]

use ratbench_core::{MeasurementRecord, Scenario, TechParams, Technology};

pub fn tech_params(tech: Technology) -> TechParams {
    match tech {
        Technology::LoRaWAN => TechParams::LoRaWAN { sf: 12, adr_enabled: false },
        Technology::Sigfox => TechParams::Sigfox { estimated_region: None },
        Technology::NBIoT => TechParams::NBIoT {
            ce_level: 0,
            rsrp_dbm: Some(-95.0),
            sinr_db: None,
            rsrq_db: None,
            edrx_s: None,
            psm_tau_s: None,
        },
    }
}

pub fn record(id: &str, tech: Technology, payload_bytes: u32, delivered: bool) -> MeasurementRecord {
    MeasurementRecord {
        record_id: id.to_string(),
        technology: tech,
        scenario: Scenario::STATIC_INDOOR,
        timestamp_tx: 1_700_000_000_000,
        timestamp_rx: delivered.then_some(1_700_000_002_000),
        payload_bytes,
        tx_power_dbm: 14,
        energy_uwh: 10.0 * payload_bytes as f64,
        delivered,
        rssi_dbm: None,
        snr_db: None,
        position: None,
        speed_kmh: 0.0,
        gateway_positions: Vec::new(),
        tech_params: tech_params(tech),
    }
}

pub fn line(r: &MeasurementRecord) -> String {
    serde_json::to_string(r).unwrap()
}
