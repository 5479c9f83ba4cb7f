//! Per-packet on-air time and radio phase timelines.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::Technology;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AirtimeError {
    #[error("{0} payload of {1} bytes exceeds the technology maximum")]
    PayloadExceedsMax(Technology, u32),
    #[error("payload must be at least 1 byte")]
    ZeroPayload,
    #[error("low data rate optimization is required at SF{sf} / {bandwidth_hz} Hz")]
    LdroRequired { sf: u8, bandwidth_hz: u32 },
    #[error("CE level {0} outside {{0, 1, 2}}")]
    BadCeLevel(u8),
    #[error("invalid radio parameters: {0}")]
    InvalidParams(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadioState {
    Tx,
    Rx,
    Idle,
    Sleep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub name: String,
    pub duration_ms: f64,
    pub state: RadioState,
}

/// Ordered radio phases of one transaction.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AirtimeProfile {
    pub phases: Vec<Phase>,
    pub total_on_air_ms: f64,
}

impl AirtimeProfile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: &str, duration_ms: f64, state: RadioState) {
        let duration_ms = duration_ms.max(0.0);
        if state == RadioState::Tx {
            self.total_on_air_ms += duration_ms;
        }
        self.phases.push(Phase { name: name.into(), duration_ms, state });
    }

    pub fn with(mut self, name: &str, duration_ms: f64, state: RadioState) -> Self {
        self.push(name, duration_ms, state);
        self
    }

    /// Wall-clock span of the whole transaction.
    pub fn total_duration_ms(&self) -> f64 {
        self.phases.iter().map(|p| p.duration_ms).sum()
    }

    pub fn tx_phases(&self) -> impl Iterator<Item = &Phase> {
        self.phases.iter().filter(|p| p.state == RadioState::Tx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoRaParams {
    pub sf: u8,
    pub bandwidth_hz: u32,
    /// Coding rate 4/(4+cr).
    pub coding_rate_index: u8,
    pub preamble_symbols: u16,
    pub explicit_header: bool,
    pub crc_on: bool,
    pub low_data_rate_optimize: bool,
}

impl LoRaParams {
    /// LoRaWAN uplink defaults at 125 kHz: CR 4/5, 8 preamble symbols,
    /// explicit header, CRC on, LDRO enabled where mandatory.
    pub fn lorawan(sf: u8) -> Self {
        LoRaParams {
            sf,
            bandwidth_hz: 125_000,
            coding_rate_index: 1,
            preamble_symbols: 8,
            explicit_header: true,
            crc_on: true,
            low_data_rate_optimize: sf >= 11,
        }
    }

    pub fn symbol_time_ms(&self) -> f64 {
        (1u64 << self.sf) as f64 * 1000.0 / self.bandwidth_hz as f64
    }

    fn validate(&self) -> Result<(), AirtimeError> {
        if !(7..=12).contains(&self.sf) {
            return Err(AirtimeError::InvalidParams("sf outside [7, 12]"));
        }
        if !matches!(self.bandwidth_hz, 125_000 | 250_000 | 500_000) {
            return Err(AirtimeError::InvalidParams("bandwidth must be 125, 250 or 500 kHz"));
        }
        if !(1..=4).contains(&self.coding_rate_index) {
            return Err(AirtimeError::InvalidParams("coding rate index outside [1, 4]"));
        }
        if self.preamble_symbols < 6 {
            return Err(AirtimeError::InvalidParams("preamble shorter than 6 symbols"));
        }
        if self.symbol_time_ms() > 16.0 && !self.low_data_rate_optimize {
            return Err(AirtimeError::LdroRequired { sf: self.sf, bandwidth_hz: self.bandwidth_hz });
        }
        Ok(())
    }

    /// Number of payload symbols (including the 8 fixed header symbols).
    pub fn payload_symbols(&self, payload_bytes: u32) -> u32 {
        let sf = self.sf as i64;
        let crc = if self.crc_on { 16 } else { 0 };
        let ih = if self.explicit_header { 0 } else { 20 };
        let de = if self.low_data_rate_optimize { 2 } else { 0 };
        let num = 8 * payload_bytes as i64 - 4 * sf + 28 + crc - ih;
        let den = 4 * (sf - de);
        let blocks = if num > 0 { (num + den - 1) / den } else { 0 };
        8 + (blocks * (self.coding_rate_index as i64 + 4)) as u32
    }
}

pub fn lora_time_on_air(params: &LoRaParams, payload_bytes: u32) -> Result<AirtimeProfile, AirtimeError> {
    if payload_bytes == 0 {
        return Err(AirtimeError::ZeroPayload);
    }
    if payload_bytes > Technology::LoRaWAN.max_payload() {
        return Err(AirtimeError::PayloadExceedsMax(Technology::LoRaWAN, payload_bytes));
    }
    params.validate()?;
    let symbols = params.preamble_symbols as f64 + 4.25 + params.payload_symbols(payload_bytes) as f64;
    Ok(AirtimeProfile::new().with("tx", symbols * params.symbol_time_ms(), RadioState::Tx))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SigfoxParams {
    pub bitrate_bps: f64,
    pub repetitions: u8,
    /// Assumed protocol overhead per frame; not a measured value.
    pub frame_overhead_bytes: u32,
    /// Assumed idle gap between repetitions; not a measured value.
    pub interframe_gap_ms: f64,
}

impl Default for SigfoxParams {
    fn default() -> Self {
        SigfoxParams { bitrate_bps: 100.0, repetitions: 3, frame_overhead_bytes: 14, interframe_gap_ms: 500.0 }
    }
}

impl SigfoxParams {
    pub fn frame_ms(&self, payload_bytes: u32) -> f64 {
        (payload_bytes + self.frame_overhead_bytes) as f64 * 8.0 * 1000.0 / self.bitrate_bps
    }
}

pub fn sigfox_airtime(params: &SigfoxParams, payload_bytes: u32) -> Result<AirtimeProfile, AirtimeError> {
    if payload_bytes == 0 {
        return Err(AirtimeError::ZeroPayload);
    }
    if payload_bytes > Technology::Sigfox.max_payload() {
        return Err(AirtimeError::PayloadExceedsMax(Technology::Sigfox, payload_bytes));
    }
    if params.bitrate_bps.is_nan()
        || params.bitrate_bps <= 0.0
        || params.repetitions == 0
        || params.interframe_gap_ms < 0.0
    {
        return Err(AirtimeError::InvalidParams("sigfox bitrate, repetitions and gap must be positive"));
    }
    let frame = params.frame_ms(payload_bytes);
    let mut profile = AirtimeProfile::new();
    for i in 0..params.repetitions {
        if i > 0 {
            profile.push("interframe_gap", params.interframe_gap_ms, RadioState::Idle);
        }
        profile.push("tx", frame, RadioState::Tx);
    }
    Ok(profile)
}

/// NB-IoT transaction timing. None of these values are published for the
/// measured network; the defaults are placeholders that the energy fit
/// compensates for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NbiotTimingConfig {
    pub attach_ms: f64,
    pub tx_ms_per_128b: f64,
    pub inactivity_timer_ms: f64,
    pub edrx_cycle_ms: Option<f64>,
    /// Paging time window listened to in each eDRX cycle.
    pub edrx_window_ms: f64,
    pub edrx_cycles: u32,
    pub psm_entry_ms: f64,
    pub ce_multiplier: [f64; 3],
}

impl Default for NbiotTimingConfig {
    fn default() -> Self {
        NbiotTimingConfig {
            attach_ms: 2500.0,
            tx_ms_per_128b: 400.0,
            inactivity_timer_ms: 10_000.0,
            edrx_cycle_ms: None,
            edrx_window_ms: 2560.0,
            edrx_cycles: 1,
            psm_entry_ms: 100.0,
            ce_multiplier: [1.0, 2.0, 4.0],
        }
    }
}

impl NbiotTimingConfig {
    pub fn validate(&self) -> Result<(), AirtimeError> {
        let [c0, c1, c2] = self.ce_multiplier;
        if c0 != 1.0 || c1 < c0 || c2 < c1 {
            return Err(AirtimeError::InvalidParams("ce_multiplier must satisfy 1.0 = c0 <= c1 <= c2"));
        }
        let durations =
            [self.attach_ms, self.tx_ms_per_128b, self.inactivity_timer_ms, self.edrx_window_ms, self.psm_entry_ms];
        if durations.iter().any(|d| d.is_nan() || *d < 0.0)
            || self.edrx_cycle_ms.is_some_and(|c| c.is_nan() || c < self.edrx_window_ms)
        {
            return Err(AirtimeError::InvalidParams("durations must be non-negative and eDRX cycle >= window"));
        }
        Ok(())
    }

    pub fn tx_ms(&self, payload_bytes: u32, ce_level: u8) -> f64 {
        payload_bytes.div_ceil(128) as f64 * self.tx_ms_per_128b * self.ce_multiplier[ce_level as usize]
    }
}

pub fn nbiot_transaction_profile(
    cfg: &NbiotTimingConfig,
    payload_bytes: u32,
    ce_level: u8,
    rrc_resume: bool,
) -> Result<AirtimeProfile, AirtimeError> {
    if payload_bytes == 0 {
        return Err(AirtimeError::ZeroPayload);
    }
    if payload_bytes > Technology::NBIoT.max_payload() {
        return Err(AirtimeError::PayloadExceedsMax(Technology::NBIoT, payload_bytes));
    }
    if ce_level > 2 {
        return Err(AirtimeError::BadCeLevel(ce_level));
    }
    cfg.validate()?;
    let mut profile = AirtimeProfile::new();
    if !rrc_resume {
        profile.push("attach", cfg.attach_ms, RadioState::Rx);
    }
    profile.push("tx", cfg.tx_ms(payload_bytes, ce_level), RadioState::Tx);
    profile.push("inactivity", cfg.inactivity_timer_ms, RadioState::Idle);
    if let Some(cycle) = cfg.edrx_cycle_ms {
        for _ in 0..cfg.edrx_cycles {
            profile.push("edrx_window", cfg.edrx_window_ms, RadioState::Rx);
            profile.push("edrx_sleep", cycle - cfg.edrx_window_ms, RadioState::Sleep);
        }
    }
    profile.push("psm_entry", cfg.psm_entry_ms, RadioState::Idle);
    Ok(profile)
}

/// How a given technology is configured on the node; used to build the full
/// transaction timeline for energy and duty-cycle accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkSettings {
    pub lorawan_sf: u8,
    pub lorawan_tx_power_dbm: i32,
    /// Idle time spent waiting on the two receive windows after an uplink.
    pub lorawan_rx_delay_ms: f64,
    pub sigfox: SigfoxParams,
    pub sigfox_tx_power_dbm: i32,
    pub nbiot: NbiotTimingConfig,
    pub nbiot_ce_level: u8,
    pub nbiot_tx_power_dbm: i32,
    pub nbiot_rrc_resume: bool,
}

impl Default for LinkSettings {
    fn default() -> Self {
        LinkSettings {
            lorawan_sf: 12,
            lorawan_tx_power_dbm: 14,
            lorawan_rx_delay_ms: 2000.0,
            sigfox: SigfoxParams::default(),
            sigfox_tx_power_dbm: 14,
            nbiot: NbiotTimingConfig::default(),
            nbiot_ce_level: 0,
            nbiot_tx_power_dbm: 23,
            nbiot_rrc_resume: false,
        }
    }
}

impl LinkSettings {
    pub fn tx_power_dbm(&self, tech: Technology) -> i32 {
        match tech {
            Technology::LoRaWAN => self.lorawan_tx_power_dbm,
            Technology::Sigfox => self.sigfox_tx_power_dbm,
            Technology::NBIoT => self.nbiot_tx_power_dbm,
        }
    }

    /// Full transaction timeline for one uplink of `payload_bytes`.
    pub fn transaction(&self, tech: Technology, payload_bytes: u32) -> Result<AirtimeProfile, AirtimeError> {
        match tech {
            Technology::LoRaWAN => {
                let mut p = lora_time_on_air(&LoRaParams::lorawan(self.lorawan_sf), payload_bytes)?;
                p.push("rx_delay", self.lorawan_rx_delay_ms, RadioState::Idle);
                Ok(p)
            }
            Technology::Sigfox => sigfox_airtime(&self.sigfox, payload_bytes),
            Technology::NBIoT => {
                nbiot_transaction_profile(&self.nbiot, payload_bytes, self.nbiot_ce_level, self.nbiot_rrc_resume)
            }
        }
    }
}

/// Convenience for building a profile from literal phases in tests and configs.
pub fn profile_from(phases: &[(&str, f64, RadioState)]) -> AirtimeProfile {
    let mut p = AirtimeProfile::new();
    for (name, d, s) in phases {
        p.push(name, *d, *s);
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phase_names(p: &AirtimeProfile) -> Vec<&str> {
        p.phases.iter().map(|ph| ph.name.as_str()).collect()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn lora_reference_points() {
        let p = LoRaParams { low_data_rate_optimize: false, ..LoRaParams::lorawan(7) };
        let toa = lora_time_on_air(&p, 12).unwrap();
        assert!(close(toa.total_on_air_ms, 41.216, 1e-9), "{}", toa.total_on_air_ms);
        assert_eq!(toa.phases.len(), 1);

        let p = LoRaParams::lorawan(12);
        let toa = lora_time_on_air(&p, 12).unwrap();
        assert!(close(toa.total_on_air_ms, 1155.072, 1e-9), "{}", toa.total_on_air_ms);
        assert!(lora_time_on_air(&p, 13).unwrap().total_on_air_ms >= toa.total_on_air_ms);
    }

    #[test]
    fn lora_errors() {
        let p = LoRaParams { low_data_rate_optimize: false, ..LoRaParams::lorawan(11) };
        assert_eq!(lora_time_on_air(&p, 10), Err(AirtimeError::LdroRequired { sf: 11, bandwidth_hz: 125_000 }));
        // SF11 at 250 kHz has 8.192 ms symbols, LDRO optional.
        let p = LoRaParams { bandwidth_hz: 250_000, low_data_rate_optimize: false, ..LoRaParams::lorawan(11) };
        assert!(lora_time_on_air(&p, 10).is_ok());
        assert_eq!(
            lora_time_on_air(&LoRaParams::lorawan(7), 257),
            Err(AirtimeError::PayloadExceedsMax(Technology::LoRaWAN, 257))
        );
        assert_eq!(lora_time_on_air(&LoRaParams::lorawan(7), 0), Err(AirtimeError::ZeroPayload));
    }

    #[test]
    fn sigfox_frames() {
        let s = SigfoxParams::default();
        let p = sigfox_airtime(&s, 12).unwrap();
        assert_eq!(p.tx_phases().count(), 3);
        assert!(p.tx_phases().all(|ph| ph.duration_ms == 2080.0));
        assert_eq!(p.total_on_air_ms, 6240.0);
        assert_eq!(p.total_duration_ms(), 6240.0 + 1000.0);

        let p = sigfox_airtime(&s, 1).unwrap();
        assert_eq!(p.total_on_air_ms, 3600.0);
        assert!(matches!(sigfox_airtime(&s, 13), Err(AirtimeError::PayloadExceedsMax(Technology::Sigfox, 13))));
    }

    #[test]
    fn nbiot_phases() {
        let cfg = NbiotTimingConfig::default();
        let p = nbiot_transaction_profile(&cfg, 128, 0, true).unwrap();
        assert_eq!(phase_names(&p), ["tx", "inactivity", "psm_entry"]);
        assert_eq!(p.total_on_air_ms, cfg.tx_ms_per_128b);
        assert_eq!(p.total_duration_ms(), cfg.tx_ms_per_128b + cfg.inactivity_timer_ms + cfg.psm_entry_ms);

        let ce2 = nbiot_transaction_profile(&cfg, 128, 2, true).unwrap();
        assert_eq!(ce2.total_on_air_ms, cfg.ce_multiplier[2] * p.total_on_air_ms);

        let big = nbiot_transaction_profile(&cfg, 1547, 0, true).unwrap();
        assert_eq!(big.total_on_air_ms, 13.0 * cfg.tx_ms_per_128b);

        let attach = nbiot_transaction_profile(&cfg, 10, 0, false).unwrap();
        assert_eq!(attach.phases[0].name, "attach");

        assert_eq!(nbiot_transaction_profile(&cfg, 10, 3, true), Err(AirtimeError::BadCeLevel(3)));
        assert!(matches!(nbiot_transaction_profile(&cfg, 1548, 0, true), Err(AirtimeError::PayloadExceedsMax(..))));

        let edrx = NbiotTimingConfig { edrx_cycle_ms: Some(20_480.0), edrx_cycles: 2, ..cfg };
        let p = nbiot_transaction_profile(&edrx, 10, 0, true).unwrap();
        assert_eq!(p.phases.iter().filter(|ph| ph.name == "edrx_window").count(), 2);
    }

    #[test]
    fn nbiot_config_validation() {
        let bad = NbiotTimingConfig { ce_multiplier: [1.0, 0.5, 4.0], ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = NbiotTimingConfig { inactivity_timer_ms: -1.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn link_settings_timelines() {
        let link = LinkSettings::default();
        let lora = link.transaction(Technology::LoRaWAN, 12).unwrap();
        assert_eq!(lora.phases.last().unwrap().state, RadioState::Idle);
        assert!(close(lora.total_on_air_ms, 1155.072, 1e-9));
        assert_eq!(link.tx_power_dbm(Technology::Sigfox), 14);
    }
}
