//! Shared vocabulary: technologies, scenarios, payload and speed buckets,
//! and the per-packet measurement record.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Largest payload carried by any technology (NB-IoT).
pub const MAX_PAYLOAD_BYTES: u32 = 1547;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Technology {
    LoRaWAN,
    Sigfox,
    NBIoT,
}

impl Technology {
    /// Fixed tie-break order used everywhere a deterministic ordering is needed.
    pub const ALL: [Technology; 3] = [Technology::LoRaWAN, Technology::Sigfox, Technology::NBIoT];

    pub const fn max_payload(self) -> u32 {
        match self {
            Technology::LoRaWAN => 256,
            Technology::Sigfox => 12,
            Technology::NBIoT => MAX_PAYLOAD_BYTES,
        }
    }

    /// Largest payload bucket the technology is measured in. LoRaWAN can
    /// carry 256 B but the top bucket starts at 256, so it is never covered.
    pub const fn max_bucket(self) -> PayloadBucket {
        match self {
            Technology::LoRaWAN => PayloadBucket::B51_255,
            Technology::Sigfox => PayloadBucket::B1_12,
            Technology::NBIoT => PayloadBucket::B255_1547,
        }
    }

    /// Sigfox and LoRaWAN share license-exempt spectrum.
    pub const fn is_duty_cycled(self) -> bool {
        !matches!(self, Technology::NBIoT)
    }

    pub const fn index(self) -> usize {
        match self {
            Technology::LoRaWAN => 0,
            Technology::Sigfox => 1,
            Technology::NBIoT => 2,
        }
    }

    pub const fn as_str(self) -> &'static str {
        match self {
            Technology::LoRaWAN => "LoRaWAN",
            Technology::Sigfox => "Sigfox",
            Technology::NBIoT => "NBIoT",
        }
    }

    pub fn parse(s: &str) -> Option<Technology> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "lorawan" | "lora" => Some(Technology::LoRaWAN),
            "sigfox" => Some(Technology::Sigfox),
            "nbiot" => Some(Technology::NBIoT),
            _ => None,
        }
    }
}

impl fmt::Display for Technology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    Indoor,
    Outdoor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mobility {
    Static,
    Mobile,
}

/// Where and how a node transmits. Indoor mobile is not a measured cell and
/// is rejected by [`Scenario::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Scenario {
    pub placement: Placement,
    pub mobility: Mobility,
}

impl Scenario {
    pub const STATIC_INDOOR: Scenario = Scenario { placement: Placement::Indoor, mobility: Mobility::Static };
    pub const STATIC_OUTDOOR: Scenario = Scenario { placement: Placement::Outdoor, mobility: Mobility::Static };
    pub const MOBILE_OUTDOOR: Scenario = Scenario { placement: Placement::Outdoor, mobility: Mobility::Mobile };

    /// Table column order.
    pub const ALL: [Scenario; 3] = [Self::STATIC_INDOOR, Self::STATIC_OUTDOOR, Self::MOBILE_OUTDOOR];

    pub fn validate(self) -> Result<Scenario, ValidationError> {
        if self.placement == Placement::Indoor && self.mobility == Mobility::Mobile {
            Err(ValidationError::InvalidScenario)
        } else {
            Ok(self)
        }
    }

    pub fn is_mobile(self) -> bool {
        self.mobility == Mobility::Mobile
    }

    pub fn parse(s: &str) -> Option<Scenario> {
        match s {
            "static-indoor" => Some(Self::STATIC_INDOOR),
            "static-outdoor" => Some(Self::STATIC_OUTDOOR),
            "mobile-outdoor" => Some(Self::MOBILE_OUTDOOR),
            _ => None,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = match self.mobility {
            Mobility::Static => "static",
            Mobility::Mobile => "mobile",
        };
        let p = match self.placement {
            Placement::Indoor => "indoor",
            Placement::Outdoor => "outdoor",
        };
        write!(f, "{m}-{p}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedBucket {
    Static,
    Lt10,
    B10to30,
    Gt30,
}

impl SpeedBucket {
    pub const ALL: [SpeedBucket; 4] = [SpeedBucket::Static, SpeedBucket::Lt10, SpeedBucket::B10to30, SpeedBucket::Gt30];

    /// Boundaries 0, 10 and 30 km/h; 10 belongs to the middle bucket, 30 to
    /// the middle bucket as well (`10-30` is closed).
    pub fn of(speed_kmh: f64) -> SpeedBucket {
        if speed_kmh <= 0.0 {
            SpeedBucket::Static
        } else if speed_kmh < 10.0 {
            SpeedBucket::Lt10
        } else if speed_kmh <= 30.0 {
            SpeedBucket::B10to30
        } else {
            SpeedBucket::Gt30
        }
    }

    pub const fn label(self) -> &'static str {
        match self {
            SpeedBucket::Static => "Static",
            SpeedBucket::Lt10 => "<10 km/h",
            SpeedBucket::B10to30 => "10-30 km/h",
            SpeedBucket::Gt30 => ">30 km/h",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PayloadBucket {
    B1_12,
    B12_51,
    B51_255,
    B255_1547,
}

impl PayloadBucket {
    pub const ALL: [PayloadBucket; 4] =
        [PayloadBucket::B1_12, PayloadBucket::B12_51, PayloadBucket::B51_255, PayloadBucket::B255_1547];

    /// Inclusive byte range covered by the bucket. A shared boundary value
    /// belongs to the lower bucket.
    pub const fn range(self) -> (u32, u32) {
        match self {
            PayloadBucket::B1_12 => (1, 12),
            PayloadBucket::B12_51 => (13, 51),
            PayloadBucket::B51_255 => (52, 255),
            PayloadBucket::B255_1547 => (256, MAX_PAYLOAD_BYTES),
        }
    }

    /// Range restricted to what `tech` can carry, or `None` when the bucket
    /// is beyond the technology's coverage.
    pub fn range_for(self, tech: Technology) -> Option<(u32, u32)> {
        let (lo, hi) = self.range();
        self.supported_by(tech).then_some((lo, hi.min(tech.max_payload())))
    }

    pub fn supported_by(self, tech: Technology) -> bool {
        self <= tech.max_bucket()
    }

    pub const fn label(self) -> &'static str {
        match self {
            PayloadBucket::B1_12 => "1-12",
            PayloadBucket::B12_51 => "12-51",
            PayloadBucket::B51_255 => "51-255",
            PayloadBucket::B255_1547 => "255-1547",
        }
    }

    pub fn lower(self) -> Option<PayloadBucket> {
        match self {
            PayloadBucket::B1_12 => None,
            PayloadBucket::B12_51 => Some(PayloadBucket::B1_12),
            PayloadBucket::B51_255 => Some(PayloadBucket::B12_51),
            PayloadBucket::B255_1547 => Some(PayloadBucket::B51_255),
        }
    }
}

impl fmt::Display for PayloadBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("payload of {0} bytes is outside [1, 1547]")]
pub struct OutOfRange(pub u32);

pub fn bucket_of(payload_bytes: u32) -> Result<PayloadBucket, OutOfRange> {
    match payload_bytes {
        1..=12 => Ok(PayloadBucket::B1_12),
        13..=51 => Ok(PayloadBucket::B12_51),
        52..=255 => Ok(PayloadBucket::B51_255),
        256..=MAX_PAYLOAD_BYTES => Ok(PayloadBucket::B255_1547),
        n => Err(OutOfRange(n)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum TechParams {
    LoRaWAN {
        sf: u8,
        adr_enabled: bool,
    },
    Sigfox {
        #[serde(default)]
        estimated_region: Option<String>,
    },
    NBIoT {
        ce_level: u8,
        #[serde(default)]
        rsrp_dbm: Option<f64>,
        #[serde(default)]
        sinr_db: Option<f64>,
        #[serde(default)]
        rsrq_db: Option<f64>,
        #[serde(default)]
        edrx_s: Option<f64>,
        #[serde(default)]
        psm_tau_s: Option<f64>,
    },
}

impl TechParams {
    pub fn technology(&self) -> Technology {
        match self {
            TechParams::LoRaWAN { .. } => Technology::LoRaWAN,
            TechParams::Sigfox { .. } => Technology::Sigfox,
            TechParams::NBIoT { .. } => Technology::NBIoT,
        }
    }
}

/// One per-packet observation as uploaded by a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub record_id: String,
    pub technology: Technology,
    pub scenario: Scenario,
    /// UTC milliseconds.
    pub timestamp_tx: i64,
    #[serde(default)]
    pub timestamp_rx: Option<i64>,
    pub payload_bytes: u32,
    pub tx_power_dbm: i32,
    pub energy_uwh: f64,
    pub delivered: bool,
    #[serde(default)]
    pub rssi_dbm: Option<f64>,
    #[serde(default)]
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub position: Option<GeoPoint>,
    pub speed_kmh: f64,
    #[serde(default)]
    pub gateway_positions: Vec<GeoPoint>,
    pub tech_params: TechParams,
}

impl MeasurementRecord {
    pub fn bucket(&self) -> Result<PayloadBucket, OutOfRange> {
        bucket_of(self.payload_bytes)
    }

    pub fn speed_bucket(&self) -> SpeedBucket {
        SpeedBucket::of(self.speed_kmh)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ValidationError {
    #[error("empty record_id")]
    EmptyId,
    #[error("indoor mobile is not a valid scenario")]
    InvalidScenario,
    #[error("tech_params tag {found} does not match technology {expected}")]
    TagMismatch { expected: Technology, found: Technology },
    #[error("payload must be at least 1 byte")]
    ZeroPayload,
    #[error("{0} payload of {1} bytes exceeds the technology maximum")]
    PayloadExceedsMax(Technology, u32),
    #[error("energy must be a finite non-negative number")]
    NegativeEnergy,
    #[error("speed must be a finite non-negative number")]
    NegativeSpeed,
    #[error("speed {speed_kmh} km/h is inconsistent with a {mobility:?} scenario")]
    SpeedScenarioMismatch { mobility: Mobility, speed_kmh: f64 },
    #[error("timestamp_rx present on an undelivered packet")]
    RxWithoutDelivery,
    #[error("spreading factor {0} outside [7, 12]")]
    BadSpreadingFactor(u8),
    #[error("CE level {0} outside {{0, 1, 2}}")]
    BadCeLevel(u8),
}

/// Checks every record invariant, reporting the first violation.
pub fn validate_record(r: &MeasurementRecord) -> Result<(), ValidationError> {
    if r.record_id.is_empty() {
        return Err(ValidationError::EmptyId);
    }
    r.scenario.validate()?;
    let tagged = r.tech_params.technology();
    if tagged != r.technology {
        return Err(ValidationError::TagMismatch { expected: r.technology, found: tagged });
    }
    if r.payload_bytes == 0 {
        return Err(ValidationError::ZeroPayload);
    }
    if r.payload_bytes > r.technology.max_payload() {
        return Err(ValidationError::PayloadExceedsMax(r.technology, r.payload_bytes));
    }
    if !(r.energy_uwh.is_finite() && r.energy_uwh >= 0.0) {
        return Err(ValidationError::NegativeEnergy);
    }
    if !(r.speed_kmh.is_finite() && r.speed_kmh >= 0.0) {
        return Err(ValidationError::NegativeSpeed);
    }
    let moving = r.speed_kmh > 0.0;
    if moving != r.scenario.is_mobile() {
        return Err(ValidationError::SpeedScenarioMismatch { mobility: r.scenario.mobility, speed_kmh: r.speed_kmh });
    }
    if !r.delivered && r.timestamp_rx.is_some() {
        return Err(ValidationError::RxWithoutDelivery);
    }
    match r.tech_params {
        TechParams::LoRaWAN { sf, .. } if !(7..=12).contains(&sf) => Err(ValidationError::BadSpreadingFactor(sf)),
        TechParams::NBIoT { ce_level, .. } if ce_level > 2 => Err(ValidationError::BadCeLevel(ce_level)),
        _ => Ok(()),
    }
}

/// A metric that is either a number or one of the two table sentinels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Metric {
    Value(f64),
    Sentinel(Sentinel),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Sentinel {
    /// The technology cannot carry payloads of this size.
    Unsupported,
    /// Too few (or no) samples were collected.
    Insufficient,
}

impl Metric {
    pub const UNSUPPORTED: Metric = Metric::Sentinel(Sentinel::Unsupported);
    pub const INSUFFICIENT: Metric = Metric::Sentinel(Sentinel::Insufficient);

    pub fn value(self) -> Option<f64> {
        match self {
            Metric::Value(v) => Some(v),
            Metric::Sentinel(_) => None,
        }
    }
}

/// Cells with fewer sent packets than this carry the `Insufficient` sentinel.
pub const DEFAULT_MIN_SAMPLES: u64 = 10;

/// One (technology, payload bucket, scenario) cell of a delivery/energy table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCell {
    pub technology: Technology,
    pub bucket: PayloadBucket,
    pub scenario: Scenario,
    pub pdr_pct: Metric,
    pub eb_uwh_per_byte: Metric,
    pub n_sent: u64,
    pub n_received: u64,
    /// Additive sums kept so cells from disjoint stores can be merged.
    #[serde(default)]
    pub energy_uwh_sum: f64,
    #[serde(default)]
    pub bytes_sum: u64,
}

impl AggregateCell {
    /// Builds a cell from additive sums. `eb_energy`/`eb_bytes` are the sums
    /// used for the energy-per-byte ratio (all sent packets by default).
    #[allow(clippy::too_many_arguments)]
    pub fn from_sums(
        technology: Technology,
        bucket: PayloadBucket,
        scenario: Scenario,
        n_sent: u64,
        n_received: u64,
        eb_energy: f64,
        eb_bytes: u64,
        min_samples: u64,
    ) -> AggregateCell {
        let enough = n_sent >= min_samples && n_sent > 0;
        let pdr_pct =
            if enough { Metric::Value(100.0 * n_received as f64 / n_sent as f64) } else { Metric::INSUFFICIENT };
        let eb_uwh_per_byte =
            if enough && eb_bytes > 0 { Metric::Value(eb_energy / eb_bytes as f64) } else { Metric::INSUFFICIENT };
        AggregateCell {
            technology,
            bucket,
            scenario,
            pdr_pct,
            eb_uwh_per_byte,
            n_sent,
            n_received,
            energy_uwh_sum: eb_energy,
            bytes_sum: eb_bytes,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    pub(crate) fn sample(tech: Technology) -> MeasurementRecord {
        let tech_params = match tech {
            Technology::LoRaWAN => TechParams::LoRaWAN { sf: 9, adr_enabled: true },
            Technology::Sigfox => TechParams::Sigfox { estimated_region: None },
            Technology::NBIoT => TechParams::NBIoT {
                ce_level: 0,
                rsrp_dbm: None,
                sinr_db: None,
                rsrq_db: None,
                edrx_s: None,
                psm_tau_s: None,
            },
        };
        MeasurementRecord {
            record_id: "r-1".to_string(),
            technology: tech,
            scenario: Scenario::STATIC_INDOOR,
            timestamp_tx: 1_000,
            timestamp_rx: Some(2_000),
            payload_bytes: 12,
            tx_power_dbm: 14,
            energy_uwh: 0.5,
            delivered: true,
            rssi_dbm: None,
            snr_db: None,
            position: None,
            speed_kmh: 0.0,
            gateway_positions: Vec::new(),
            tech_params,
        }
    }

    #[test]
    fn sigfox_max_payload_boundary() {
        let r = sample(Technology::Sigfox);
        assert_eq!(validate_record(&r), Ok(()));
        let r = MeasurementRecord { payload_bytes: 13, ..r };
        assert_eq!(validate_record(&r), Err(ValidationError::PayloadExceedsMax(Technology::Sigfox, 13)));
    }

    #[test]
    fn rx_timestamp_requires_delivery() {
        let r = MeasurementRecord { delivered: false, ..sample(Technology::LoRaWAN) };
        assert_eq!(validate_record(&r), Err(ValidationError::RxWithoutDelivery));
    }

    #[test]
    fn tag_mismatch_and_ranges() {
        let mut r = sample(Technology::LoRaWAN);
        r.technology = Technology::NBIoT;
        assert!(matches!(validate_record(&r), Err(ValidationError::TagMismatch { .. })));

        let mut r = sample(Technology::LoRaWAN);
        r.tech_params = TechParams::LoRaWAN { sf: 13, adr_enabled: false };
        assert_eq!(validate_record(&r), Err(ValidationError::BadSpreadingFactor(13)));

        let mut r = sample(Technology::NBIoT);
        r.tech_params = TechParams::NBIoT {
            ce_level: 3,
            rsrp_dbm: None,
            sinr_db: None,
            rsrq_db: None,
            edrx_s: None,
            psm_tau_s: None,
        };
        assert_eq!(validate_record(&r), Err(ValidationError::BadCeLevel(3)));

        let r = MeasurementRecord { energy_uwh: -0.1, ..sample(Technology::NBIoT) };
        assert_eq!(validate_record(&r), Err(ValidationError::NegativeEnergy));

        let r = MeasurementRecord { scenario: Scenario::STATIC_INDOOR, speed_kmh: 5.0, ..sample(Technology::NBIoT) };
        assert!(matches!(validate_record(&r), Err(ValidationError::SpeedScenarioMismatch { .. })));

        let bad = Scenario { placement: Placement::Indoor, mobility: Mobility::Mobile };
        let r = MeasurementRecord { scenario: bad, speed_kmh: 5.0, ..sample(Technology::NBIoT) };
        assert_eq!(validate_record(&r), Err(ValidationError::InvalidScenario));
    }

    #[test]
    fn bucket_boundaries() {
        assert_eq!(bucket_of(12), Ok(PayloadBucket::B1_12));
        assert_eq!(bucket_of(13), Ok(PayloadBucket::B12_51));
        assert_eq!(bucket_of(51), Ok(PayloadBucket::B12_51));
        assert_eq!(bucket_of(255), Ok(PayloadBucket::B51_255));
        assert_eq!(bucket_of(256), Ok(PayloadBucket::B255_1547));
        assert_eq!(bucket_of(1547), Ok(PayloadBucket::B255_1547));
        assert_eq!(bucket_of(0), Err(OutOfRange(0)));
        assert_eq!(bucket_of(1548), Err(OutOfRange(1548)));
    }

    #[test]
    fn buckets_partition_the_payload_range() {
        for n in 1..=MAX_PAYLOAD_BYTES {
            let hits = PayloadBucket::ALL
                .iter()
                .filter(|b| {
                    let (lo, hi) = b.range();
                    lo <= n && n <= hi
                })
                .count();
            assert_eq!(hits, 1, "payload {n}");
            let (lo, hi) = bucket_of(n).unwrap().range();
            assert!(lo <= n && n <= hi);
        }
    }

    #[test]
    fn bucket_support_follows_max_payload() {
        assert!(PayloadBucket::B1_12.supported_by(Technology::Sigfox));
        assert!(!PayloadBucket::B12_51.supported_by(Technology::Sigfox));
        assert_eq!(PayloadBucket::B255_1547.range_for(Technology::LoRaWAN), None);
        assert_eq!(PayloadBucket::B51_255.range_for(Technology::LoRaWAN), Some((52, 255)));
        assert_eq!(PayloadBucket::B255_1547.range_for(Technology::NBIoT), Some((256, 1547)));
    }

    #[test]
    fn speed_buckets() {
        assert_eq!(SpeedBucket::of(0.0), SpeedBucket::Static);
        assert_eq!(SpeedBucket::of(0.1), SpeedBucket::Lt10);
        assert_eq!(SpeedBucket::of(10.0), SpeedBucket::B10to30);
        assert_eq!(SpeedBucket::of(30.0), SpeedBucket::B10to30);
        assert_eq!(SpeedBucket::of(30.5), SpeedBucket::Gt30);
        let mut last = SpeedBucket::Static;
        for i in 0..2000 {
            let b = SpeedBucket::of(i as f64 * 0.05);
            assert!(b >= last);
            last = b;
        }
    }

    #[test]
    fn metric_json_shape() {
        assert_eq!(serde_json::to_string(&Metric::Value(93.1)).unwrap(), "93.1");
        assert_eq!(serde_json::to_string(&Metric::INSUFFICIENT).unwrap(), "\"INSUFFICIENT\"");
        let m: Metric = serde_json::from_str("\"UNSUPPORTED\"").unwrap();
        assert_eq!(m, Metric::UNSUPPORTED);
    }

    #[test]
    fn tech_params_are_type_tagged() {
        let r = sample(Technology::LoRaWAN);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"tech_params\":{\"type\":\"LoRaWAN\",\"sf\":9"));
        let back: MeasurementRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
}
