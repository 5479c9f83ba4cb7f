//! Delivery probability models and Monte Carlo sampling of outcomes.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::model::{bucket_of, Metric, OutOfRange, PayloadBucket, Scenario, SpeedBucket, Technology};
use crate::reference;
use crate::rng::unit_f64;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum PdrError {
    #[error(transparent)]
    OutOfRange(#[from] OutOfRange),
    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdrEntry {
    pub technology: Technology,
    pub bucket: PayloadBucket,
    pub scenario: Scenario,
    /// Probability in [0, 1] or a sentinel.
    pub pdr: Metric,
}

/// Delivery probability per (technology, payload bucket, scenario).
/// Missing cells read as `Insufficient`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<PdrEntry>", into = "Vec<PdrEntry>")]
pub struct PdrTable {
    cells: BTreeMap<(Technology, PayloadBucket, Scenario), Metric>,
}

impl PdrTable {
    /// The measured table.
    pub fn measured() -> PdrTable {
        let cells = reference::measured_table()
            .into_iter()
            .map(|c| {
                let p = match c.pdr_pct {
                    Metric::Value(pct) => Metric::Value(reference::pct_to_fraction(pct)),
                    s => s,
                };
                ((c.technology, c.bucket, c.scenario), p)
            })
            .collect();
        PdrTable { cells }
    }

    pub fn get(&self, tech: Technology, bucket: PayloadBucket, scenario: Scenario) -> Metric {
        if !bucket.supported_by(tech) {
            return Metric::UNSUPPORTED;
        }
        self.cells.get(&(tech, bucket, scenario)).copied().unwrap_or(Metric::INSUFFICIENT)
    }

    pub fn set(
        &mut self,
        tech: Technology,
        bucket: PayloadBucket,
        scenario: Scenario,
        pdr: Metric,
    ) -> Result<(), PdrError> {
        if let Metric::Value(p) = pdr {
            check_probability(p)?;
        }
        self.cells.insert((tech, bucket, scenario), pdr);
        Ok(())
    }

    pub fn entries(&self) -> impl Iterator<Item = PdrEntry> + '_ {
        self.cells.iter().map(|(&(technology, bucket, scenario), &pdr)| PdrEntry { technology, bucket, scenario, pdr })
    }
}

impl TryFrom<Vec<PdrEntry>> for PdrTable {
    type Error = PdrError;

    fn try_from(entries: Vec<PdrEntry>) -> Result<Self, Self::Error> {
        let mut t = PdrTable { cells: BTreeMap::new() };
        for e in entries {
            t.set(e.technology, e.bucket, e.scenario, e.pdr)?;
        }
        Ok(t)
    }
}

impl From<PdrTable> for Vec<PdrEntry> {
    fn from(t: PdrTable) -> Self {
        t.entries().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedEntry {
    pub technology: Technology,
    pub speed: SpeedBucket,
    pub pdr: f64,
}

/// Delivery probability versus speed for 1-12 byte payloads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<SpeedEntry>", into = "Vec<SpeedEntry>")]
pub struct SpeedPdrCurve {
    points: BTreeMap<(Technology, SpeedBucket), f64>,
}

impl SpeedPdrCurve {
    pub fn measured() -> SpeedPdrCurve {
        let mut points = BTreeMap::new();
        for tech in Technology::ALL {
            for (bucket, pct) in reference::speed_curve_pct(tech) {
                points.insert((tech, bucket), reference::pct_to_fraction(pct));
            }
        }
        SpeedPdrCurve { points }
    }

    pub fn get(&self, tech: Technology, bucket: SpeedBucket) -> Option<f64> {
        self.points.get(&(tech, bucket)).copied()
    }

    /// Mean over the three moving buckets.
    pub fn mobile_mean(&self, tech: Technology) -> Option<f64> {
        let moving = [SpeedBucket::Lt10, SpeedBucket::B10to30, SpeedBucket::Gt30];
        let vals: Vec<f64> = moving.iter().filter_map(|b| self.get(tech, *b)).collect();
        (vals.len() == moving.len()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    pub fn series(&self, tech: Technology) -> Vec<(SpeedBucket, f64)> {
        SpeedBucket::ALL.iter().filter_map(|b| self.get(tech, *b).map(|p| (*b, p))).collect()
    }
}

impl TryFrom<Vec<SpeedEntry>> for SpeedPdrCurve {
    type Error = PdrError;

    fn try_from(entries: Vec<SpeedEntry>) -> Result<Self, Self::Error> {
        let mut points = BTreeMap::new();
        for e in entries {
            check_probability(e.pdr)?;
            points.insert((e.technology, e.speed), e.pdr);
        }
        Ok(SpeedPdrCurve { points })
    }
}

impl From<SpeedPdrCurve> for Vec<SpeedEntry> {
    fn from(c: SpeedPdrCurve) -> Self {
        c.points.into_iter().map(|((technology, speed), pdr)| SpeedEntry { technology, speed, pdr }).collect()
    }
}

fn check_probability(p: f64) -> Result<f64, PdrError> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(PdrError::BadProbability(p))
    }
}

pub fn pdr_lookup(
    table: &PdrTable,
    tech: Technology,
    payload_bytes: u32,
    scenario: Scenario,
) -> Result<Metric, PdrError> {
    Ok(table.get(tech, bucket_of(payload_bytes)?, scenario))
}

/// Step function over speed buckets; a missing point reads as 0.
pub fn pdr_at_speed(curve: &SpeedPdrCurve, tech: Technology, speed_kmh: f64) -> f64 {
    curve.get(tech, SpeedBucket::of(speed_kmh)).unwrap_or(0.0)
}

/// `true` with probability `p`; draws exactly one `u64` from `rng`.
pub fn sample_delivery<R: RngCore + ?Sized>(rng: &mut R, p: f64) -> Result<bool, PdrError> {
    check_probability(p)?;
    Ok(unit_f64(rng) < p)
}

/// Which source decides the delivery probability of a transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdrMode {
    /// Speed-aware for mobile scenarios, scenario table otherwise.
    #[default]
    Auto,
    ScenarioTable,
    SpeedCurve,
}

/// Scenario table plus speed curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdrModels {
    pub table: PdrTable,
    pub speed: SpeedPdrCurve,
}

impl Default for PdrModels {
    fn default() -> Self {
        PdrModels { table: PdrTable::measured(), speed: SpeedPdrCurve::measured() }
    }
}

impl PdrModels {
    /// Delivery probability of one uplink.
    ///
    /// In speed-aware mode 1-12 byte payloads read the speed curve directly.
    /// Larger payloads on a mobile node take the scenario value scaled by
    /// `curve(speed) / mean(moving curve points)`, clamped to [0, 1]; static
    /// nodes keep the scenario value.
    pub fn delivery_probability(
        &self,
        tech: Technology,
        payload_bytes: u32,
        scenario: Scenario,
        speed_kmh: f64,
        mode: PdrMode,
    ) -> Result<Metric, PdrError> {
        let bucket = bucket_of(payload_bytes)?;
        let speed_aware = match mode {
            PdrMode::Auto => scenario.is_mobile(),
            PdrMode::ScenarioTable => false,
            PdrMode::SpeedCurve => true,
        };
        let base = self.table.get(tech, bucket, scenario);
        if !speed_aware || matches!(base, Metric::Sentinel(crate::model::Sentinel::Unsupported)) {
            return Ok(base);
        }
        if bucket == PayloadBucket::B1_12 {
            return Ok(self.speed.get(tech, SpeedBucket::of(speed_kmh)).map_or(Metric::INSUFFICIENT, Metric::Value));
        }
        let Metric::Value(p) = base else {
            return Ok(base);
        };
        if !scenario.is_mobile() {
            return Ok(base);
        }
        let at_speed = pdr_at_speed(&self.speed, tech, speed_kmh);
        Ok(match self.speed.mobile_mean(tech) {
            Some(mean) if mean > 0.0 => Metric::Value((p * at_speed / mean).clamp(0.0, 1.0)),
            _ => base,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn table_lookups() {
        let t = PdrTable::measured();
        assert_eq!(pdr_lookup(&t, Technology::NBIoT, 8, Scenario::STATIC_INDOOR).unwrap(), Metric::Value(0.9310));
        assert_eq!(pdr_lookup(&t, Technology::Sigfox, 8, Scenario::MOBILE_OUTDOOR).unwrap(), Metric::Value(0.4298));
        for s in Scenario::ALL {
            assert_eq!(pdr_lookup(&t, Technology::Sigfox, 30, s).unwrap(), Metric::UNSUPPORTED);
        }
        assert!(matches!(pdr_lookup(&t, Technology::NBIoT, 0, Scenario::STATIC_INDOOR), Err(PdrError::OutOfRange(_))));
    }

    #[test]
    fn unsupported_iff_beyond_coverage() {
        let t = PdrTable::measured();
        for tech in Technology::ALL {
            for n in [1, 12, 13, 51, 52, 255, 256, 1000, 1547] {
                for s in Scenario::ALL {
                    let unsupported = pdr_lookup(&t, tech, n, s).unwrap() == Metric::UNSUPPORTED;
                    let expected = match tech {
                        Technology::Sigfox => n > 12,
                        Technology::LoRaWAN => n > 255,
                        Technology::NBIoT => false,
                    };
                    assert_eq!(unsupported, expected, "{tech} {n} {s}");
                }
            }
        }
    }

    #[test]
    fn speed_points() {
        let c = SpeedPdrCurve::measured();
        assert_eq!(pdr_at_speed(&c, Technology::Sigfox, 0.0), 0.78);
        assert_eq!(pdr_at_speed(&c, Technology::Sigfox, 50.0), 0.17);
        assert_eq!(pdr_at_speed(&c, Technology::NBIoT, 20.0), 0.86);
    }

    #[test]
    fn sigfox_curve_shape() {
        let c = SpeedPdrCurve::measured();
        let s: Vec<f64> = c.series(Technology::Sigfox).into_iter().map(|(_, p)| p).collect();
        assert!(s.windows(2).all(|w| w[1] < w[0]));
        let spread = |t| {
            let v: Vec<f64> = c.series(t).into_iter().map(|(_, p)| p).collect();
            v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min)
        };
        assert!((spread(Technology::Sigfox) - 0.61).abs() < 1e-12);
        assert!((spread(Technology::NBIoT) - 0.09).abs() < 1e-12);
        assert!((spread(Technology::LoRaWAN) - 0.13).abs() < 1e-12);
    }

    #[test]
    fn delivery_modes() {
        let m = PdrModels::default();
        let mo = Scenario::MOBILE_OUTDOOR;
        let p = |tech, n, s, v, mode| m.delivery_probability(tech, n, s, v, mode).unwrap();
        assert_eq!(p(Technology::Sigfox, 8, mo, 50.0, PdrMode::Auto), Metric::Value(0.17));
        assert_eq!(p(Technology::Sigfox, 8, mo, 50.0, PdrMode::ScenarioTable), Metric::Value(0.4298));
        assert_eq!(p(Technology::Sigfox, 8, Scenario::STATIC_OUTDOOR, 0.0, PdrMode::SpeedCurve), Metric::Value(0.78));
        assert_eq!(p(Technology::NBIoT, 8, Scenario::STATIC_INDOOR, 0.0, PdrMode::Auto), Metric::Value(0.9310));
        // Larger payloads scale the mobile value; static keeps it.
        let scaled = p(Technology::NBIoT, 100, mo, 50.0, PdrMode::Auto).value().unwrap();
        let mean = (0.83 + 0.86 + 0.79) / 3.0;
        assert!((scaled - 0.8478 * 0.79 / mean).abs() < 1e-12);
        assert_eq!(p(Technology::LoRaWAN, 100, mo, 50.0, PdrMode::Auto), Metric::INSUFFICIENT);
        assert_eq!(p(Technology::Sigfox, 100, mo, 50.0, PdrMode::Auto), Metric::UNSUPPORTED);
    }

    #[test]
    fn sampling_extremes_and_errors() {
        let mut s = stream(1, 2, 3);
        for _ in 0..1000 {
            assert!(sample_delivery(&mut s, 1.0).unwrap());
            assert!(!sample_delivery(&mut s, 0.0).unwrap());
        }
        assert_eq!(sample_delivery(&mut s, 1.5), Err(PdrError::BadProbability(1.5)));
        assert_eq!(sample_delivery(&mut s, -0.1), Err(PdrError::BadProbability(-0.1)));
    }

    #[test]
    fn half_probability_frequency() {
        let mut s = stream(2024, 0, 0);
        let hits = (0..10_000).filter(|_| sample_delivery(&mut s, 0.5).unwrap()).count();
        let freq = hits as f64 / 10_000.0;
        assert!((freq - 0.5).abs() <= 0.015, "{freq}");
    }

    #[test]
    fn table_json_roundtrip_and_validation() {
        let t = PdrTable::measured();
        let json = serde_json::to_string(&t).unwrap();
        let back: PdrTable = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
        let bad = r#"[{"technology":"NBIoT","bucket":"B1_12","scenario":{"placement":"indoor","mobility":"static"},"pdr":93.1}]"#;
        assert!(serde_json::from_str::<PdrTable>(bad).is_err());
    }
}
