//! The bundle of delivery, energy and timing models consumed by the policy
//! layer and the simulator.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::airtime::{AirtimeError, AirtimeProfile, LinkSettings};
use crate::energy::{mw_ms_to_uwh, FitError, FittedModel};
use crate::model::{bucket_of, Metric, PayloadBucket, Scenario, Sentinel, Technology};
use crate::pdr::{PdrError, PdrMode, PdrModels};
use crate::reference;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("{0} cannot carry {1} bytes")]
    Unsupported(Technology, u32),
    #[error("no data for {0} at {1} bytes in {2}")]
    Unavailable(Technology, u32, Scenario),
    #[error(transparent)]
    Airtime(#[from] AirtimeError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Pdr(#[from] PdrError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EbEntry {
    pub technology: Technology,
    pub bucket: PayloadBucket,
    pub scenario: Scenario,
    pub eb_uwh_per_byte: Metric,
}

/// Measured energy per byte per cell; a transaction of `n` bytes costs
/// `n · E_b(cell)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<EbEntry>", into = "Vec<EbEntry>")]
pub struct EbTable {
    cells: BTreeMap<(Technology, PayloadBucket, Scenario), Metric>,
}

impl EbTable {
    pub fn measured() -> EbTable {
        let cells = reference::measured_table()
            .into_iter()
            .map(|c| ((c.technology, c.bucket, c.scenario), c.eb_uwh_per_byte))
            .collect();
        EbTable { cells }
    }

    pub fn get(&self, tech: Technology, bucket: PayloadBucket, scenario: Scenario) -> Metric {
        if !bucket.supported_by(tech) {
            return Metric::UNSUPPORTED;
        }
        self.cells.get(&(tech, bucket, scenario)).copied().unwrap_or(Metric::INSUFFICIENT)
    }
}

impl From<Vec<EbEntry>> for EbTable {
    fn from(v: Vec<EbEntry>) -> Self {
        EbTable { cells: v.into_iter().map(|e| ((e.technology, e.bucket, e.scenario), e.eb_uwh_per_byte)).collect() }
    }
}

impl From<EbTable> for Vec<EbEntry> {
    fn from(t: EbTable) -> Self {
        t.cells
            .into_iter()
            .map(|((technology, bucket, scenario), eb_uwh_per_byte)| EbEntry {
                technology,
                bucket,
                scenario,
                eb_uwh_per_byte,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnergySource {
    /// Energy per byte read straight from a measured table.
    MeasuredEb { table: EbTable },
    /// Phase-timeline model fitted to a table.
    Fitted { model: FittedModel },
}

/// Downlink acknowledgement cost: one receive phase per confirmed uplink.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AckCost {
    pub duration_ms: f64,
    pub rx_mw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AckModel {
    pub lorawan: AckCost,
    pub sigfox: AckCost,
    pub nbiot: AckCost,
}

impl Default for AckModel {
    fn default() -> Self {
        AckModel {
            // RX1 window.
            lorawan: AckCost { duration_ms: 1000.0, rx_mw: 35.6 },
            // Sigfox downlinks are requested in-band and take ~25 s.
            sigfox: AckCost { duration_ms: 25_000.0, rx_mw: 35.6 },
            // Acknowledged inside the RRC connection already priced.
            nbiot: AckCost { duration_ms: 0.0, rx_mw: 228.0 },
        }
    }
}

impl AckModel {
    pub fn energy_uwh(&self, tech: Technology) -> f64 {
        let c = match tech {
            Technology::LoRaWAN => self.lorawan,
            Technology::Sigfox => self.sigfox,
            Technology::NBIoT => self.nbiot,
        };
        mw_ms_to_uwh(c.rx_mw, c.duration_ms)
    }
}

/// A model value and, when the exact cell had no data, the lower bucket it
/// was read from instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quote {
    pub value: f64,
    pub fallback: Option<PayloadBucket>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Models {
    pub pdr: PdrModels,
    pub energy: EnergySource,
    pub link: LinkSettings,
    #[serde(default)]
    pub ack: AckModel,
}

impl Default for Models {
    fn default() -> Self {
        Self::measured()
    }
}

impl Models {
    /// Measured delivery and energy tables with default link timing.
    pub fn measured() -> Models {
        Models {
            pdr: PdrModels::default(),
            energy: EnergySource::MeasuredEb { table: EbTable::measured() },
            link: LinkSettings::default(),
            ack: AckModel::default(),
        }
    }

    /// Measured delivery tables with a fitted energy model; timing follows
    /// the link settings the model was fitted with.
    pub fn fitted(model: FittedModel) -> Models {
        Models {
            pdr: PdrModels::default(),
            link: model.link.clone(),
            energy: EnergySource::Fitted { model },
            ack: AckModel::default(),
        }
    }

    pub fn fitted_model(&self) -> Option<&FittedModel> {
        match &self.energy {
            EnergySource::Fitted { model } => Some(model),
            EnergySource::MeasuredEb { .. } => None,
        }
    }

    pub fn transaction(&self, tech: Technology, payload_bytes: u32) -> Result<AirtimeProfile, ModelError> {
        if payload_bytes > tech.max_payload() {
            return Err(ModelError::Unsupported(tech, payload_bytes));
        }
        Ok(self.link.transaction(tech, payload_bytes)?)
    }

    pub fn transaction_energy(
        &self,
        tech: Technology,
        payload_bytes: u32,
        scenario: Scenario,
    ) -> Result<Quote, ModelError> {
        if payload_bytes == 0 || payload_bytes > tech.max_payload() {
            return Err(ModelError::Unsupported(tech, payload_bytes));
        }
        match &self.energy {
            EnergySource::Fitted { model } => {
                Ok(Quote { value: model.energy_uwh(tech, scenario, payload_bytes)?, fallback: None })
            }
            EnergySource::MeasuredEb { table } => {
                let q = with_fallback(tech, payload_bytes, scenario, |b| table.get(tech, b, scenario))?;
                Ok(Quote { value: q.value * payload_bytes as f64, fallback: q.fallback })
            }
        }
    }

    pub fn delivery_probability(
        &self,
        tech: Technology,
        payload_bytes: u32,
        scenario: Scenario,
        speed_kmh: f64,
        mode: PdrMode,
    ) -> Result<Quote, ModelError> {
        let mut err = None;
        let q = with_fallback(tech, payload_bytes, scenario, |b| {
            // Fallback buckets are queried at a representative payload.
            let n = if b == bucket_of(payload_bytes).unwrap_or(b) { payload_bytes } else { b.range().1 };
            match self.pdr.delivery_probability(tech, n, scenario, speed_kmh, mode) {
                Ok(m) => m,
                Err(e) => {
                    err = Some(e);
                    Metric::UNSUPPORTED
                }
            }
        });
        match err {
            Some(e) => Err(e.into()),
            None => q,
        }
    }
}

/// Reads `lookup` at the payload's bucket; an `Insufficient` cell, or a
/// bucket past the measured coverage that the radio can still carry (256 B
/// LoRaWAN), falls back to the nearest lower bucket with data.
fn with_fallback(
    tech: Technology,
    payload_bytes: u32,
    scenario: Scenario,
    mut lookup: impl FnMut(PayloadBucket) -> Metric,
) -> Result<Quote, ModelError> {
    let bucket = bucket_of(payload_bytes).map_err(|_| ModelError::Unsupported(tech, payload_bytes))?;
    let mut at = Some(bucket);
    while let Some(b) = at {
        match lookup(b) {
            Metric::Value(v) => return Ok(Quote { value: v, fallback: (b != bucket).then_some(b) }),
            Metric::Sentinel(Sentinel::Unsupported) if payload_bytes > tech.max_payload() || b != bucket => {
                return Err(ModelError::Unsupported(tech, payload_bytes))
            }
            Metric::Sentinel(_) => at = b.lower(),
        }
    }
    Err(ModelError::Unavailable(tech, payload_bytes, scenario))
}
