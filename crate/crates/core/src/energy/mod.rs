//! Per-transaction energy from radio phase timelines.
//!
//! Units: power in mW, durations in ms, energy in µWh (1 µWh = 3600 mW·ms).

mod calibration;
mod fit;

pub use calibration::{calibrate_scale, residual_box_stats, BoxStats, CalibrationError, CalibrationFactor};
pub use fit::{
    bucket_sums, fit_power_profiles, fit_power_profiles_with, BucketScale, BucketSums, EnergyTarget, FitError, FitNote,
    FittedEntry, FittedModel,
};

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::airtime::{AirtimeProfile, RadioState};
use crate::model::Technology;

pub const MW_MS_PER_UWH: f64 = 3600.0;

pub fn mw_ms_to_uwh(mw: f64, ms: f64) -> f64 {
    mw * ms / MW_MS_PER_UWH
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnergyError {
    #[error("tx power {0} dBm is outside the power table")]
    UnknownTxPower(i32),
    #[error("invalid power profile: {0}")]
    InvalidProfile(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxPowerPoint {
    pub dbm: i32,
    pub mw: f64,
}

/// Electrical power drawn in each radio state plus a fixed per-transaction
/// cost (MCU wake-up, sensing, host processing).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    /// Sorted by dBm; linearly interpolated between points.
    pub tx_mw: Vec<TxPowerPoint>,
    pub rx_mw: f64,
    pub idle_mw: f64,
    pub sleep_mw: f64,
    pub fixed_overhead_uwh: f64,
}

impl PowerProfile {
    /// Datasheet-level defaults: SX1276 at 3.3 V for LoRaWAN and Sigfox,
    /// BG96 at 3.8 V for NB-IoT.
    pub fn default_for(tech: Technology) -> PowerProfile {
        match tech {
            Technology::LoRaWAN | Technology::Sigfox => PowerProfile {
                tx_mw: points(&[(2, 66.0), (7, 82.5), (14, 145.2), (17, 297.0), (20, 396.0)]),
                rx_mw: 35.6,
                idle_mw: 5.3,
                sleep_mw: 0.0066,
                fixed_overhead_uwh: 0.0,
            },
            Technology::NBIoT => PowerProfile {
                tx_mw: points(&[(0, 380.0), (10, 494.0), (20, 760.0), (23, 950.0)]),
                rx_mw: 228.0,
                idle_mw: 57.0,
                sleep_mw: 0.011,
                fixed_overhead_uwh: 0.0,
            },
        }
    }

    /// A profile with a single transmit power level.
    pub fn flat(dbm: i32, tx_mw: f64) -> PowerProfile {
        PowerProfile {
            tx_mw: vec![TxPowerPoint { dbm, mw: tx_mw }],
            rx_mw: 0.0,
            idle_mw: 0.0,
            sleep_mw: 0.0,
            fixed_overhead_uwh: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), EnergyError> {
        if self.tx_mw.is_empty() {
            return Err(EnergyError::InvalidProfile("empty tx power table"));
        }
        if self.tx_mw.windows(2).any(|w| w[1].dbm <= w[0].dbm || w[1].mw < w[0].mw) {
            return Err(EnergyError::InvalidProfile("tx power must be strictly ordered by dBm and non-decreasing"));
        }
        let all = [self.rx_mw, self.idle_mw, self.sleep_mw, self.fixed_overhead_uwh];
        if all.iter().chain(self.tx_mw.iter().map(|p| &p.mw)).any(|x| x.is_nan() || *x < 0.0) {
            return Err(EnergyError::InvalidProfile("negative power"));
        }
        if !(self.sleep_mw <= self.idle_mw && self.idle_mw <= self.rx_mw) {
            return Err(EnergyError::InvalidProfile("expected sleep <= idle <= rx"));
        }
        Ok(())
    }

    pub fn tx_power_mw(&self, dbm: i32) -> Result<f64, EnergyError> {
        let pts = &self.tx_mw;
        let (first, last) = match (pts.first(), pts.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(EnergyError::UnknownTxPower(dbm)),
        };
        if dbm < first.dbm || dbm > last.dbm {
            return Err(EnergyError::UnknownTxPower(dbm));
        }
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if dbm >= a.dbm && dbm <= b.dbm {
                let f = (dbm - a.dbm) as f64 / (b.dbm - a.dbm) as f64;
                return Ok(a.mw + f * (b.mw - a.mw));
            }
        }
        Ok(first.mw)
    }

    pub fn state_power_mw(&self, state: RadioState, dbm: i32) -> Result<f64, EnergyError> {
        Ok(match state {
            RadioState::Tx => self.tx_power_mw(dbm)?,
            RadioState::Rx => self.rx_mw,
            RadioState::Idle => self.idle_mw,
            RadioState::Sleep => self.sleep_mw,
        })
    }

    /// Copy with every transmit power level multiplied by `k`.
    pub fn with_tx_scale(&self, k: f64) -> PowerProfile {
        let mut p = self.clone();
        for pt in &mut p.tx_mw {
            pt.mw *= k;
        }
        p
    }
}

fn points(p: &[(i32, f64)]) -> Vec<TxPowerPoint> {
    p.iter().map(|&(dbm, mw)| TxPowerPoint { dbm, mw }).collect()
}

/// Energy of one transaction: fixed overhead plus power times duration of
/// every phase, transmit phases priced at `tx_power_dbm`.
pub fn transaction_energy(
    profile: &AirtimeProfile,
    power: &PowerProfile,
    tx_power_dbm: i32,
) -> Result<f64, EnergyError> {
    let mut uwh = power.fixed_overhead_uwh;
    for phase in &profile.phases {
        uwh += mw_ms_to_uwh(power.state_power_mw(phase.state, tx_power_dbm)?, phase.duration_ms);
    }
    Ok(uwh)
}

/// Transaction energy split into transmit phases and everything else,
/// excluding the fixed overhead. Used by the fit, which scales the two parts
/// independently.
pub(crate) fn split_energy(
    profile: &AirtimeProfile,
    power: &PowerProfile,
    tx_power_dbm: i32,
) -> Result<(f64, f64), EnergyError> {
    let (mut tx, mut rest) = (0.0, 0.0);
    for phase in &profile.phases {
        let e = mw_ms_to_uwh(power.state_power_mw(phase.state, tx_power_dbm)?, phase.duration_ms);
        if phase.state == RadioState::Tx {
            tx += e;
        } else {
            rest += e;
        }
    }
    Ok((tx, rest))
}
