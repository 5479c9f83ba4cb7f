//! Airtime, energy, delivery-probability and multi-RAT selection models for
//! LoRaWAN, Sigfox and NB-IoT, plus a deterministic campaign simulator.
//!
//! The crate is `no_std` (with `alloc`); IO, the CLI and the HTTP service
//! live in the `ratbench` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod airtime;
pub mod duty;
pub mod energy;
pub mod model;
pub mod models;
pub mod pdr;
pub mod policy;
pub mod reference;
pub mod rng;
pub mod sim;

pub use airtime::{AirtimeError, AirtimeProfile, LinkSettings, Phase, RadioState};
pub use duty::{DutyCycleLedger, HOUR_MS};
pub use model::{
    bucket_of, validate_record, AggregateCell, MeasurementRecord, Metric, PayloadBucket, Scenario, Sentinel,
    SpeedBucket, TechParams, Technology, ValidationError,
};
pub use models::{ModelError, Models};
pub use pdr::PdrMode;
pub use policy::{Context, MessageSpec, Policy, PolicyError, TxPlan};
pub use sim::{CampaignConfig, SimError, SimSummary, WorkloadSpec};
