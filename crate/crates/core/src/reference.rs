//! Published field measurements shipped as model defaults.
//!
//! Delivery ratios are percentages and energies µWh per payload byte, exactly
//! as measured. `Unsupported` marks payloads a technology cannot carry and
//! `Insufficient` marks cells where no samples were gathered.

use alloc::vec::Vec;

use crate::model::{Metric, PayloadBucket, Scenario, SpeedBucket, Technology};

const U: Metric = Metric::UNSUPPORTED;
const I: Metric = Metric::INSUFFICIENT;

const fn v(x: f64) -> Metric {
    Metric::Value(x)
}

/// Column order of the rows below.
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

/// (bucket, PDR row in %, E_b row in µWh/B)
const ROWS: [(PayloadBucket, [Metric; 9], [Metric; 9]); 4] = [
    (
        PayloadBucket::B1_12,
        [v(93.10), v(61.58), v(89.86), v(94.54), v(52.89), v(73.49), v(88.89), v(62.09), v(42.98)],
        [v(60.52), v(8.03), v(45.58), v(44.36), v(11.65), v(47.03), v(74.80), v(10.2), v(50.79)],
    ),
    (
        PayloadBucket::B12_51,
        [v(98.53), v(71.90), U, v(92.85), v(53.95), U, v(81.98), v(58.46), U],
        [v(12.61), v(3.69), U, v(18.65), v(6.56), U, v(32.85), v(0.53), U],
    ),
    (
        PayloadBucket::B51_255,
        [v(97.17), v(72.00), U, v(92.89), I, U, v(84.78), I, U],
        [v(5.98), v(0.33), U, v(3.95), I, U, v(10.12), I, U],
    ),
    (
        PayloadBucket::B255_1547,
        [v(99.08), U, U, v(90.63), U, U, v(82.86), U, U],
        [v(1.03), U, U, v(0.81), U, U, v(0.89), U, U],
    ),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasuredCell {
    pub technology: Technology,
    pub bucket: PayloadBucket,
    pub scenario: Scenario,
    pub pdr_pct: Metric,
    pub eb_uwh_per_byte: Metric,
}

/// All 36 cells of the measured delivery/energy table.
pub fn measured_table() -> Vec<MeasuredCell> {
    let mut out = Vec::with_capacity(36);
    for (bucket, pdr, eb) in ROWS.iter() {
        for (col, (scenario, technology)) in COLUMNS.iter().enumerate() {
            out.push(MeasuredCell {
                technology: *technology,
                bucket: *bucket,
                scenario: *scenario,
                pdr_pct: pdr[col],
                eb_uwh_per_byte: eb[col],
            });
        }
    }
    out
}

pub fn measured_cell(tech: Technology, bucket: PayloadBucket, scenario: Scenario) -> Option<MeasuredCell> {
    measured_table().into_iter().find(|c| c.technology == tech && c.bucket == bucket && c.scenario == scenario)
}

/// Two-decimal percentage to the nearest double of the decimal fraction
/// (`93.10` becomes exactly `0.931`, not `0.9309999999999999`).
pub fn pct_to_fraction(pct: f64) -> f64 {
    libm::round(pct * 100.0) / 10_000.0
}

/// Delivery ratio (%) versus node speed for 1-12 byte payloads.
pub fn speed_curve_pct(tech: Technology) -> [(SpeedBucket, f64); 4] {
    let values = match tech {
        Technology::NBIoT => [88.0, 83.0, 86.0, 79.0],
        Technology::LoRaWAN => [51.0, 51.0, 56.0, 43.0],
        Technology::Sigfox => [78.0, 53.0, 34.0, 17.0],
    };
    let b = SpeedBucket::ALL;
    [(b[0], values[0]), (b[1], values[1]), (b[2], values[2]), (b[3], values[3])]
}

/// Energy-measurement error (%) after calibration, one set per technology.
/// Each set reproduces the published box-plot statistics under the Tukey
/// 1.5 IQR whisker rule with linearly interpolated quartiles.
pub fn calibration_residuals_pct(tech: Technology) -> &'static [f64] {
    match tech {
        Technology::LoRaWAN => &LORAWAN_RESIDUALS_PCT,
        Technology::Sigfox => &SIGFOX_RESIDUALS_PCT,
        Technology::NBIoT => &NBIOT_RESIDUALS_PCT,
    }
}

pub const LORAWAN_RESIDUALS_PCT: [f64; 41] = [
    -0.58, -2.86, 0.38, 4.45, 3.64, -0.3, -1.12, -0.44, -0.98, 2.44, //
    2.74, 0.52, -1.82, -4.49, 0.1, 1.83, -0.85, 0.31, 3.34, 1.53, //
    -0.03, 0.93, 0.72, -0.17, 0.65, -2.17, 0.86, 0.79, 1.23, -3.91, //
    -4.25, -0.71, 3.04, 0.45, -2.52, 2.13, -3.21, -3.56, 0.58, -1.47, //
    0.24,
];

pub const SIGFOX_RESIDUALS_PCT: [f64; 41] = [
    -0.39, -1.74, 0.1, 2.46, 2.3, -0.29, -0.6, -0.34, -0.55, 1.65, //
    1.81, 0.29, -1.06, -3.43, -0.13, 1.33, -0.5, 0.01, 2.14, 1.16, //
    -0.18, 0.84, 0.56, -0.24, 0.47, -1.28, 0.75, 0.66, 1.0, -2.42, //
    -3.06, -0.44, 1.97, 0.2, -1.51, 1.49, -1.96, -2.19, 0.38, -0.83, //
    -0.08,
];

pub const NBIOT_RESIDUALS_PCT: [f64; 41] = [
    -0.83, -3.3, 0.36, 3.41, 3.22, -0.54, -1.43, -0.68, -1.28, 2.48, //
    2.66, 0.65, -2.18, -5.17, -0.09, 2.1, -1.13, 0.21, 3.04, 1.91, //
    -0.24, 1.54, 1.1, -0.39, 0.95, -2.55, 1.39, 1.24, 1.73, -4.42, //
    -4.8, -0.98, 2.85, 0.5, -2.93, 2.29, -3.67, -4.05, 0.8, -1.8, //
    0.06,
];
