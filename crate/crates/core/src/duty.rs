//! Duty-cycle bookkeeping for license-exempt bands.
//!
//! [`DutyCycleLedger::next_allowed`] combines two constraints:
//!
//! * the per-packet off-time rule used by LoRaWAN stacks: after a packet of
//!   on-air time `ToA`, stay silent for `ToA * (1/d - 1)`;
//! * the observation-window rule: over every window of at least `window_ms`
//!   (one hour by default) the summed on-air time stays below `d * window`.
//!
//! The per-packet rule alone can exceed the window budget by up to one
//! packet when the window length is not a multiple of the packet period, so
//! the earliest start is the maximum of both bounds.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub const HOUR_MS: u64 = 3_600_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxEntry {
    pub start_ms: u64,
    pub on_air_ms: f64,
}

impl TxEntry {
    pub fn end_ms(&self) -> f64 {
        self.start_ms as f64 + self.on_air_ms
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DutyError {
    #[error("transmission at {start_ms} ms overlaps or precedes the previous one ending at {prev_end_ms} ms")]
    OutOfOrder { start_ms: u64, prev_end_ms: f64 },
    #[error("on-air time must be positive and finite")]
    BadOnAir,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DutyCycleLedger {
    pub band_limit: f64,
    #[serde(default = "default_window")]
    pub window_ms: u64,
    #[serde(default)]
    pub history: Vec<TxEntry>,
}

fn default_window() -> u64 {
    HOUR_MS
}

impl Default for DutyCycleLedger {
    fn default() -> Self {
        Self::new(0.01)
    }
}

impl DutyCycleLedger {
    pub fn new(band_limit: f64) -> Self {
        DutyCycleLedger { band_limit, window_ms: HOUR_MS, history: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    pub fn total_on_air_ms(&self) -> f64 {
        self.history.iter().map(|e| e.on_air_ms).sum()
    }

    /// Earliest integer millisecond `t >= now_ms` at which a transmission of
    /// `intended_on_air_ms` may start.
    pub fn next_allowed(&self, now_ms: u64, intended_on_air_ms: f64) -> u64 {
        let Some(last) = self.history.last() else {
            return now_ms;
        };
        let d = self.band_limit;
        let a = intended_on_air_ms.max(0.0);
        let budget = d * self.window_ms as f64;

        let per_packet = last.end_ms() + last.on_air_ms * (1.0 / d - 1.0);
        let mut earliest = per_packet;

        // Long windows: every window starting at an old packet and ending
        // with the new one must stay within d * length.
        let mut suffix = 0.0;
        for e in self.history.iter().rev() {
            suffix += e.on_air_ms;
            if suffix + a > budget {
                earliest = earliest.max(e.start_ms as f64 + (suffix + a) / d - a);
            }
        }

        // The window of exactly `window_ms` that ends with the new packet.
        if a <= budget {
            let room = budget - a;
            let mut after = 0.0;
            for e in self.history.iter().rev() {
                if after + e.on_air_ms > room {
                    let window_start = e.end_ms() - (room - after);
                    earliest = earliest.max(window_start - a + self.window_ms as f64);
                    break;
                }
                after += e.on_air_ms;
            }
        }

        now_ms.max(libm::ceil(earliest - 1e-9) as u64)
    }

    pub fn record(&mut self, start_ms: u64, on_air_ms: f64) -> Result<(), DutyError> {
        if !(on_air_ms.is_finite() && on_air_ms > 0.0) {
            return Err(DutyError::BadOnAir);
        }
        if let Some(last) = self.history.last() {
            if (start_ms as f64) < last.end_ms() {
                return Err(DutyError::OutOfOrder { start_ms, prev_end_ms: last.end_ms() });
            }
        }
        self.history.push(TxEntry { start_ms, on_air_ms });
        Ok(())
    }

    /// Schedules a transmission at the earliest allowed time and records it.
    pub fn transmit(&mut self, now_ms: u64, on_air_ms: f64) -> Result<u64, DutyError> {
        let t = self.next_allowed(now_ms, on_air_ms);
        self.record(t, on_air_ms)?;
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_ledger_allows_now() {
        assert_eq!(DutyCycleLedger::default().next_allowed(0, 100.0), 0);
        assert_eq!(DutyCycleLedger::default().next_allowed(42, 100.0), 42);
    }

    #[test]
    fn off_time_after_one_packet() {
        let mut l = DutyCycleLedger::new(0.01);
        l.record(0, 1000.0).unwrap();
        assert_eq!(l.next_allowed(0, 1000.0), 100_000);
        assert_eq!(l.next_allowed(150_000, 1000.0), 150_000);
    }

    #[test]
    fn sigfox_silence() {
        let mut l = DutyCycleLedger::new(0.01);
        l.record(0, 6240.0).unwrap();
        let t = l.next_allowed(0, 6240.0);
        assert_eq!(t - 6240, 617_760);
    }

    #[test]
    fn window_rule_tightens_periodic_schedule() {
        // 1300 ms packets at the per-packet period would put 28 packets in
        // one hour (36.4 s of on-air).
        let mut l = DutyCycleLedger::new(0.01);
        let mut now = 0;
        for _ in 0..40 {
            now = l.transmit(now, 1300.0).unwrap();
        }
        let starts: Vec<u64> = l.history.iter().map(|e| e.start_ms).collect();
        for (i, &s) in starts.iter().enumerate() {
            let in_window = starts[i..].iter().filter(|&&x| x as f64 + 1300.0 <= s as f64 + 3_600_000.0).count();
            assert!(in_window as f64 * 1300.0 <= 36_000.0 + 1e-6);
        }
    }

    #[test]
    fn record_rejects_overlap() {
        let mut l = DutyCycleLedger::new(0.01);
        l.record(1000, 500.0).unwrap();
        assert!(matches!(l.record(1200, 10.0), Err(DutyError::OutOfOrder { .. })));
        assert_eq!(l.record(1600, 0.0), Err(DutyError::BadOnAir));
    }
}
