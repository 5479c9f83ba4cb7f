//! Fitting power profiles to measured energy-per-byte cells.
//!
//! Each (technology, scenario) gets an affine base model
//! `E(n) = overhead + k_tx · E_tx(n) + E_other(n)` where `E_tx`/`E_other` come
//! from the link timeline priced at the default power profile. `overhead` and
//! `k_tx` are fitted by least squares on `log(E_b)`. Measured cells are not
//! monotone enough for any affine model to match every bucket, so each target
//! bucket also gets a multiplicative correction that makes the model
//! reproduce the cell exactly; the base fit residual is reported alongside.
//!
//! Bucket predictions are ratio-of-sums over a uniform payload distribution
//! within the bucket, which is the same estimator the aggregation report
//! applies to sampled records.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{split_energy, transaction_energy, EnergyError, PowerProfile};
use crate::airtime::{AirtimeError, LinkSettings};
use crate::model::{bucket_of, AggregateCell, Metric, PayloadBucket, Scenario, Technology};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("no usable energy-per-byte target cells")]
    NoTargets,
    #[error("target {technology}/{bucket}/{scenario} is not fittable: {reason}")]
    BadTarget { technology: Technology, bucket: PayloadBucket, scenario: Scenario, reason: &'static str },
    #[error("no fitted model for {0} in {1}")]
    NoModel(Technology, Scenario),
    #[error(transparent)]
    Airtime(#[from] AirtimeError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyTarget {
    pub technology: Technology,
    pub bucket: PayloadBucket,
    pub scenario: Scenario,
    pub eb_uwh_per_byte: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitNote {
    /// Fewer target cells than free parameters; only the fixed overhead was
    /// fitted (transmit power held at its default where possible).
    Underdetermined { cells: usize, free_parameters: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BucketScale {
    pub bucket: PayloadBucket,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedEntry {
    pub technology: Technology,
    pub scenario: Scenario,
    pub power: PowerProfile,
    /// Factor applied to the default transmit power table.
    pub tx_scale: f64,
    /// Per-bucket corrections; buckets without a target use 1.0.
    pub bucket_scale: Vec<BucketScale>,
    pub targets: Vec<EnergyTarget>,
    /// RMS of `log(predicted) - log(target)` of the base fit.
    pub base_residual_rms: f64,
    #[serde(default)]
    pub note: Option<FitNote>,
}

impl FittedEntry {
    pub fn scale_for(&self, bucket: PayloadBucket) -> f64 {
        self.bucket_scale.iter().find(|b| b.bucket == bucket).map_or(1.0, |b| b.scale)
    }
}

/// Fitted energy model for every (technology, scenario) that had targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub link: LinkSettings,
    pub entries: Vec<FittedEntry>,
}

impl FittedModel {
    pub fn entry(&self, tech: Technology, scenario: Scenario) -> Option<&FittedEntry> {
        self.entries.iter().find(|e| e.technology == tech && e.scenario == scenario)
    }

    fn require(&self, tech: Technology, scenario: Scenario) -> Result<&FittedEntry, FitError> {
        self.entry(tech, scenario).ok_or(FitError::NoModel(tech, scenario))
    }

    /// Energy of the affine base model without bucket corrections.
    pub fn base_energy_uwh(&self, tech: Technology, scenario: Scenario, payload_bytes: u32) -> Result<f64, FitError> {
        let entry = self.require(tech, scenario)?;
        let profile = self.link.transaction(tech, payload_bytes)?;
        Ok(transaction_energy(&profile, &entry.power, self.link.tx_power_dbm(tech))?)
    }

    pub fn energy_uwh(&self, tech: Technology, scenario: Scenario, payload_bytes: u32) -> Result<f64, FitError> {
        let entry = self.require(tech, scenario)?;
        let bucket = bucket_of(payload_bytes).map_err(|_| AirtimeError::PayloadExceedsMax(tech, payload_bytes))?;
        Ok(self.base_energy_uwh(tech, scenario, payload_bytes)? * entry.scale_for(bucket))
    }

    /// Ratio-of-sums energy per byte over a uniform payload mix in `bucket`.
    pub fn predicted_eb(&self, tech: Technology, scenario: Scenario, bucket: PayloadBucket) -> Result<f64, FitError> {
        let entry = self.require(tech, scenario)?;
        let (lo, hi) = bucket.range_for(tech).ok_or(AirtimeError::PayloadExceedsMax(tech, bucket.range().0))?;
        let (mut e, mut b) = (0.0, 0.0);
        for n in lo..=hi {
            e += self.base_energy_uwh(tech, scenario, n)?;
            b += n as f64;
        }
        Ok(entry.scale_for(bucket) * e / b)
    }
}

/// Energy sums over every payload in a bucket, priced at `power` without
/// the fixed overhead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BucketSums {
    pub count: f64,
    pub bytes: f64,
    pub tx_uwh: f64,
    pub rest_uwh: f64,
}

impl BucketSums {
    fn predict(&self, overhead: f64, tx_scale: f64) -> f64 {
        (self.count * overhead + tx_scale * self.tx_uwh + self.rest_uwh) / self.bytes
    }
}

pub fn bucket_sums(
    tech: Technology,
    bucket: PayloadBucket,
    link: &LinkSettings,
    power: &PowerProfile,
) -> Result<Option<BucketSums>, FitError> {
    let Some((lo, hi)) = bucket.range_for(tech) else {
        return Ok(None);
    };
    let dbm = link.tx_power_dbm(tech);
    let mut s = BucketSums { count: 0.0, bytes: 0.0, tx_uwh: 0.0, rest_uwh: 0.0 };
    for n in lo..=hi {
        let (tx, rest) = split_energy(&link.transaction(tech, n)?, power, dbm)?;
        s.count += 1.0;
        s.bytes += n as f64;
        s.tx_uwh += tx;
        s.rest_uwh += rest;
    }
    Ok(Some(s))
}

pub fn fit_power_profiles(targets: &[AggregateCell], link: &LinkSettings) -> Result<FittedModel, FitError> {
    fit_power_profiles_with(targets, link, PowerProfile::default_for)
}

/// As [`fit_power_profiles`] with caller-supplied starting profiles.
pub fn fit_power_profiles_with(
    targets: &[AggregateCell],
    link: &LinkSettings,
    base_profile: impl Fn(Technology) -> PowerProfile,
) -> Result<FittedModel, FitError> {
    let mut usable: Vec<EnergyTarget> = Vec::new();
    for cell in targets {
        let Metric::Value(eb) = cell.eb_uwh_per_byte else {
            continue;
        };
        let bad = |reason| FitError::BadTarget {
            technology: cell.technology,
            bucket: cell.bucket,
            scenario: cell.scenario,
            reason,
        };
        if !cell.bucket.supported_by(cell.technology) {
            return Err(bad("bucket exceeds the technology maximum payload"));
        }
        if !(eb.is_finite() && eb > 0.0) {
            return Err(bad("energy per byte must be positive"));
        }
        cell.scenario.validate().map_err(|_| bad("invalid scenario"))?;
        usable.push(EnergyTarget {
            technology: cell.technology,
            bucket: cell.bucket,
            scenario: cell.scenario,
            eb_uwh_per_byte: eb,
        });
    }
    if usable.is_empty() {
        return Err(FitError::NoTargets);
    }

    let mut entries = Vec::new();
    for tech in Technology::ALL {
        for scenario in Scenario::ALL {
            let group: Vec<EnergyTarget> =
                usable.iter().copied().filter(|t| t.technology == tech && t.scenario == scenario).collect();
            if group.is_empty() {
                continue;
            }
            entries.push(fit_group(tech, scenario, group, link, base_profile(tech))?);
        }
    }
    Ok(FittedModel { link: link.clone(), entries })
}

fn fit_group(
    tech: Technology,
    scenario: Scenario,
    targets: Vec<EnergyTarget>,
    link: &LinkSettings,
    base: PowerProfile,
) -> Result<FittedEntry, FitError> {
    let mut cells = Vec::with_capacity(targets.len());
    for t in &targets {
        // Support was checked by the caller.
        let sums = bucket_sums(tech, t.bucket, link, &base)?.ok_or(FitError::NoTargets)?;
        cells.push((sums, t.eb_uwh_per_byte));
    }

    let (overhead, tx_scale, note) = if cells.len() < 2 {
        let (a, s) = fit_overhead_only(&cells[0]);
        (a, s, Some(FitNote::Underdetermined { cells: cells.len(), free_parameters: 2 }))
    } else {
        let (a, s) = fit_overhead_and_tx(&cells);
        (a, s, None)
    };

    let mut power = base.with_tx_scale(tx_scale);
    power.fixed_overhead_uwh = overhead;

    let mut sq = 0.0;
    let mut bucket_scale = Vec::with_capacity(cells.len());
    for (t, (sums, target)) in targets.iter().zip(&cells) {
        let pred = sums.predict(overhead, tx_scale);
        let r = libm::log(pred.max(f64::MIN_POSITIVE)) - libm::log(*target);
        sq += r * r;
        bucket_scale.push(BucketScale { bucket: t.bucket, scale: target / pred });
    }

    Ok(FittedEntry {
        technology: tech,
        scenario,
        power,
        tx_scale,
        bucket_scale,
        base_residual_rms: libm::sqrt(sq / cells.len() as f64),
        targets,
        note,
    })
}

/// One equation: solve for the overhead at default transmit power, falling
/// back to the transmit scale when the overhead would go negative.
fn fit_overhead_only((s, target): &(BucketSums, f64)) -> (f64, f64) {
    let need = target * s.bytes;
    let a = (need - s.tx_uwh - s.rest_uwh) / s.count;
    if a >= 0.0 {
        return (a, 1.0);
    }
    let k = if s.tx_uwh > 0.0 { ((need - s.rest_uwh) / s.tx_uwh).max(0.0) } else { 0.0 };
    (0.0, k)
}

fn log_objective(cells: &[(BucketSums, f64)], a: f64, s: f64) -> f64 {
    cells
        .iter()
        .map(|(c, y)| {
            let p = c.predict(a, s);
            if p <= 0.0 {
                return f64::INFINITY;
            }
            let r = libm::log(p) - libm::log(*y);
            r * r
        })
        .sum()
}

fn fit_overhead_and_tx(cells: &[(BucketSums, f64)]) -> (f64, f64) {
    // Start from non-negative least squares on relative error, which is
    // linear in (overhead, tx_scale).
    let (mut suu, mut suv, mut svv, mut suw, mut svw) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (c, y) in cells {
        let d = c.bytes * y;
        let (u, v, w) = (c.count / d, c.tx_uwh / d, 1.0 - c.rest_uwh / d);
        suu += u * u;
        suv += u * v;
        svv += v * v;
        suw += u * w;
        svw += v * w;
    }
    let mut candidates = Vec::with_capacity(3);
    let det = suu * svv - suv * suv;
    if det.abs() > 1e-18 * (suu * svv).max(1e-300) {
        let a = (suw * svv - svw * suv) / det;
        let s = (svw * suu - suw * suv) / det;
        if a >= 0.0 && s >= 0.0 {
            candidates.push((a, s));
        }
    }
    if svv > 0.0 {
        candidates.push((0.0, (svw / svv).max(0.0)));
    }
    if suu > 0.0 {
        candidates.push(((suw / suu).max(0.0), 0.0));
    }
    let (mut a, mut s) = candidates
        .into_iter()
        .filter(|(a, s)| log_objective(cells, *a, *s).is_finite())
        .min_by(|x, y| log_objective(cells, x.0, x.1).total_cmp(&log_objective(cells, y.0, y.1)))
        .unwrap_or((1.0, 1.0));

    // Refine on the log objective with a projected Levenberg-Marquardt.
    let mut obj = log_objective(cells, a, s);
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let (mut h11, mut h12, mut h22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (c, y) in cells {
            let p = c.predict(a, s);
            let r = libm::log(p) - libm::log(*y);
            let j1 = c.count / (c.bytes * p);
            let j2 = c.tx_uwh / (c.bytes * p);
            h11 += j1 * j1;
            h12 += j1 * j2;
            h22 += j2 * j2;
            g1 += j1 * r;
            g2 += j2 * r;
        }
        let (d11, d22) = (h11 * (1.0 + lambda) + 1e-30, h22 * (1.0 + lambda) + 1e-30);
        let det = d11 * d22 - h12 * h12;
        if det <= 0.0 {
            break;
        }
        let da = -(g1 * d22 - g2 * h12) / det;
        let ds = -(g2 * d11 - g1 * h12) / det;
        let (na, ns) = ((a + da).max(0.0), (s + ds).max(0.0));
        let nobj = log_objective(cells, na, ns);
        if nobj < obj {
            let converged = obj - nobj < 1e-16 * (1.0 + obj);
            a = na;
            s = ns;
            obj = nobj;
            lambda = (lambda / 3.0).max(1e-12);
            if converged {
                break;
            }
        } else {
            lambda *= 4.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    (a, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn target(tech: Technology, bucket: PayloadBucket, scenario: Scenario, eb: f64) -> AggregateCell {
        let mut cell = AggregateCell::from_sums(tech, bucket, scenario, 100, 100, 0.0, 0, 10);
        cell.eb_uwh_per_byte = Metric::Value(eb);
        cell
    }

    #[test]
    fn single_cell_fits_overhead_exactly() {
        let link = LinkSettings::default();
        let cells = [target(Technology::NBIoT, PayloadBucket::B1_12, Scenario::STATIC_INDOOR, 60.52)];
        let m = fit_power_profiles(&cells, &link).unwrap();
        let e = m.entry(Technology::NBIoT, Scenario::STATIC_INDOOR).unwrap();
        assert!(matches!(e.note, Some(FitNote::Underdetermined { cells: 1, .. })));
        assert!(e.base_residual_rms < 1e-12, "{}", e.base_residual_rms);
        let eb = m.predicted_eb(Technology::NBIoT, Scenario::STATIC_INDOOR, PayloadBucket::B1_12).unwrap();
        assert!((eb - 60.52).abs() < 1e-9);
    }

    #[test]
    fn single_cell_above_default_keeps_tx_power() {
        let link = LinkSettings::default();
        let cells = [target(Technology::NBIoT, PayloadBucket::B1_12, Scenario::STATIC_INDOOR, 200.0)];
        let m = fit_power_profiles(&cells, &link).unwrap();
        let e = m.entry(Technology::NBIoT, Scenario::STATIC_INDOOR).unwrap();
        assert_eq!(e.tx_scale, 1.0);
        assert!(e.power.fixed_overhead_uwh > 0.0);
        assert!(e.base_residual_rms < 1e-12);
    }

    #[test]
    fn rejects_empty_and_unsupported_targets() {
        let link = LinkSettings::default();
        assert_eq!(fit_power_profiles(&[], &link), Err(FitError::NoTargets));
        let bad = [target(Technology::Sigfox, PayloadBucket::B12_51, Scenario::STATIC_INDOOR, 5.0)];
        assert!(matches!(fit_power_profiles(&bad, &link), Err(FitError::BadTarget { .. })));
    }

    #[test]
    fn missing_entry_is_an_error() {
        let link = LinkSettings::default();
        let cells = [target(Technology::NBIoT, PayloadBucket::B1_12, Scenario::STATIC_INDOOR, 60.52)];
        let m = fit_power_profiles(&cells, &link).unwrap();
        assert_eq!(
            m.energy_uwh(Technology::LoRaWAN, Scenario::STATIC_INDOOR, 10),
            Err(FitError::NoModel(Technology::LoRaWAN, Scenario::STATIC_INDOOR))
        );
    }
}
