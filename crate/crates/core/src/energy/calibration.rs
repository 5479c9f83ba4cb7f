use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::Technology;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CalibrationError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("energy readings must be positive and finite")]
    NonPositiveEnergy,
}

/// Multiplicative correction mapping coulomb-counter readings onto the
/// reference instrument.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFactor {
    pub scale: f64,
    pub n_samples: usize,
    pub technology: Technology,
}

impl CalibrationFactor {
    pub fn apply(&self, device_uwh: f64) -> f64 {
        self.scale * device_uwh
    }
}

/// Least-squares scale through the origin: `argmin Σ (k·device − reference)²`.
pub fn calibrate_scale(technology: Technology, pairs: &[(f64, f64)]) -> Result<CalibrationFactor, CalibrationError> {
    if pairs.len() < 2 {
        return Err(CalibrationError::TooFewSamples { needed: 2, got: pairs.len() });
    }
    let (mut dr, mut dd) = (0.0, 0.0);
    for &(device, reference) in pairs {
        if !(device.is_finite() && reference.is_finite() && device > 0.0 && reference > 0.0) {
            return Err(CalibrationError::NonPositiveEnergy);
        }
        dr += device * reference;
        dd += device * device;
    }
    Ok(CalibrationFactor { scale: dr / dd, n_samples: pairs.len(), technology })
}

/// Box-plot summary in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub median: f64,
    pub lower_quartile: f64,
    pub upper_quartile: f64,
    pub lower_whisker: f64,
    pub upper_whisker: f64,
    /// Ascending.
    pub outliers: Vec<f64>,
}

/// Linearly interpolated quartiles; whiskers at the most extreme samples
/// within 1.5 IQR of the quartiles; everything beyond is an outlier.
pub fn residual_box_stats(residuals_pct: &[f64]) -> Result<BoxStats, CalibrationError> {
    if residuals_pct.len() < 5 {
        return Err(CalibrationError::TooFewSamples { needed: 5, got: residuals_pct.len() });
    }
    let mut xs = residuals_pct.to_vec();
    xs.sort_by(f64::total_cmp);

    let q = |p: f64| {
        let h = (xs.len() - 1) as f64 * p;
        let lo = libm::floor(h) as usize;
        let hi = (lo + 1).min(xs.len() - 1);
        xs[lo] + (h - lo as f64) * (xs[hi] - xs[lo])
    };
    let (q1, median, q3) = (q(0.25), q(0.5), q(0.75));
    let reach = 1.5 * (q3 - q1);
    let (lo_fence, hi_fence) = (q1 - reach, q3 + reach);

    let inside = || xs.iter().copied().filter(|x| *x >= lo_fence && *x <= hi_fence);
    // The quartiles themselves are always inside the fences, so these exist.
    let lower_whisker = inside().next().unwrap_or(q1).min(q1);
    let upper_whisker = inside().next_back().unwrap_or(q3).max(q3);
    let outliers = xs.iter().copied().filter(|x| *x < lo_fence || *x > hi_fence).collect();

    Ok(BoxStats { median, lower_quartile: q1, upper_quartile: q3, lower_whisker, upper_whisker, outliers })
}
