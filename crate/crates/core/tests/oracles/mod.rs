//! Independent reference implementations used only to check the library.
#![allow(dead_code)]

/// SX1276 datasheet time on air in ms, written out term by term.
#[allow(clippy::too_many_arguments)]
pub fn lora_toa_ms(
    sf: u32,
    bw_hz: f64,
    cr: u32,
    preamble: u32,
    explicit_header: bool,
    crc: bool,
    ldro: bool,
    pl: u32,
) -> f64 {
    let t_sym = f64::from(1u32 << sf) / bw_hz * 1000.0;
    let t_preamble = (f64::from(preamble) + 4.25) * t_sym;
    let ih = if explicit_header { 0.0 } else { 1.0 };
    let de = if ldro { 1.0 } else { 0.0 };
    let crc = if crc { 1.0 } else { 0.0 };
    let num = 8.0 * f64::from(pl) - 4.0 * f64::from(sf) + 28.0 + 16.0 * crc - 20.0 * ih;
    let den = 4.0 * (f64::from(sf) - 2.0 * de);
    let payload_symb = 8.0 + ((num / den).ceil() * f64::from(cr + 4)).max(0.0);
    t_preamble + payload_symb * t_sym
}

/// Sigfox frame length in ms: every bit at the bit rate.
pub fn sigfox_frame_ms(payload: u32, overhead: u32, bps: f64) -> f64 {
    f64::from((payload + overhead) * 8) * 1000.0 / bps
}

/// On-air time of `txs` (start, duration) inside [x, y].
fn on_air_within(txs: &[(f64, f64)], x: f64, y: f64) -> f64 {
    txs.iter().map(|&(s, a)| ((s + a).min(y) - s.max(x)).max(0.0)).sum()
}

/// Largest excess `on_air - limit * length` over every window of length at
/// least `window`. Candidate windows: start at a transmission start and end
/// at a transmission end, or exactly `window` long anchored at any boundary.
pub fn worst_window_excess(txs: &[(f64, f64)], limit: f64, window: f64) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    let mut check = |x: f64, y: f64| {
        let excess = on_air_within(txs, x, y) - limit * (y - x);
        if excess > worst {
            worst = excess;
        }
    };
    for &(s, _) in txs {
        for &(s2, a2) in txs {
            let e = s2 + a2;
            if e - s >= window {
                check(s, e);
            }
        }
    }
    for &(s, a) in txs {
        for p in [s, s + a] {
            check(p, p + window);
            check(p - window, p);
        }
    }
    worst
}

#[derive(Clone, Copy, Debug)]
pub struct OracleRung {
    pub attempts: u32,
    pub energy: f64,
    pub p: f64,
    pub confirmed: bool,
}

/// Walks the full outcome tree; returns (expected energy, delivery probability).
pub fn ladder_tree(rungs: &[OracleRung]) -> (f64, f64) {
    fn walk(
        rungs: &[OracleRung],
        rung: usize,
        attempt: u32,
        delivered: bool,
        prob: f64,
        spent: f64,
        acc: &mut (f64, f64),
    ) {
        let Some(r) = rungs.get(rung) else {
            acc.0 += prob * spent;
            if delivered {
                acc.1 += prob;
            }
            return;
        };
        if attempt == r.attempts {
            if r.confirmed && !delivered {
                walk(rungs, rung + 1, 0, delivered, prob, spent, acc);
            } else {
                // A blind rung ends the ladder.
                walk(&[], 0, 0, delivered, prob, spent, acc);
            }
            return;
        }
        let spent = spent + r.energy;
        if r.p > 0.0 {
            if r.confirmed {
                walk(&[], 0, 0, true, prob * r.p, spent, acc);
            } else {
                walk(rungs, rung, attempt + 1, true, prob * r.p, spent, acc);
            }
        }
        if r.p < 1.0 {
            walk(rungs, rung, attempt + 1, delivered, prob * (1.0 - r.p), spent, acc);
        }
    }
    let mut acc = (0.0, 0.0);
    walk(rungs, 0, 0, false, 1.0, 0.0, &mut acc);
    acc
}

/// Box statistics for 4k+1 samples, where every quartile lands on a sample.
pub fn box_stats_4k1(xs: &[f64]) -> (f64, f64, f64, f64, f64, Vec<f64>) {
    assert_eq!(xs.len() % 4, 1);
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = (v.len() - 1) / 4;
    let (q1, med, q3) = (v[k], v[2 * k], v[3 * k]);
    let iqr = q3 - q1;
    let inside: Vec<f64> = v.iter().copied().filter(|x| *x >= q1 - 1.5 * iqr && *x <= q3 + 1.5 * iqr).collect();
    let outliers = v.iter().copied().filter(|x| *x < q1 - 1.5 * iqr || *x > q3 + 1.5 * iqr).collect();
    (med, q1, q3, inside[0], *inside.last().unwrap(), outliers)
}
