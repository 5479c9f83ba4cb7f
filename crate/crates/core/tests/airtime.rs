mod oracles;

use proptest::prelude::*;
use ratbench_core::airtime::{
    lora_time_on_air, nbiot_transaction_profile, sigfox_airtime, LoRaParams, NbiotTimingConfig, SigfoxParams,
};
use ratbench_core::RadioState;

fn params(sf: u8, bw: u32) -> LoRaParams {
    let mut p = LoRaParams::lorawan(sf);
    p.bandwidth_hz = bw;
    p.low_data_rate_optimize = p.symbol_time_ms() > 16.0;
    p
}

fn oracle(p: &LoRaParams, n: u32) -> f64 {
    oracles::lora_toa_ms(
        p.sf.into(),
        p.bandwidth_hz.into(),
        p.coding_rate_index.into(),
        p.preamble_symbols.into(),
        p.explicit_header,
        p.crc_on,
        p.low_data_rate_optimize,
        n,
    )
}

#[test]
fn lora_matches_symbol_count_oracle_on_grid() {
    let payloads = [1, 5, 12, 13, 51, 52, 100, 200, 255, 256];
    let mut cases = 0;
    for sf in 7..=12 {
        for bw in [125_000, 250_000, 500_000] {
            let p = params(sf, bw);
            for n in payloads {
                let got = lora_time_on_air(&p, n).unwrap().total_on_air_ms;
                let want = oracle(&p, n);
                assert!((got - want).abs() / want < 1e-3, "sf{sf} bw{bw} n{n}: {got} vs {want}");
                cases += 1;
            }
        }
    }
    assert!(cases >= 180);
}

#[test]
fn lora_reference_values() {
    let sf7 = lora_time_on_air(&LoRaParams::lorawan(7), 12).unwrap().total_on_air_ms;
    assert!((sf7 - 41.216).abs() < 1e-9);
    let sf12 = lora_time_on_air(&LoRaParams::lorawan(12), 12).unwrap().total_on_air_ms;
    assert!((sf12 - 1155.072).abs() < 1e-9);
    assert!((sf7 - oracle(&LoRaParams::lorawan(7), 12)).abs() < 1e-9);
}

#[test]
fn sigfox_matches_bit_count_oracle_exactly() {
    let p = SigfoxParams::default();
    for n in 1..=12 {
        let prof = sigfox_airtime(&p, n).unwrap();
        let frame = oracles::sigfox_frame_ms(n, 14, 100.0);
        let tx: Vec<f64> = prof.tx_phases().map(|ph| ph.duration_ms).collect();
        assert_eq!(tx, vec![frame; 3]);
        assert_eq!(prof.total_on_air_ms, 3.0 * frame);
    }
    assert_eq!(sigfox_airtime(&p, 12).unwrap().total_on_air_ms, 6240.0);
    assert_eq!(sigfox_airtime(&p, 1).unwrap().total_on_air_ms, 3600.0);
}

#[test]
fn nbiot_tx_uses_ceiling_of_128_byte_units() {
    let cfg = NbiotTimingConfig::default();
    let prof = nbiot_transaction_profile(&cfg, 1547, 0, true).unwrap();
    let tx: f64 = prof.tx_phases().map(|p| p.duration_ms).sum();
    assert_eq!(tx, 13.0 * cfg.tx_ms_per_128b);
    let single = nbiot_transaction_profile(&cfg, 128, 0, true).unwrap();
    assert_eq!(single.total_duration_ms(), cfg.tx_ms_per_128b + cfg.inactivity_timer_ms + cfg.psm_entry_ms);
    assert!(single.phases.iter().all(|p| p.state != RadioState::Rx || p.name != "attach"));
}

proptest! {
    #[test]
    fn lora_monotone_and_bandwidth_scaling(sf in 7u8..=12, n in 1u32..256) {
        let p = params(sf, 125_000);
        let t = lora_time_on_air(&p, n).unwrap().total_on_air_ms;
        prop_assert!(lora_time_on_air(&p, n + 1).unwrap().total_on_air_ms >= t);
        if sf < 12 {
            prop_assert!(lora_time_on_air(&params(sf + 1, 125_000), n).unwrap().total_on_air_ms >= t);
        }
        // Same LDRO setting on both sides so only the symbol time changes.
        let mut wide = p;
        wide.bandwidth_hz = 250_000;
        let half = lora_time_on_air(&wide, n).unwrap().total_on_air_ms;
        prop_assert!((2.0 * half - t).abs() < 1e-9);
    }

    #[test]
    fn sigfox_total_is_three_frames(n in 1u32..=12) {
        let p = SigfoxParams::default();
        let prof = sigfox_airtime(&p, n).unwrap();
        prop_assert_eq!(prof.tx_phases().count(), 3);
        prop_assert_eq!(prof.total_on_air_ms, 3.0 * p.frame_ms(n));
    }

    #[test]
    fn nbiot_tx_monotone(n in 1u32..1547, ce in 0u8..2) {
        let cfg = NbiotTimingConfig::default();
        let tx = |n, ce| -> f64 { nbiot_transaction_profile(&cfg, n, ce, false).unwrap().total_on_air_ms };
        prop_assert!(tx(n + 1, ce) >= tx(n, ce));
        prop_assert!(tx(n, ce + 1) >= tx(n, ce));
    }
}
