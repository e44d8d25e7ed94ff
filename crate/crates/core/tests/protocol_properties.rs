//! Trace-level protocol invariants over multi-UE runs.

use scuba_core::engine::check_scenario;
use scuba_core::{HarqConfig, HarqScheme, Scenario, ScubaMode, SlPagingConfig, TrafficModel};

fn mixed(scheme: HarqScheme, seed: u64) -> Scenario {
    use ScubaMode::*;
    Scenario {
        seed,
        n_ue: 6,
        horizon: 1_000_000,
        modes: vec![Sam, Sam, Native, Llm, Sam, Native],
        harq: HarqConfig {
            scheme,
            ..HarqConfig::default()
        },
        sl_paging: SlPagingConfig {
            t_sl_drx: 128,
            ..SlPagingConfig::default()
        },
        sidelink_traffic: TrafficModel::poisson(20_000),
        ..Scenario::default()
    }
}

#[test]
fn invariants_hold_over_mixed_mode_traces() {
    for (scheme, seed) in [(HarqScheme::GrantBased, 5), (HarqScheme::FixedMcs, 6)] {
        let r = check_scenario(&mixed(scheme, seed)).unwrap();
        eprintln!("{scheme:?}: {r:?}");
        assert_eq!(r.tdm_violations, 0);
        assert_eq!(r.half_duplex_violations, 0);
        assert_eq!(r.grant_violations, 0);
        assert_eq!(r.terminal_violations, 0);
        assert!(r.max_duty_cycle < 0.01);
        assert!(r.acked > 100);
        if scheme == HarqScheme::GrantBased {
            assert!(r.grants > 0 && r.grants_honoured > 0);
        }
    }
}

#[test]
fn long_data_central_reporting() {
    let s = Scenario {
        n_ue: 5,
        horizon: 1_000_000,
        mode: ScubaMode::Sam,
        topology: scuba_core::Topology::CentralDst,
        cellular: scuba_core::CellularConfig::long_data(),
        ..Scenario::default()
    };
    let r = check_scenario(&s).unwrap();
    assert!(r.holds(0.01), "{r:?}");
    assert!(r.acked > 50);
}
