use netshock_core::calendar::{Calendar, Period};
use netshock_core::shocks::*;
use netshock_core::stats::{covariance, pearson_correlation, variance};
use netshock_core::synth::{gen_event_shocks, EventDgpSpec};
use proptest::prelude::*;

fn cal() -> Calendar {
    Calendar::new(Period::quarterly(2002, 3), Period::quarterly(2019, 4)).unwrap()
}

fn spec(seed: u64, n: usize) -> EventDgpSpec {
    EventDgpSpec::symmetric(seed, n, 0.4, cal())
}

fn check_algebra(d: &DecomposedShocks) {
    for i in 0..d.v_f.len() {
        assert!((d.v_cs[i] + d.v_cd[i] - d.v_f[i]).abs() <= 1e-12);
    }
    assert!(pearson_correlation(&d.v_cs, &d.d_ebp).unwrap() < 0.0);
    assert!(pearson_correlation(&d.v_cd, &d.d_ebp).unwrap() > 0.0);
    let vf = variance(&d.v_f);
    assert!(((variance(&d.v_cs) + variance(&d.v_cd) - vf) / vf).abs() <= 1e-8);
    let orth = covariance(&d.v_cs, &d.v_cd) / (variance(&d.v_cs) * variance(&d.v_cd)).sqrt();
    assert!(orth.abs() <= 1e-8);
}

#[test]
fn algebra_on_seeded_samples() {
    for seed in 0..20 {
        let (series, _) = gen_event_shocks(&spec(seed, 200)).unwrap();
        check_algebra(&decompose_rotation(&series).unwrap());
    }
}

#[test]
fn algebra_on_asymmetric_loadings() {
    let mut s = spec(3, 200);
    s.supply_sd = 2.0;
    s.demand_loading = (0.5, 1.5);
    let (series, _) = gen_event_shocks(&s).unwrap();
    check_algebra(&decompose_rotation(&series).unwrap());
}

#[test]
fn recovers_known_rotation() {
    let (series, truth) = gen_event_shocks(&spec(2024, 500)).unwrap();
    let d = decompose_rotation(&series).unwrap();
    let err = (d.rotation_angle.unwrap() - truth.angle).abs();
    assert!(err < 0.05, "angle error {err}");
}

#[test]
fn single_factor_samples() {
    let mut s = spec(5, 120);
    s.demand_sd = 0.0;
    let (series, _) = gen_event_shocks(&s).unwrap();
    let d = decompose_rotation(&series).unwrap();
    for (cs, f) in d.v_cs.iter().zip(&d.v_f) {
        assert!((cs - f).abs() < 1e-6);
    }
    let mut s = spec(5, 120);
    s.supply_sd = 0.0;
    let (series, _) = gen_event_shocks(&s).unwrap();
    let d = decompose_rotation(&series).unwrap();
    for (cd, f) in d.v_cd.iter().zip(&d.v_f) {
        assert!((cd - f).abs() < 1e-6);
    }
}

#[test]
fn quarterly_aggregation_has_unit_sd() {
    let (series, _) = gen_event_shocks(&spec(8, 300)).unwrap();
    let d = decompose_rotation(&series).unwrap();
    let agg = aggregate_standardize(&d, cal()).unwrap();
    for s in [&agg.v_cs, &agg.v_cd, &agg.v_f] {
        assert_eq!(s.values.len(), 70);
        assert!((netshock_core::stats::std_dev(&s.values) - 1.0).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn split_is_additive(pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..60)) {
        let events = pairs.iter().enumerate().map(|(i, &(surprise, d_ebp))| ShockEvent {
            timestamp: netshock_core::calendar::Timestamp {
                date: netshock_core::calendar::Date::new(2010, 1, 1).unwrap(),
                minute: i as u16,
            },
            surprise,
            d_ebp,
        }).collect();
        let d = decompose_split(&EventShockSeries::new(events).unwrap()).unwrap();
        for i in 0..d.v_f.len() {
            prop_assert_eq!(d.v_cs[i] + d.v_cd[i], d.v_f[i]);
            prop_assert!(d.v_cs[i] == 0.0 || d.v_cd[i] == 0.0);
        }
    }

    #[test]
    fn rotation_invariants(seed in 0u64..10_000, n in 40usize..250, kappa in 0.1f64..3.0, ratio in 0.3f64..3.0) {
        let mut s = EventDgpSpec::symmetric(seed, n, kappa, cal());
        s.supply_sd = ratio;
        let (series, _) = gen_event_shocks(&s).unwrap();
        let d = decompose_rotation(&series).unwrap();
        check_algebra(&d);

        // scale equivariance
        let c = 3.7;
        let scaled = decompose_rotation(&series.scaled(c)).unwrap();
        prop_assert_eq!(scaled.rotation_angle, d.rotation_angle);
        for i in 0..n {
            prop_assert!((scaled.v_cs[i] - c * d.v_cs[i]).abs() <= 1e-9 * (1.0 + d.v_cs[i].abs()));
        }

        // dominant rotation component carries the sign of the split's nonzero component
        let split = decompose_split(&series).unwrap();
        for i in 0..n {
            let (cs, cd) = (d.v_cs[i], d.v_cd[i]);
            let dominant = if cs.abs() >= cd.abs() { cs } else { cd };
            let nonzero = split.v_cs[i] + split.v_cd[i];
            if d.v_f[i] * d.d_ebp[i] != 0.0 && dominant != 0.0 {
                prop_assert_eq!(dominant > 0.0, nonzero > 0.0);
            }
        }
    }
}
