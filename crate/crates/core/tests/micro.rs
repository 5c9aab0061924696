use netshock_core::calendar::{Calendar, Period};
use netshock_core::cluster::{oneway_cluster_cov, robust_cov, twoway_cluster_cov};
use netshock_core::linalg::{independent_columns, least_squares, Matrix, Vector};
use netshock_core::micro::*;
use netshock_core::rng;
use netshock_core::shocks::PeriodShockSeries;
use netshock_core::stats::{mean, quantile, std_dev};
use netshock_core::synth::*;
use netshock_core::Error;
use proptest::prelude::*;

fn months(years: i32) -> Calendar {
    Calendar::new(Period::monthly(2010, 1), Period::monthly(2009 + years, 12)).unwrap()
}

fn firm_spec() -> InteractionSpec {
    InteractionSpec {
        interactions: vec!["leverage".into(), "fc_share".into()],
        fe: vec![Key::firm_month(), Key::bank_month(), Key::currency()],
        cluster: vec![Key::firm(), Key::month()],
        weighted: false,
        include_main_effect: false,
        ..Default::default()
    }
}

fn bank_spec() -> InteractionSpec {
    InteractionSpec { macro_controls: vec!["activity".into()], ..Default::default() }
}

/// Small firm-level registry with random weights.
fn small_registry(seed: u64, firms: usize, years: i32) -> (MicroFrame, PeriodShockSeries) {
    let mut spec = RegistryDgpSpec::firm_level(seed, months(years));
    spec.n_firms = firms;
    spec.n_banks = 4;
    spec.banks_per_firm = 2;
    spec.size_sd = 0.7;
    let (f, s, _) = gen_micro_registry(&spec).unwrap();
    (f, s)
}

/// Dummy-variable WLS: indicator columns for every FE group, then the
/// design; returns the key coefficients.
fn dummy_coefficients(frame: &MicroFrame, shock: &PeriodShockSeries, spec: &InteractionSpec) -> Vec<f64> {
    let d = interaction_design(frame, shock, spec).unwrap();
    let n = d.rows.len();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for key in &spec.fe {
        let kv = frame.key_values(key).unwrap();
        let keys: Vec<Vec<i64>> = d.rows.iter().map(|&i| kv[i].clone()).collect();
        let g = FeGroups::from_keys(&keys);
        for j in 0..g.count {
            cols.push(g.ids.iter().map(|&id| (id == j) as u8 as f64).collect());
        }
    }
    let n_dummy = cols.len();
    for j in 0..d.x.ncols() {
        cols.push(d.x.column(j).iter().copied().collect());
    }
    let x = Matrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
    let wx = match &d.weights {
        Some(w) => Matrix::from_fn(n, x.ncols(), |i, j| x[(i, j)] * w[i].sqrt()),
        None => x.clone(),
    };
    let keep = independent_columns(&wx, 1e-10);
    let xk = Matrix::from_fn(n, keep.len(), |i, j| x[(i, keep[j])]);
    let fit = least_squares(&xk, &d.y, d.weights.as_deref()).unwrap();
    let first_key = n_dummy + d.x.ncols() - d.n_key;
    keep.iter().enumerate().filter(|(_, &c)| c >= first_key).map(|(k, _)| fit.coef[k]).collect()
}

#[test]
fn absorbed_regression_matches_dummy_ols() {
    for seed in 0..10 {
        let (f, s) = small_registry(seed, 12, 1);
        let mut spec = firm_spec();
        spec.weighted = true;
        let r = lp_interaction(&f, &s, &spec).unwrap();
        assert!(r.nobs <= 500, "{} rows", r.nobs);
        let oracle = dummy_coefficients(&f, &s, &spec);
        assert_eq!(oracle.len(), r.terms.len());
        for ((name, t), o) in r.terms.iter().zip(&oracle) {
            assert!((t.coef - o).abs() <= 1e-8 * (1.0 + o.abs()), "seed {seed} {name}: {} vs {o}", t.coef);
        }
    }
}

#[test]
fn absorbed_residuals_are_orthogonal_to_indicators() {
    let (f, s) = small_registry(3, 15, 2);
    let spec = InteractionSpec { weighted: true, ..firm_spec() };
    let d = interaction_design(&f, &s, &spec).unwrap();
    let groups: Vec<FeGroups> = spec
        .fe
        .iter()
        .map(|k| {
            let kv = f.key_values(k).unwrap();
            FeGroups::from_keys(&d.rows.iter().map(|&i| kv[i].clone()).collect::<Vec<_>>())
        })
        .collect();
    let w = d.weights.clone().unwrap();
    let y = Matrix::from_column_slice(d.y.len(), 1, d.y.as_slice());
    let a = absorb_fixed_effects(&y, &groups, Some(&w), AbsorbOptions::default()).unwrap();
    let scale = d.y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for g in &groups {
        let mut sums = vec![0.0; g.count];
        for (i, &id) in g.ids.iter().enumerate() {
            sums[id] += w[i] * a.data[(i, 0)];
        }
        let wmax = w.iter().fold(0.0f64, |m, v| m.max(*v));
        assert!(sums.iter().all(|v| v.abs() <= 1e-6 * scale * wmax * 50.0), "{sums:?}");
    }
}

#[test]
fn registry_dgp_is_recovered() {
    let (mut b, mut d) = (Vec::new(), Vec::new());
    for seed in 0..50 {
        let (f, s, _) = gen_micro_registry(&RegistryDgpSpec::bank_level(seed, months(5))).unwrap();
        let r = lp_interaction(&f, &s, &bank_spec()).unwrap();
        b.push(r.term("shock").unwrap().coef);
        d.push(r.term("shock:leverage").unwrap().coef);
    }
    let mc = |v: &[f64]| std_dev(v) / (v.len() as f64).sqrt();
    assert!((mean(&b) - 0.1).abs() <= 2.0 * mc(&b), "beta {} +/- {}", mean(&b), mc(&b));
    assert!((mean(&d) + 0.02).abs() <= 2.0 * mc(&d), "delta {} +/- {}", mean(&d), mc(&d));
}

#[test]
fn null_interaction_is_bracketed() {
    let mut covered = 0;
    for seed in 0..20 {
        let mut spec = RegistryDgpSpec::bank_level(100 + seed, months(5));
        spec.delta = vec![0.0];
        let (f, s, _) = gen_micro_registry(&spec).unwrap();
        covered += lp_interaction(&f, &s, &bank_spec()).unwrap().term("shock:leverage").unwrap().covers95(0.0) as usize;
    }
    assert!(covered >= 18, "{covered}/20");
}

#[test]
fn constant_characteristic_is_collinear() {
    let (mut f, s, _) = gen_micro_registry(&RegistryDgpSpec::bank_level(1, months(3))).unwrap();
    f.add_characteristic("flat", vec![2.5; f.len()]).unwrap();
    let spec = InteractionSpec { interactions: vec!["flat".into()], interaction_levels: false, ..bank_spec() };
    assert!(matches!(lp_interaction(&f, &s, &spec), Err(Error::Collinear(_))));
    let spec = InteractionSpec {
        interactions: vec!["flat".into()],
        fe: vec![Key::bank(), Key::month()],
        macro_controls: vec![],
        include_main_effect: false,
        ..bank_spec()
    };
    assert!(matches!(lp_interaction(&f, &s, &spec), Err(Error::Collinear(_))));
}

#[test]
fn month_effects_absorb_the_main_effect() {
    let (f, s, _) = gen_micro_registry(&RegistryDgpSpec::bank_level(1, months(2))).unwrap();
    let spec = InteractionSpec { fe: vec![Key::bank(), Key::month()], macro_controls: vec![], ..Default::default() };
    assert!(matches!(lp_interaction(&f, &s, &spec), Err(Error::Domain(_))));
    let full = InteractionSpec { fe: vec![Key::of(&[Dim::Bank, Dim::Currency, Dim::Month])], include_main_effect: false, macro_controls: vec![], ..Default::default() };
    assert!(lp_interaction(&f, &s, &full).is_err());
}

#[test]
fn orthogonal_second_interaction_leaves_first_unchanged() {
    let (mut single, mut double) = (Vec::new(), Vec::new());
    for seed in 0..30 {
        let mut spec = RegistryDgpSpec::firm_level(seed, months(4));
        spec.n_firms = 60;
        spec.char_corr = 0.0;
        spec.delta = vec![-0.02, 0.0];
        let (f, s, _) = gen_micro_registry(&spec).unwrap();
        let one = InteractionSpec { interactions: vec!["leverage".into()], ..firm_spec() };
        single.push(lp_interaction(&f, &s, &one).unwrap().term("shock:leverage").unwrap().coef);
        double.push(lp_interaction(&f, &s, &firm_spec()).unwrap().term("shock:leverage").unwrap().coef);
    }
    let mc = std_dev(&single) / (single.len() as f64).sqrt();
    assert!((mean(&single) - mean(&double)).abs() <= mc, "{} vs {} (MC SE {mc})", mean(&single), mean(&double));
}

#[test]
fn restricted_sign_split_reproduces_pooled() {
    let (f, s, _) = gen_micro_registry(&RegistryDgpSpec::bank_level(4, months(4))).unwrap();
    let pooled = lp_interaction(&f, &s, &bank_spec()).unwrap();
    let split = InteractionSpec { sign_split: true, ..bank_spec() };
    let d = interaction_design(&f, &s, &split).unwrap();
    // equal coefficients on the positive and negative parts: add the paired columns
    let k = d.x.ncols() - d.n_key;
    let half = d.n_key / 2;
    let x = Matrix::from_fn(d.x.nrows(), k + half, |i, j| if j < k { d.x[(i, j)] } else { d.x[(i, j)] + d.x[(i, j + half)] });
    let groups: Vec<FeGroups> = split
        .fe
        .iter()
        .map(|key| {
            let kv = f.key_values(key).unwrap();
            FeGroups::from_keys(&d.rows.iter().map(|&i| kv[i].clone()).collect::<Vec<_>>())
        })
        .collect();
    let opts = AbsorbOptions { tolerance: 1e-14, max_sweeps: 100_000 };
    let xa = absorb_fixed_effects(&x, &groups, d.weights.as_deref(), opts).unwrap().data;
    let ya = absorb_fixed_effects(&Matrix::from_column_slice(d.y.len(), 1, d.y.as_slice()), &groups, d.weights.as_deref(), opts).unwrap().data;
    let fit = least_squares(&xa, &Vector::from_column_slice(ya.as_slice()), d.weights.as_deref()).unwrap();
    for (j, (name, t)) in pooled.terms.iter().enumerate() {
        assert!((fit.coef[k + j] - t.coef).abs() < 1e-10, "{name}");
    }
}

#[test]
fn month_effects_remove_aggregate_confounding() {
    let (mut with_fe, mut without) = (Vec::new(), Vec::new());
    for seed in 0..10 {
        let mut spec = RegistryDgpSpec::bank_level(seed, months(5));
        spec.confounder = Some(Confounder { loading: 1.0, gamma: 0.05, persistence: 0.8 });
        let (f, s, _) = gen_micro_registry(&spec).unwrap();
        let fe = InteractionSpec { fe: vec![Key::bank(), Key::currency(), Key::month()], include_main_effect: false, ..Default::default() };
        with_fe.push(lp_interaction(&f, &s, &fe).unwrap().term("shock:leverage").unwrap().coef);
        without.push(lp_interaction(&f, &s, &InteractionSpec::default()).unwrap().term("shock:leverage").unwrap().coef);
    }
    let (b_fe, b_no) = ((mean(&with_fe) + 0.02).abs(), (mean(&without) + 0.02).abs());
    assert!(b_fe < 0.2 * b_no, "bias with month effects {b_fe}, without {b_no}");
}

#[test]
fn two_way_covariance_degenerate_cases() {
    let mut r = rng::substream(9, 0);
    let n = 60;
    let scores = Matrix::from_fn(n, 3, |_, _| rng::normal(&mut r));
    let bread = Matrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { 0.1 });
    let rows: Vec<usize> = (0..n).collect();
    let hc = robust_cov(&bread, &scores).unwrap();
    let two = twoway_cluster_cov(&bread, &scores, &rows, &rows).unwrap();
    assert!((hc.cov - two.cov).abs().max() < 1e-14);
    let firms: Vec<usize> = (0..n).map(|i| i / 4).collect();
    let one = oneway_cluster_cov(&bread, &scores, &firms).unwrap();
    let two = twoway_cluster_cov(&bread, &scores, &firms, &firms).unwrap();
    assert!((one.cov - two.cov).abs().max() < 1e-14);
}

#[test]
fn characteristic_calibration() {
    let (f, _, _) = gen_micro_registry(&RegistryDgpSpec::firm_level(5, months(3))).unwrap();
    let med = |name: &str| {
        let v: Vec<f64> = f.characteristic(name).unwrap().iter().copied().filter(|v| v.is_finite()).collect();
        quantile(&v, 0.5)
    };
    assert!((med("leverage") / 1.41 - 1.0).abs() < 0.1, "debt-to-collateral median {}", med("leverage"));
    assert!((med("fc_share") / 0.47 - 1.0).abs() < 0.1, "fc share median {}", med("fc_share"));
    let (b, _, _) = gen_micro_registry(&RegistryDgpSpec::bank_level(5, months(3))).unwrap();
    let lev: Vec<f64> = b.characteristic("leverage").unwrap().iter().copied().filter(|v| v.is_finite()).collect();
    let (p10, p90) = (quantile(&lev, 0.1), quantile(&lev, 0.9));
    assert!((p10 / 3.435 - 1.0).abs() < 0.15, "bank leverage p10 {p10}");
    assert!((p90 / 12.674 - 1.0).abs() < 0.1, "bank leverage p90 {p90}");
}

#[test]
fn generators_are_deterministic() {
    let spec = RegistryDgpSpec::firm_level(77, months(1));
    // anchor rows hold NaN characteristics, so compare printed forms
    assert_eq!(format!("{:?}", gen_micro_registry(&spec).unwrap()), format!("{:?}", gen_micro_registry(&spec).unwrap()));
    let spec = ModelLinkedSpec::overhang_dominant(3, months(1));
    assert_eq!(format!("{:?}", gen_model_linked_registry(&spec).unwrap()), format!("{:?}", gen_model_linked_registry(&spec).unwrap()));
}

fn model_linked_spec() -> InteractionSpec {
    InteractionSpec {
        interactions: vec!["d0_proxy".into(), "theta_proxy".into()],
        fe: vec![Key::firm(), Key::month()],
        cluster: vec![Key::firm(), Key::month()],
        weighted: false,
        include_main_effect: false,
        ..Default::default()
    }
}

#[test]
fn model_linked_overhang_sign() {
    let spec = ModelLinkedSpec::overhang_dominant(11, months(4));
    let (f, s, truth) = gen_model_linked_registry(&spec).unwrap();
    let r = lp_interaction(&f, &s, &model_linked_spec()).unwrap();
    let d = r.term("shock:d0_proxy").unwrap();
    assert!(d.hi90 < 0.0, "{d:?}");
    assert_eq!(truth.log_capital.len(), 49);
}

#[test]
fn identical_firms_show_no_heterogeneity() {
    let mut spec = ModelLinkedSpec::overhang_dominant(2, months(3));
    spec.theta_range = (0.5, 0.5);
    spec.d0_range = (0.5, 0.5);
    spec.proxy_noise = 0.1;
    let (f, s, _) = gen_model_linked_registry(&spec).unwrap();
    let r = lp_interaction(&f, &s, &model_linked_spec()).unwrap();
    assert!(r.term("shock:d0_proxy").unwrap().covers95(0.0));
}

#[test]
fn doubling_the_net_worth_path_doubles_responses() {
    let spec = ModelLinkedSpec::overhang_dominant(5, months(2));
    let doubled = ModelLinkedSpec { n0_sd: 2.0 * spec.n0_sd, ..spec.clone() };
    let (_, _, a) = gen_model_linked_registry(&spec).unwrap();
    let (_, _, b) = gen_model_linked_registry(&doubled).unwrap();
    let amplitude = |t: &ModelLinkedTruth| -> f64 {
        t.log_capital.iter().flat_map(|row| row.iter().zip(&t.log_capital_mean).map(|(k, m)| (k - m).abs())).sum()
    };
    let ratio = amplitude(&b) / amplitude(&a);
    assert!((ratio / 2.0 - 1.0).abs() < 0.05, "ratio {ratio}");
}

#[test]
fn regime_flips_are_errors() {
    let mut spec = ModelLinkedSpec::overhang_dominant(1, months(2));
    spec.n0_sd = 0.15;
    let err = gen_model_linked_registry(&spec).unwrap_err();
    assert!(matches!(err, Error::Domain(ref m) if m.contains("regime flip")), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hdfe_equals_dummy_ols(seed in 0u64..100_000, firms in 4usize..14) {
        let (f, s) = small_registry(seed, firms, 1);
        let spec = InteractionSpec { weighted: true, ..firm_spec() };
        let r = lp_interaction(&f, &s, &spec).unwrap();
        let oracle = dummy_coefficients(&f, &s, &spec);
        for ((_, t), o) in r.terms.iter().zip(&oracle) {
            prop_assert!((t.coef - o).abs() <= 1e-8 * (1.0 + o.abs()));
        }
    }

    #[test]
    fn within_unit_z_scores(values in prop::collection::vec(-50.0f64..50.0, 6..60), shift in -10.0f64..10.0, scale in 0.1f64..10.0) {
        let units: Vec<usize> = (0..values.len()).map(|i| i % 3).collect();
        let z = standardize_within_unit(&values, &units).unwrap();
        for u in 0..3 {
            let zs: Vec<f64> = z.values.iter().zip(&units).filter(|(v, k)| **k == u && v.is_finite()).map(|(v, _)| *v).collect();
            if zs.is_empty() { continue; }
            prop_assert!(mean(&zs).abs() < 1e-12);
            prop_assert!((std_dev(&zs) - 1.0).abs() < 1e-12);
        }
        let moved: Vec<f64> = values.iter().zip(&units).map(|(v, u)| (v + shift * *u as f64) * scale).collect();
        let z2 = standardize_within_unit(&moved, &units).unwrap();
        for (a, b) in z.values.iter().zip(&z2.values) {
            prop_assert!((a - b).abs() < 1e-9 || (a.is_nan() && b.is_nan()));
        }
    }

    #[test]
    fn detrended_leverage_is_orthogonal_to_age(age in prop::collection::vec(0.0f64..20.0, 8..80), noise_seed in 0u64..1000) {
        let mut r = rng::substream(noise_seed, 0);
        let lev: Vec<f64> = age.iter().map(|a| 1.0 + 0.2 * a - 0.01 * a * a + rng::normal(&mut r)).collect();
        prop_assume!(std_dev(&age) > 1.0);
        let res = detrend_by_age(&lev, &age, 2).unwrap();
        for p in 0..3 {
            let dot: f64 = res.iter().zip(&age).map(|(e, a)| e * a.powi(p)).sum();
            prop_assert!(dot.abs() < 1e-10 * (1.0 + age.iter().map(|a| a.powi(p).abs()).sum::<f64>()), "power {} dot {}", p, dot);
        }
    }

    #[test]
    fn marginal_effect_is_affine(b in -1.0f64..1.0, d in -1.0f64..1.0, x1 in -5.0f64..5.0, x2 in -5.0f64..5.0) {
        let mid = marginal_effect(b, d, 0.5 * (x1 + x2));
        prop_assert!((mid - 0.5 * (marginal_effect(b, d, x1) + marginal_effect(b, d, x2))).abs() < 1e-12);
    }
}
