use netshock_core::calendar::{Calendar, Period};
use netshock_core::linalg::Matrix;
use netshock_core::panel::PanelDataset;
use netshock_core::spline::cubic_spline_interpolate;
use netshock_core::synth::{gen_macro_panel, MacroDgpSpec};
use netshock_core::var::*;
use netshock_core::Error;
use proptest::prelude::*;

fn cal() -> Calendar {
    Calendar::new(Period::quarterly(2002, 3), Period::quarterly(2019, 4)).unwrap()
}

fn panel(seed: u64, n: usize) -> PanelDataset {
    gen_macro_panel(&MacroDgpSpec::canonical(seed, n, cal()), 12).unwrap().0
}

fn flat(seed: u64) -> VarSpec {
    VarSpec { prior: Prior::Flat, draws: 500, seed, ..VarSpec::default() }
}

/// `(X'X)^-1 X'Y` through an LU solve of the normal equations.
fn ols_oracle(design: &VarDesign) -> Matrix {
    let xtx = design.x.transpose() * &design.x;
    let xty = design.x.transpose() * &design.y;
    xtx.lu().solve(&xty).unwrap()
}

fn max_rel_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs() / (1.0 + y.abs())).fold(0.0, f64::max)
}

#[test]
fn pooled_design_shape() {
    let p = panel(1, 12);
    let d = build_pooled_design(&p, &VarSpec::default()).unwrap();
    assert_eq!(d.y.nrows(), 12 * (70 - 2));
    assert_eq!(d.x.ncols(), 20);
    assert_eq!(d.shock_row(), Some(18));
}

#[test]
fn flat_prior_mean_is_ols() {
    let p = panel(7, 12);
    let spec = flat(7);
    let d = build_pooled_design(&p, &spec).unwrap();
    let post = estimate_bvar(&d, &spec).unwrap();
    let diff = max_rel_diff(&post.posterior_mean, &ols_oracle(&d));
    assert!(diff <= 1e-6, "relative difference {diff}");
}

#[test]
fn unbalanced_panel_is_rejected() {
    let mut p = panel(2, 3);
    p.set(1, 10, 2, f64::NAN);
    let err = build_pooled_design(&p, &VarSpec::default()).unwrap_err();
    assert!(matches!(err, Error::Unbalanced(_)));
}

#[test]
fn seeded_draws_are_bit_identical() {
    let p = panel(3, 4);
    for prior in [Prior::Flat, Prior::Minnesota(MinnesotaPrior::default()), Prior::NormalWishart(NormalWishartPrior::default())] {
        let spec = VarSpec { prior, draws: 500, seed: 11, ..VarSpec::default() };
        let d = build_pooled_design(&p, &spec).unwrap();
        let a = estimate_bvar(&d, &spec).unwrap();
        let b = estimate_bvar(&d, &spec).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn tight_minnesota_prior_shrinks_to_random_walk() {
    let p = panel(4, 3);
    let hyper = MinnesotaPrior { tightness: 1e-7, ..MinnesotaPrior::default() };
    let spec = VarSpec { prior: Prior::Minnesota(hyper), draws: 500, seed: 1, ..VarSpec::default() };
    let d = build_pooled_design(&p, &spec).unwrap();
    let post = estimate_bvar(&d, &spec).unwrap();
    let m = d.n_vars();
    for i in 0..m {
        for c in 0..m * d.lags {
            let target = if c == i && p.variables()[i].starts_with("ln") { 1.0 } else { 0.0 };
            assert!((post.posterior_mean[(c, i)] - target).abs() < 1e-4, "eq {i} col {c}");
        }
    }
}

#[test]
fn irf_is_linear_in_shock_size() {
    let p = panel(5, 3);
    let spec = VarSpec { draws: 500, seed: 2, ..VarSpec::default() };
    let post = estimate_bvar(&build_pooled_design(&p, &spec).unwrap(), &spec).unwrap();
    let one = irf_exogenous(&post, 12, 1.0).unwrap();
    let two = irf_exogenous(&post, 12, 2.0).unwrap();
    assert!(one.bands_ordered());
    for v in 0..9 {
        for h in 0..=12 {
            assert!((two.point[v][h] - 2.0 * one.point[v][h]).abs() <= 1e-12 * (1.0 + one.point[v][h].abs()));
            assert!((two.hi90[v][h] - 2.0 * one.hi90[v][h]).abs() <= 1e-12 * (1.0 + one.hi90[v][h].abs()));
        }
    }
    assert!(irf_exogenous(&post, 0, 1.0).is_err());
}

#[test]
fn country_order_does_not_change_estimates() {
    let p = panel(6, 5);
    let spec = flat(1);
    let perm = p.select_countries(&[3, 0, 4, 2, 1]).unwrap();
    let a = estimate_bvar(&build_pooled_design(&p, &spec).unwrap(), &spec).unwrap();
    let b = estimate_bvar(&build_pooled_design(&perm, &spec).unwrap(), &spec).unwrap();
    assert!(max_rel_diff(&a.posterior_mean, &b.posterior_mean) < 1e-10);
}

#[test]
fn true_irf_covered_on_one_replication() {
    let spec = MacroDgpSpec::canonical(99, 12, cal());
    let (p, truth) = gen_macro_panel(&spec, 12).unwrap();
    let vs = VarSpec { seed: 99, ..VarSpec::default() };
    let irf = irf_exogenous(&estimate_bvar(&build_pooled_design(&p, &vs).unwrap(), &vs).unwrap(), 12, 1.0).unwrap();
    let mut inside = 0;
    for v in 0..9 {
        for h in 0..=12 {
            inside += usize::from(irf.lo90[v][h] <= truth.irf[v][h] && truth.irf[v][h] <= irf.hi90[v][h]);
        }
    }
    assert!(inside as f64 / 117.0 >= 0.75, "{inside} of 117 cells covered");
}

fn replicate_country(p: &PanelDataset, n: usize) -> PanelDataset {
    let names = (0..n).map(|i| format!("R{i}")).collect();
    let mut out = PanelDataset::new(names, p.calendar(), p.variables().to_vec(), (0..p.n_vars()).map(|v| p.is_global(v)).collect()).unwrap();
    for c in 0..n {
        for t in 0..p.n_periods() {
            for v in 0..p.n_vars() {
                out.set(c, t, v, p.get(0, t, v));
            }
        }
    }
    out.set_shock(p.shock().to_vec()).unwrap();
    out
}

#[test]
fn group_mean_of_identical_countries_matches_single_country() {
    let single = panel(8, 1);
    let copies = replicate_country(&single, 4);
    let spec = VarSpec { draws: 500, seed: 5, ..VarSpec::default() };
    let a = group_mean_var(&single, &spec).unwrap();
    let b = group_mean_var(&copies, &spec).unwrap();
    assert!(max_rel_diff(&a.posterior_mean, &b.posterior_mean) < 1e-9);
}

#[test]
fn group_mean_ignores_country_levels() {
    let p = panel(9, 4);
    let mut shifted = p.clone();
    for t in 0..p.n_periods() {
        for v in 0..5 {
            shifted.set(2, t, v, p.get(2, t, v) + 3.5);
        }
    }
    let spec = VarSpec { draws: 500, seed: 5, ..VarSpec::default() };
    let a = group_mean_var(&p, &spec).unwrap();
    let b = group_mean_var(&shifted, &spec).unwrap();
    assert!(max_rel_diff(&a.posterior_mean, &b.posterior_mean) < 1e-9);
}

#[test]
fn mirrored_pair_is_flagged() {
    let p = panel(10, 2);
    let mut mirrored = p.clone();
    for v in 0..5 {
        let s = p.series(0, v);
        let mu = netshock_core::stats::mean(&s);
        for (t, x) in s.iter().enumerate() {
            mirrored.set(1, t, v, 2.0 * mu - x);
        }
    }
    let err = group_mean_var(&mirrored, &VarSpec::default()).unwrap_err();
    assert!(matches!(err, Error::Degenerate(_)));
}

fn two_var_dgp(t: usize, seed: u64, corr: f64) -> (Matrix, Vec<f64>) {
    use netshock_core::rng;
    let mut r = rng::substream(seed, 0);
    let mut data = Matrix::zeros(t, 2);
    let mut e1 = vec![0.0; t];
    for s in 0..t {
        let (u1, u2) = (rng::normal(&mut r), rng::normal(&mut r));
        e1[s] = u1;
        let prev = if s > 0 { (data[(s - 1, 0)], data[(s - 1, 1)]) } else { (0.0, 0.0) };
        data[(s, 0)] = 0.5 * prev.0 + 0.1 * prev.1 + 0.8 * u1;
        data[(s, 1)] = 0.2 * prev.0 + 0.4 * prev.1 + 0.6 * corr * u1 + 0.5 * u2;
    }
    (data, e1)
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}

#[test]
fn cholesky_recovers_triangular_shock() {
    let (data, e1) = two_var_dgp(2000, 3, 1.0);
    let vars = names(2);
    let spec = VarSpec { prior: Prior::Flat, lags: 1, draws: 500, seed: 4, ..VarSpec::default() };
    let out = cholesky_structural_shock(&data, &vars, &vars, &spec).unwrap();
    assert_eq!(out.rejected_draws, 0);
    let corr = netshock_core::stats::pearson_correlation(&out.shock, &e1[1..]).unwrap();
    assert!(corr > 0.99, "correlation {corr}");
}

#[test]
fn cholesky_diagonal_case_standardizes_residuals() {
    let (data, _) = two_var_dgp(400, 5, 0.0);
    let vars = names(2);
    let spec = VarSpec { prior: Prior::Flat, lags: 1, draws: 500, seed: 6, ..VarSpec::default() };
    let out = cholesky_structural_shock(&data, &vars, &vars, &spec).unwrap();
    let design = design_from_units(&[data], vars, 1, None).unwrap();
    let b = ols_oracle(&design);
    let resid: Vec<f64> = (&design.y.column(0) - &design.x * b.column(0)).iter().copied().collect();
    // median draw is a common positive rescaling of the OLS residuals
    let ratio: Vec<f64> = out.shock.iter().zip(&resid).map(|(s, e)| s / e).collect();
    let sd_resid = netshock_core::stats::std_dev(&resid);
    let corr = netshock_core::stats::pearson_correlation(&out.shock, &resid).unwrap();
    assert!(corr > 0.999_99);
    let med = netshock_core::stats::median(&ratio);
    assert!((med * sd_resid - 1.0).abs() < 0.1, "scale {}", med * sd_resid);
}

#[test]
fn cholesky_first_shock_ignores_later_order() {
    let p = panel(12, 1);
    let data = Matrix::from_fn(p.n_periods(), 4, |t, v| p.get(0, t, [8, 0, 1, 5][v]));
    let vars: Vec<String> = ["ebp", "ln_ner", "ln_gdp", "fed_funds"].iter().map(|s| s.to_string()).collect();
    let alt: Vec<String> = ["ebp", "fed_funds", "ln_gdp", "ln_ner"].iter().map(|s| s.to_string()).collect();
    // same posterior, different draw-to-column mapping: equal up to Monte Carlo noise
    let spec = VarSpec { prior: Prior::Flat, lags: 2, draws: 20_000, seed: 8, ..VarSpec::default() };
    let a = cholesky_structural_shock(&data, &vars, &vars, &spec).unwrap();
    let b = cholesky_structural_shock(&data, &vars, &alt, &spec).unwrap();
    for (x, y) in a.shock.iter().zip(&b.shock) {
        assert!((x - y).abs() < 0.02, "{x} vs {y}");
    }
}

#[test]
fn spline_error_on_sampled_sine_within_bound() {
    // h = 3 months; |f''''| <= w^4 for f = sin(w t); clamped-free bound 5/384 h^4 max|f''''|
    // plus boundary effects of the natural end conditions, checked away from the ends
    let w = core::f64::consts::PI / 24.0;
    let q: Vec<f64> = (0..40).map(|i| (w * 3.0 * i as f64).sin()).collect();
    let m = cubic_spline_interpolate(&q).unwrap();
    let bound = 5.0 / 384.0 * 3f64.powi(4) * w.powi(4);
    for (j, v) in m.iter().enumerate().skip(12).take(m.len() - 24) {
        let exact = (w * j as f64).sin();
        assert!((v - exact).abs() <= bound, "month {j}: error {} > {bound}", (v - exact).abs());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn bands_nest_for_any_seed(seed in 0u64..1000) {
        let p = panel(seed, 2);
        let spec = VarSpec { draws: 500, seed, ..VarSpec::default() };
        let post = estimate_bvar(&build_pooled_design(&p, &spec).unwrap(), &spec).unwrap();
        prop_assert!(irf_exogenous(&post, 8, 1.0).unwrap().bands_ordered());
    }

    #[test]
    fn knots_are_exact(values in prop::collection::vec(-100.0f64..100.0, 4..30)) {
        let m = cubic_spline_interpolate(&values).unwrap();
        prop_assert_eq!(m.len(), 3 * (values.len() - 1) + 1);
        for (i, v) in values.iter().enumerate() {
            prop_assert!((m[3 * i] - v).abs() <= 1e-12 * (1.0 + v.abs()));
        }
    }
}
