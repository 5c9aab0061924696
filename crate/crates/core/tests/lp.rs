use netshock_core::calendar::{Calendar, Period};
use netshock_core::cluster;
use netshock_core::linalg::{self, Matrix, Vector};
use netshock_core::lp::*;
use netshock_core::panel::PanelDataset;
use netshock_core::stats::{mean, std_dev};
use netshock_core::synth::{gen_iv_panel, gen_static_lp_panel, IvDgpSpec, StaticLpSpec};
use proptest::prelude::*;

fn cal() -> Calendar {
    Calendar::new(Period::quarterly(2002, 3), Period::quarterly(2019, 4)).unwrap()
}

fn static_spec() -> LpSpec {
    LpSpec { horizons: 3, ..LpSpec::default() }
}

#[test]
fn static_dgp_recovers_impact_only() {
    let mut paths = vec![vec![]; 4];
    for rep in 0..200 {
        let p = gen_static_lp_panel(&StaticLpSpec::symmetric(100 + rep, 6, cal(), 0.5)).unwrap();
        let r = estimate_lp(&p, "y", &static_spec()).unwrap();
        for (h, e) in r.horizons.iter().enumerate() {
            paths[h].push(e.estimate.unwrap().coef);
        }
    }
    for (h, xs) in paths.iter().enumerate() {
        let truth = if h == 0 { 0.5 } else { 0.0 };
        let (m, sd) = (mean(xs), std_dev(xs));
        assert!((m - truth).abs() <= 2.0 * sd / (xs.len() as f64).sqrt(), "h={h}: mean {m}, sd {sd}");
    }
}

fn duplicate_countries(p: &PanelDataset) -> PanelDataset {
    let n = p.n_countries();
    let names = (0..2 * n).map(|i| format!("D{i}")).collect();
    let flags = (0..p.n_vars()).map(|v| p.is_global(v)).collect();
    let mut out = PanelDataset::new(names, p.calendar(), p.variables().to_vec(), flags).unwrap();
    for c in 0..2 * n {
        for t in 0..p.n_periods() {
            for v in 0..p.n_vars() {
                out.set(c, t, v, p.get(c % n, t, v));
            }
        }
    }
    out.set_shock(p.shock().to_vec()).unwrap();
    out
}

#[test]
fn duplicating_countries_keeps_clustered_se() {
    let p = gen_static_lp_panel(&StaticLpSpec::symmetric(7, 5, cal(), 0.5)).unwrap();
    let a = estimate_lp(&p, "y", &static_spec()).unwrap();
    let b = estimate_lp(&duplicate_countries(&p), "y", &static_spec()).unwrap();
    for (x, y) in a.horizons.iter().zip(&b.horizons) {
        let (x, y) = (x.estimate.unwrap(), y.estimate.unwrap());
        assert!((x.coef - y.coef).abs() < 1e-10);
        assert!(y.se_iid < 0.75 * x.se_iid);
        assert!((y.se / x.se - 1.0).abs() < 0.05, "clustered SE ratio {}", y.se / x.se);
    }
}

fn direct_cluster_cov(bread: &Matrix, scores: &Matrix, a: &[usize], b: Option<&[usize]>) -> Matrix {
    // sum over pairs of rows sharing a cluster, with inclusion–exclusion for two keys
    let (n, k) = scores.shape();
    let count = |keys: &[usize]| {
        let mut u = keys.to_vec();
        u.sort_unstable();
        u.dedup();
        u.len() as f64
    };
    let factor = |g: f64| g / (g - 1.0) * (n - 1) as f64 / (n - k) as f64;
    let mut ma = Matrix::zeros(k, k);
    let mut mb = Matrix::zeros(k, k);
    let mut mab = Matrix::zeros(k, k);
    for i in 0..n {
        for j in 0..n {
            let outer = scores.row(i).transpose() * scores.row(j);
            if a[i] == a[j] {
                ma += &outer;
            }
            if let Some(b) = b {
                if b[i] == b[j] {
                    mb += &outer;
                    if a[i] == a[j] {
                        mab += &outer;
                    }
                }
            }
        }
    }
    let ga = factor(count(a));
    let mut v = bread * ma * bread * ga;
    if let Some(b) = b {
        let pairs: Vec<usize> = a.iter().zip(b).map(|(x, y)| x * 100_000 + y).collect();
        v += bread * mb * bread * factor(count(b)) - bread * mab * bread * factor(count(&pairs));
    }
    v
}

#[test]
fn clustered_covariance_matches_direct_sandwich() {
    for seed in 0..5 {
        let p = gen_static_lp_panel(&StaticLpSpec::symmetric(seed, 8, cal(), 0.3)).unwrap();
        let d = lp_design(&p, "y", &static_spec(), 1).unwrap();
        let fit = linalg::least_squares(&d.x, &d.y, None).unwrap();
        let s = scores(&d.x, &fit.resid);
        let ours = cluster::oneway_cluster_cov(&fit.bread, &s, &d.dates).unwrap();
        let direct = direct_cluster_cov(&fit.bread, &s, &d.dates, None);
        let scale = direct.abs().max();
        assert!((ours.cov - &direct).abs().max() <= 1e-10 * scale);
        let h = estimate_lp_horizon(&p, "y", &static_spec(), 1).unwrap();
        let j = d.x.ncols() - 1;
        assert!((h.estimate.unwrap().se - direct[(j, j)].sqrt()).abs() <= 1e-10 * direct[(j, j)].sqrt());
    }
}

#[test]
fn manual_two_step_matches_2sls() {
    let p = gen_iv_panel(&IvDgpSpec::canonical(3, 10, cal())).unwrap();
    let iv = IvSpec::default();
    let spec = LpSpec { horizons: 4, iv: Some(iv.clone()), ..LpSpec::default() };
    let r = estimate_iv_lp(&p, "y", &spec).unwrap();
    for h in 0..=4 {
        let d = lp_design(&p, "y", &spec, h).unwrap();
        let k = d.x.ncols();
        let mut zx = d.x.clone();
        zx.set_column(k - 1, d.instrument.as_ref().unwrap());
        let endog = d.x.column(k - 1).into_owned();
        let fs = linalg::least_squares(&zx, &endog, None).unwrap();
        let mut second = d.x.clone();
        second.set_column(k - 1, &(&zx * &fs.coef));
        let ss = linalg::least_squares(&second, &d.y, None).unwrap();
        let manual = ss.coef[k - 1] * iv.scale();
        let est = r.horizons[h].estimate.unwrap().coef;
        assert!((manual - est).abs() <= 1e-10 * (1.0 + est.abs()), "h={h}: {manual} vs {est}");
        assert!(r.horizons[h].first_stage_f.unwrap() > 5.0);
    }
}

#[test]
fn iv_is_consistent_where_ols_is_not() {
    let (mut iv_est, mut ols_est) = (vec![], vec![]);
    let spec = LpSpec { horizons: 0, iv: Some(IvSpec::default()), ..LpSpec::default() };
    let mut truth = 0.0;
    for rep in 0..40 {
        let dgp = IvDgpSpec::canonical(500 + rep, 10, cal());
        truth = dgp.b * IvSpec::default().scale();
        let p = gen_iv_panel(&dgp).unwrap();
        iv_est.push(estimate_iv_lp(&p, "y", &spec).unwrap().horizons[0].estimate.unwrap().coef);
        let mut q = p.clone();
        q.set_shock(p.series(0, 1)).unwrap();
        let ols = estimate_lp(&q, "y", &LpSpec { iv: None, ..spec.clone() }).unwrap();
        ols_est.push(ols.horizons[0].estimate.unwrap().coef * IvSpec::default().scale());
    }
    assert!((mean(&iv_est) - truth).abs() <= 2.0 * std_dev(&iv_est));
    assert!((mean(&ols_est) - truth).abs() >= 4.0 * std_dev(&ols_est));
}

#[test]
fn weak_instrument_is_flagged_not_suppressed() {
    let dgp = IvDgpSpec { pi: 0.0, ..IvDgpSpec::canonical(9, 4, cal()) };
    let p = gen_iv_panel(&dgp).unwrap();
    let spec = LpSpec { horizons: 0, iv: Some(IvSpec { weak_f_floor: 1e9, ..IvSpec::default() }), ..LpSpec::default() };
    let r = estimate_iv_lp(&p, "y", &spec).unwrap();
    assert!(r.horizons[0].weak_instrument);
    assert!(r.horizons[0].estimate.is_some());
    assert!(!r.notes.is_empty());
}

#[test]
fn homoskedastic_f_is_available() {
    let p = gen_iv_panel(&IvDgpSpec::canonical(10, 4, cal())).unwrap();
    let iv = IvSpec { f_stat: FStat::Homoskedastic, ..IvSpec::default() };
    let r = estimate_iv_lp(&p, "y", &LpSpec { horizons: 0, iv: Some(iv), ..LpSpec::default() }).unwrap();
    assert!(r.horizons[0].first_stage_f.unwrap() > 5.0);
}

#[test]
fn sign_split_recovers_regimes() {
    let (mut diff, mut con_only) = (vec![], vec![]);
    for rep in 0..50 {
        let p = gen_static_lp_panel(&StaticLpSpec::symmetric(800 + rep, 6, cal(), 0.5)).unwrap();
        let r = estimate_lp_sign_split(&p, "y", &LpSpec { horizons: 0, ..LpSpec::default() }).unwrap();
        let h = &r.horizons[0];
        diff.push(h.expansion.unwrap().coef - h.contraction.unwrap().coef);
        let spec = StaticLpSpec { loading_neg: 0.0, ..StaticLpSpec::symmetric(900 + rep, 6, cal(), 0.5) };
        let q = gen_static_lp_panel(&spec).unwrap();
        let r = estimate_lp_sign_split(&q, "y", &LpSpec { horizons: 0, ..LpSpec::default() }).unwrap();
        con_only.push(r.horizons[0].contraction.unwrap().coef);
    }
    assert!(mean(&diff).abs() <= 2.0 * std_dev(&diff) / (50f64).sqrt());
    assert!(mean(&con_only).abs() <= 2.0 * std_dev(&con_only) / (50f64).sqrt());
}

#[test]
fn constrained_split_reproduces_pooled() {
    let p = gen_static_lp_panel(&StaticLpSpec::symmetric(21, 5, cal(), 0.4)).unwrap();
    let spec = LpSpec { horizons: 2, ..LpSpec::default() };
    let pooled = estimate_lp(&p, "y", &spec).unwrap();
    for h in 0..=2 {
        let d = lp_design(&p, "y", &LpSpec { sign_split: true, ..spec.clone() }, h).unwrap();
        let fit = linalg::least_squares(&d.x, &d.y, None).unwrap();
        let k = d.x.ncols();
        let mut r = Vector::zeros(k);
        r[k - 2] = 1.0;
        r[k - 1] = -1.0;
        let ar = &fit.bread * &r;
        let restricted = &fit.coef - &ar * (r.dot(&fit.coef) / r.dot(&ar));
        let theta = pooled.horizons[h].estimate.unwrap().coef;
        assert!((restricted[k - 2] - theta).abs() < 1e-10);
        assert!((restricted[k - 1] - theta).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn bands_and_nobs(seed in 0u64..5000, n in 2usize..6, lags in 0usize..3) {
        let p = gen_static_lp_panel(&StaticLpSpec::symmetric(seed, n, cal(), 0.5)).unwrap();
        let r = estimate_lp(&p, "y", &LpSpec { horizons: 6, shock_lags: lags, ..LpSpec::default() }).unwrap();
        for w in r.horizons.windows(2) {
            prop_assert!(w[1].nobs <= w[0].nobs);
        }
        for h in &r.horizons {
            prop_assert!(h.estimate.unwrap().bands_ordered());
        }
    }
}
