//! Panel local projections: per-horizon OLS, sign-split and IV variants with
//! date-clustered CR1 inference.
//!
//! For horizon `h` the regression is
//! `y_{c,t+h} = a_q + [a_c + trends] + sum_l G_l w_{c,t-l} + sum_l g_l s_{t-l} + theta_h s_t + e`,
//! where `w` collects the control variables and `s` the panel shock. Rows with
//! any missing value are deleted listwise per horizon.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::cluster::{self, ClusterCov};
use crate::linalg::{self, Matrix, Vector, COLLINEAR_TOL};
use crate::panel::PanelDataset;
use crate::{bail, Result};

/// Normal quantile for the 68% band.
pub const Z68: f64 = 0.994;
/// Normal quantile for the 90% band.
pub const Z90: f64 = 1.645;

/// Country-specific deterministic trends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Trend {
    #[default]
    None,
    Linear,
    Quadratic,
}

/// First-stage F statistic flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FStat {
    #[default]
    ClusterRobust,
    Homoskedastic,
}

/// The endogenous regressor is instrumented by the panel shock.
#[derive(Debug, Clone, PartialEq)]
pub struct IvSpec {
    pub endogenous: String,
    /// Basis points per unit of the endogenous variable.
    pub ebp_unit_bp: f64,
    /// Move in the endogenous variable, in basis points, the responses refer to.
    pub normalization_bp: f64,
    pub weak_f_floor: f64,
    pub f_stat: FStat,
}

impl Default for IvSpec {
    fn default() -> Self {
        IvSpec { endogenous: "ebp".into(), ebp_unit_bp: 100.0, normalization_bp: -100.0, weak_f_floor: 5.0, f_stat: FStat::ClusterRobust }
    }
}

impl IvSpec {
    /// Factor applied to the per-unit 2SLS coefficient.
    pub fn scale(&self) -> f64 {
        self.normalization_bp / self.ebp_unit_bp
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSpec {
    /// Largest horizon; estimates cover `0..=horizons`.
    pub horizons: usize,
    /// Control variables entering with `control_lags` lags; `None` uses every
    /// panel variable.
    pub controls: Option<Vec<String>>,
    pub control_lags: usize,
    pub shock_lags: usize,
    pub season_fe: bool,
    pub country_fe: bool,
    pub trends: Trend,
    pub sign_split: bool,
    pub iv: Option<IvSpec>,
}

impl Default for LpSpec {
    fn default() -> Self {
        LpSpec {
            horizons: 12,
            controls: None,
            control_lags: 2,
            shock_lags: 2,
            season_fe: true,
            country_fe: false,
            trends: Trend::None,
            sign_split: false,
            iv: None,
        }
    }
}

impl LpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.shock_lags > 2 {
            bail!(Domain, "at most 2 shock lags are supported, got {}", self.shock_lags);
        }
        if self.sign_split && self.iv.is_some() {
            bail!(Domain, "sign splitting is not defined for IV projections");
        }
        if let Some(iv) = &self.iv {
            if !(iv.ebp_unit_bp.is_finite() && iv.ebp_unit_bp != 0.0 && iv.normalization_bp.is_finite()) {
                bail!(Domain, "IV normalization must be finite with a nonzero unit");
            }
        }
        Ok(())
    }
}

/// Point estimate with clustered standard error and normal bands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub coef: f64,
    pub se: f64,
    /// Homoskedastic standard error, for comparison only.
    pub se_iid: f64,
    pub lo68: f64,
    pub hi68: f64,
    pub lo90: f64,
    pub hi90: f64,
}

impl Estimate {
    pub fn new(coef: f64, se: f64, se_iid: f64) -> Self {
        Estimate { coef, se, se_iid, lo68: coef - Z68 * se, hi68: coef + Z68 * se, lo90: coef - Z90 * se, hi90: coef + Z90 * se }
    }

    fn scaled(self, c: f64) -> Self {
        Estimate::new(self.coef * c, self.se * c.abs(), self.se_iid * c.abs())
    }

    pub fn bands_ordered(&self) -> bool {
        self.lo90 <= self.lo68 && self.lo68 <= self.coef && self.coef <= self.hi68 && self.hi68 <= self.hi90
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpHorizon {
    pub h: usize,
    /// Shock (or instrumented) coefficient; `None` for sign-split runs.
    pub estimate: Option<Estimate>,
    /// Coefficient on the positive part of the shock.
    pub expansion: Option<Estimate>,
    /// Coefficient on the negative part of the shock.
    pub contraction: Option<Estimate>,
    pub nobs: usize,
    pub n_clusters: usize,
    pub first_stage_f: Option<f64>,
    pub weak_instrument: bool,
    /// Nuisance columns removed as linearly dependent.
    pub dropped: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub outcome: String,
    pub horizons: Vec<LpHorizon>,
    pub notes: Vec<String>,
}

impl LpResult {
    /// Point path of the main estimate.
    pub fn points(&self) -> Vec<f64> {
        self.horizons.iter().map(|h| h.estimate.map_or(f64::NAN, |e| e.coef)).collect()
    }
}

/// Regression arrays for one horizon after listwise deletion and removal of
/// dependent nuisance columns. Key columns come last.
#[derive(Debug, Clone, PartialEq)]
pub struct LpDesign {
    pub y: Vector,
    pub x: Matrix,
    pub names: Vec<String>,
    pub n_key: usize,
    /// Excluded instrument (IV runs only).
    pub instrument: Option<Vector>,
    /// Period index of each row, the clustering key.
    pub dates: Vec<usize>,
    pub countries: Vec<usize>,
    pub dropped: Vec<String>,
}

impl LpDesign {
    pub fn nobs(&self) -> usize {
        self.y.len()
    }

    pub fn key_range(&self) -> core::ops::Range<usize> {
        self.x.ncols() - self.n_key..self.x.ncols()
    }
}

fn var_index(panel: &PanelDataset, name: &str) -> Result<usize> {
    panel.var_index(name).ok_or_else(|| crate::Error::Domain(format!("variable {name:?} is not in the panel")))
}

/// Builds the horizon-`h` design.
pub fn lp_design(panel: &PanelDataset, outcome: &str, spec: &LpSpec, h: usize) -> Result<LpDesign> {
    spec.validate()?;
    let out_v = var_index(panel, outcome)?;
    let controls: Vec<usize> = match &spec.controls {
        None => (0..panel.n_vars()).collect(),
        Some(names) => names.iter().map(|n| var_index(panel, n)).collect::<Result<_>>()?,
    };
    let endog_v = match &spec.iv {
        Some(iv) => Some(var_index(panel, &iv.endogenous)?),
        None => None,
    };
    let (nc, nt) = (panel.n_countries(), panel.n_periods());
    let start = spec.control_lags.max(spec.shock_lags);
    let cal = panel.calendar();
    let n_seasons = cal.freq().periods_per_year() as usize;
    let country_fe = spec.country_fe || spec.trends != Trend::None;
    let shock = panel.shock();

    let mut names: Vec<String> = alloc::vec!["const".to_string()];
    if spec.season_fe {
        names.extend((2..=n_seasons).map(|s| format!("season{s}")));
    }
    if country_fe {
        names.extend(panel.countries()[1..].iter().map(|c| format!("fe_{c}")));
    }
    let trend_powers: &[i32] = match spec.trends {
        Trend::None => &[],
        Trend::Linear => &[1],
        Trend::Quadratic => &[1, 2],
    };
    for c in panel.countries() {
        for p in trend_powers {
            names.push(format!("trend{p}_{c}"));
        }
    }
    for l in 1..=spec.control_lags {
        for &v in &controls {
            names.push(format!("{}_l{l}", panel.variables()[v]));
        }
    }
    for l in 1..=spec.shock_lags {
        names.push(format!("shock_l{l}"));
    }
    let n_key = if spec.sign_split { 2 } else { 1 };
    match (&spec.iv, spec.sign_split) {
        (Some(iv), _) => names.push(iv.endogenous.clone()),
        (None, true) => names.extend(["shock_pos".to_string(), "shock_neg".to_string()]),
        (None, false) => names.push("shock".to_string()),
    }
    let k = names.len();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut ys = Vec::new();
    let mut zs = Vec::new();
    let mut dates = Vec::new();
    let mut countries = Vec::new();
    for c in 0..nc {
        for t in start..nt.saturating_sub(h) {
            let y = panel.get(c, t + h, out_v);
            let mut row = Vec::with_capacity(k);
            row.push(1.0);
            if spec.season_fe {
                let s = cal.period(t).season() as usize;
                row.extend((2..=n_seasons).map(|j| f64::from(u8::from(s == j))));
            }
            if country_fe {
                row.extend((1..nc).map(|j| f64::from(u8::from(c == j))));
            }
            let tau = t as f64 / nt as f64;
            for cc in 0..nc {
                for p in trend_powers {
                    row.push(if cc == c { libm::pow(tau, f64::from(*p)) } else { 0.0 });
                }
            }
            for l in 1..=spec.control_lags {
                row.extend(controls.iter().map(|&v| panel.get(c, t - l, v)));
            }
            row.extend((1..=spec.shock_lags).map(|l| shock[t - l]));
            match endog_v {
                Some(e) => row.push(panel.get(c, t, e)),
                None if spec.sign_split => row.extend([shock[t].max(0.0), shock[t].min(0.0)]),
                None => row.push(shock[t]),
            }
            if !y.is_finite() || row.iter().any(|v| !v.is_finite()) {
                continue;
            }
            rows.push(row);
            ys.push(y);
            zs.push(shock[t]);
            dates.push(t);
            countries.push(c);
        }
    }
    let n = rows.len();
    if n == 0 {
        bail!(InsufficientData, "no complete rows at horizon {h}");
    }
    let full = Matrix::from_fn(n, k, |i, j| rows[i][j]);

    if spec.sign_split {
        let pos = zs.iter().any(|s| *s > 0.0);
        let neg = zs.iter().any(|s| *s < 0.0);
        if !pos || !neg {
            let missing = if pos { "contractionary (negative)" } else { "expansionary (positive)" };
            bail!(Domain, "the shock has no {missing} observations at horizon {h}; sign split needs both regimes");
        }
    }

    // dependent nuisance columns are dropped; key columns and the instrument must survive
    let kept = linalg::independent_columns(&full, COLLINEAR_TOL);
    if let Some(j) = (k - n_key..k).find(|j| !kept.contains(j)) {
        bail!(Collinear, "{} is collinear with the controls at horizon {h} or has no variation", names[j]);
    }
    if spec.iv.is_some() {
        let nuisance: Vec<usize> = kept.iter().copied().filter(|j| *j < k - n_key).collect();
        let last = nuisance.len();
        let mut zx = linalg::select_columns(&full, &nuisance).insert_column(last, 0.0);
        zx.column_mut(last).copy_from_slice(&zs);
        if !linalg::independent_columns(&zx, COLLINEAR_TOL).contains(&last) {
            bail!(Collinear, "the instrument (shock) is collinear with the controls at horizon {h} or has no variation");
        }
    }
    let dropped = (0..k).filter(|j| !kept.contains(j)).map(|j| names[j].clone()).collect();
    let x = linalg::select_columns(&full, &kept);
    let names = kept.iter().map(|&j| names[j].clone()).collect();
    if n <= x.ncols() {
        bail!(InsufficientData, "{n} rows for {} regressors at horizon {h}", x.ncols());
    }
    Ok(LpDesign {
        y: Vector::from_vec(ys),
        x,
        names,
        n_key,
        instrument: spec.iv.as_ref().map(|_| Vector::from_vec(zs)),
        dates,
        countries,
        dropped,
    })
}

/// Row scores `x_i u_i` for the sandwich.
pub fn scores(x: &Matrix, resid: &Vector) -> Matrix {
    let mut s = x.clone();
    for (i, u) in resid.iter().enumerate() {
        s.row_mut(i).scale_mut(*u);
    }
    s
}

fn iid_cov(bread: &Matrix, resid: &Vector, k: usize) -> Matrix {
    let n = resid.len();
    bread * (resid.norm_squared() / (n - k) as f64)
}

fn estimates(coef: &Vector, cov: &ClusterCov, iid: &Matrix, range: core::ops::Range<usize>) -> Vec<Estimate> {
    range.map(|j| Estimate::new(coef[j], cov.se(j), libm::sqrt(iid[(j, j)].max(0.0)))).collect()
}

/// Two-stage least squares with the same controls in both stages.
pub struct TwoStage {
    pub coef: Vector,
    /// Structural residuals `y - X b`.
    pub resid: Vector,
    /// Second-stage design with the endogenous column replaced by its fit.
    pub x_hat: Matrix,
    /// `(X_hat' X_hat)^{-1}`.
    pub bread: Matrix,
    pub first_stage_coef: f64,
    pub first_stage: ClusterCov,
    pub first_stage_iid_var: f64,
}

/// 2SLS of `y` on `x` whose last column is instrumented by `z`, clustering
/// the first stage by `dates`.
pub fn two_stage(x: &Matrix, y: &Vector, z: &Vector, dates: &[usize]) -> Result<TwoStage> {
    let k = x.ncols();
    let mut zx = x.clone();
    zx.set_column(k - 1, z);
    let endog = x.column(k - 1).into_owned();
    let fs = linalg::least_squares(&zx, &endog, None)?;
    let fs_cov = cluster::oneway_cluster_cov(&fs.bread, &scores(&zx, &fs.resid), dates)?;
    let fs_iid = iid_cov(&fs.bread, &fs.resid, k)[(k - 1, k - 1)];
    let mut x_hat = x.clone();
    x_hat.set_column(k - 1, &(&endog - &fs.resid));
    let ss = linalg::least_squares(&x_hat, y, None)?;
    let resid = y - x * &ss.coef;
    Ok(TwoStage {
        coef: ss.coef,
        resid,
        x_hat,
        bread: ss.bread,
        first_stage_coef: fs.coef[k - 1],
        first_stage: fs_cov,
        first_stage_iid_var: fs_iid,
    })
}

/// One horizon of any LP variant selected by `spec`.
pub fn estimate_lp_horizon(panel: &PanelDataset, outcome: &str, spec: &LpSpec, h: usize) -> Result<LpHorizon> {
    let d = lp_design(panel, outcome, spec, h)?;
    let (n, k) = d.x.shape();
    let key = d.key_range();
    let mut out = LpHorizon {
        h,
        estimate: None,
        expansion: None,
        contraction: None,
        nobs: n,
        n_clusters: 0,
        first_stage_f: None,
        weak_instrument: false,
        dropped: d.dropped.clone(),
    };
    if let (Some(iv), Some(z)) = (&spec.iv, &d.instrument) {
        let ts = two_stage(&d.x, &d.y, z, &d.dates)?;
        let cov = cluster::oneway_cluster_cov(&ts.bread, &scores(&ts.x_hat, &ts.resid), &d.dates)?;
        let iid = iid_cov(&ts.bread, &ts.resid, k);
        let f = match iv.f_stat {
            FStat::ClusterRobust => ts.first_stage_coef * ts.first_stage_coef / ts.first_stage.cov[(k - 1, k - 1)],
            FStat::Homoskedastic => ts.first_stage_coef * ts.first_stage_coef / ts.first_stage_iid_var,
        };
        out.estimate = Some(estimates(&ts.coef, &cov, &iid, key)[0].scaled(iv.scale()));
        out.n_clusters = cov.n_clusters[0];
        out.first_stage_f = Some(f);
        out.weak_instrument = !(f >= iv.weak_f_floor);
        return Ok(out);
    }
    let fit = linalg::least_squares(&d.x, &d.y, None)?;
    let cov = cluster::oneway_cluster_cov(&fit.bread, &scores(&d.x, &fit.resid), &d.dates)?;
    let iid = iid_cov(&fit.bread, &fit.resid, k);
    let est = estimates(&fit.coef, &cov, &iid, key);
    out.n_clusters = cov.n_clusters[0];
    if spec.sign_split {
        out.expansion = Some(est[0]);
        out.contraction = Some(est[1]);
    } else {
        out.estimate = Some(est[0]);
    }
    Ok(out)
}

fn run(panel: &PanelDataset, outcome: &str, spec: &LpSpec) -> Result<LpResult> {
    spec.validate()?;
    let mut notes = Vec::new();
    if spec.trends != Trend::None && !spec.country_fe {
        notes.push("country trends require country fixed effects; country FE added".to_string());
    }
    let horizons = (0..=spec.horizons).map(|h| estimate_lp_horizon(panel, outcome, spec, h)).collect::<Result<Vec<_>>>()?;
    if horizons.iter().any(|h| h.weak_instrument) {
        notes.push("first-stage F below the weak-instrument floor at some horizons".to_string());
    }
    Ok(LpResult { outcome: outcome.to_string(), horizons, notes })
}

/// OLS local projections of `outcome` on the panel shock.
pub fn estimate_lp(panel: &PanelDataset, outcome: &str, spec: &LpSpec) -> Result<LpResult> {
    if spec.iv.is_some() || spec.sign_split {
        bail!(Domain, "estimate_lp takes a plain specification; use the IV or sign-split entry points");
    }
    run(panel, outcome, spec)
}

/// 2SLS local projections instrumenting `spec.iv.endogenous` with the shock.
pub fn estimate_iv_lp(panel: &PanelDataset, outcome: &str, spec: &LpSpec) -> Result<LpResult> {
    if spec.iv.is_none() {
        bail!(Domain, "IV projections need an IV specification");
    }
    run(panel, outcome, spec)
}

/// Local projections with separate coefficients on positive and negative
/// shock realizations.
pub fn estimate_lp_sign_split(panel: &PanelDataset, outcome: &str, spec: &LpSpec) -> Result<LpResult> {
    let spec = LpSpec { sign_split: true, ..spec.clone() };
    run(panel, outcome, &spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::{Calendar, Period};
    use crate::rng;

    fn simple_panel(seed: u64, n: usize, loading: f64) -> PanelDataset {
        let cal = Calendar::new(Period::quarterly(2000, 1), Period::quarterly(2014, 4)).unwrap();
        let names = (0..n).map(|i| format!("C{i}")).collect();
        let mut p = PanelDataset::new(names, cal, alloc::vec!["y".into(), "w".into()], alloc::vec![false, true]).unwrap();
        let mut r = rng::substream(seed, 0);
        let shock: Vec<f64> = (0..cal.len).map(|_| rng::normal(&mut r)).collect();
        let w: Vec<f64> = (0..cal.len).map(|_| rng::normal(&mut r)).collect();
        for c in 0..n {
            for t in 0..cal.len {
                p.set(c, t, 0, loading * shock[t] + rng::normal(&mut r));
                p.set(c, t, 1, w[t]);
            }
        }
        p.set_shock(shock).unwrap();
        p
    }

    #[test]
    fn design_columns_and_rows() {
        let p = simple_panel(1, 3, 0.5);
        let d = lp_design(&p, "y", &LpSpec::default(), 4).unwrap();
        assert_eq!(d.nobs(), 3 * (60 - 2 - 4));
        assert_eq!(d.names.last().unwrap(), "shock");
        assert_eq!(d.x.ncols(), 1 + 3 + 2 * 2 + 2 + 1);
    }

    #[test]
    fn zero_shock_is_collinear() {
        let mut p = simple_panel(2, 3, 0.5);
        p.set_shock(alloc::vec![0.0; 60]).unwrap();
        let err = estimate_lp(&p, "y", &LpSpec { horizons: 0, ..LpSpec::default() }).unwrap_err();
        assert!(matches!(err, crate::Error::Collinear(_)));
    }

    #[test]
    fn horizon_zero_without_controls_is_simple_slope() {
        let p = simple_panel(3, 4, 0.7);
        let spec = LpSpec { horizons: 0, controls: Some(Vec::new()), control_lags: 0, shock_lags: 0, season_fe: false, ..LpSpec::default() };
        let est = estimate_lp(&p, "y", &spec).unwrap().horizons[0].estimate.unwrap();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for c in 0..4 {
            for t in 0..60 {
                xs.push(p.shock()[t]);
                ys.push(p.get(c, t, 0));
            }
        }
        let slope = crate::stats::covariance(&xs, &ys) / crate::stats::variance(&xs);
        assert!((est.coef - slope).abs() < 1e-12);
        assert!(est.bands_ordered());
    }

    #[test]
    fn single_signed_shock_names_missing_regime() {
        let mut p = simple_panel(4, 2, 0.5);
        let s: Vec<f64> = p.shock().iter().map(|v| v.abs() + 0.1).collect();
        p.set_shock(s).unwrap();
        let err = estimate_lp_sign_split(&p, "y", &LpSpec { horizons: 0, ..LpSpec::default() }).unwrap_err();
        assert!(alloc::format!("{err}").contains("contractionary"));
    }

    #[test]
    fn trends_force_country_effects() {
        let p = simple_panel(5, 3, 0.5);
        let spec = LpSpec { horizons: 1, trends: Trend::Quadratic, ..LpSpec::default() };
        let r = estimate_lp(&p, "y", &spec).unwrap();
        assert_eq!(r.notes.len(), 1);
        let d = lp_design(&p, "y", &spec, 0).unwrap();
        assert!(d.names.iter().any(|n| n == "fe_C1"));
        assert!(d.names.iter().any(|n| n == "trend2_C2"));
    }

    #[test]
    fn perfect_instrument_equals_ols() {
        let mut p = simple_panel(6, 3, 0.5);
        let w = p.series(0, 1);
        p.set_shock(w).unwrap();
        let spec = LpSpec { horizons: 2, ..LpSpec::default() };
        let ols = estimate_lp(&p, "y", &spec).unwrap();
        let iv = IvSpec { endogenous: "w".into(), ..IvSpec::default() };
        let ivr = estimate_iv_lp(&p, "y", &LpSpec { iv: Some(iv.clone()), ..spec }).unwrap();
        for (a, b) in ols.horizons.iter().zip(&ivr.horizons) {
            let (a, b) = (a.estimate.unwrap().coef, b.estimate.unwrap().coef / iv.scale());
            assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
        }
    }
}
