//! Interaction local projections on loan registries.
//!
//! For each horizon `h` the outcome is `ln L_{u,t+h} - ln L_{u,t-1}` for a
//! lending unit `u`. Key regressors are the shock (optional), the shock
//! times each lagged characteristic, and, under a sign split, the same terms
//! built separately from the positive and negative parts of the shock.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::absorb::{absorb_fixed_effects, AbsorbOptions, FeGroups};
use super::frame::{Key, MicroFrame};
use crate::cluster::{oneway_cluster_cov, twoway_cluster_cov, ClusterCov};
use crate::linalg::{independent_columns, least_squares, Matrix, Vector, COLLINEAR_TOL};
use crate::lp::scores;
use crate::stats::student_t_quantile;
use crate::shocks::PeriodShockSeries;
use crate::{bail, Error, Result};

/// Columns whose absorbed norm falls below this fraction of the raw norm are
/// treated as spanned by the fixed effects.
pub const ABSORBED_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionSpec {
    /// One or two characteristics interacted with the shock.
    pub interactions: Vec<String>,
    /// Characteristics entering in levels.
    pub controls: Vec<String>,
    pub macro_controls: Vec<String>,
    /// Add the level of every interacted characteristic to the controls.
    pub interaction_levels: bool,
    pub horizon: usize,
    pub fe: Vec<Key>,
    /// One or two cluster keys.
    pub cluster: Vec<Key>,
    pub weighted: bool,
    pub include_main_effect: bool,
    pub sign_split: bool,
    pub absorb: AbsorbOptions,
}

impl Default for InteractionSpec {
    fn default() -> Self {
        InteractionSpec {
            interactions: alloc::vec!["leverage".into()],
            controls: Vec::new(),
            macro_controls: Vec::new(),
            interaction_levels: true,
            horizon: 0,
            fe: alloc::vec![Key::bank(), Key::currency()],
            cluster: alloc::vec![Key::bank(), Key::month()],
            weighted: true,
            include_main_effect: true,
            sign_split: false,
            absorb: AbsorbOptions::default(),
        }
    }
}

impl InteractionSpec {
    pub fn validate(&self, frame: &MicroFrame) -> Result<()> {
        if !(1..=2).contains(&self.interactions.len()) {
            bail!(Domain, "one or two interaction characteristics are supported, got {}", self.interactions.len());
        }
        if self.interactions.len() == 2 && self.interactions[0] == self.interactions[1] {
            bail!(Domain, "the two interaction characteristics must differ");
        }
        for name in self.interactions.iter().chain(&self.controls) {
            frame.require_characteristic(name)?;
        }
        for name in &self.macro_controls {
            if frame.macro_control(name).is_none() {
                bail!(Domain, "macro control {name:?} is not in the frame");
            }
        }
        for key in &self.fe {
            frame.check_fe_key(key)?;
        }
        let time_fe = self.fe.iter().any(Key::has_month);
        if time_fe && self.include_main_effect {
            bail!(Domain, "the main shock effect is absorbed by month fixed effects; set include_main_effect to false");
        }
        if time_fe && !self.macro_controls.is_empty() {
            bail!(Domain, "macro controls are absorbed by month fixed effects");
        }
        if !(1..=2).contains(&self.cluster.len()) {
            bail!(Domain, "one or two cluster keys are required, got {}", self.cluster.len());
        }
        if self.cluster.iter().any(|k| k.0.is_empty()) {
            bail!(Domain, "empty cluster key");
        }
        for key in &self.cluster {
            frame.key_values(key)?;
        }
        if self.weighted && frame.weights().is_none() {
            bail!(Domain, "weighted estimation requested but the frame has no weights");
        }
        Ok(())
    }

    /// Names of the key regressors in output order.
    pub fn term_names(&self) -> Vec<String> {
        let parts: &[&str] = if self.sign_split { &["shock_pos", "shock_neg"] } else { &["shock"] };
        let mut out = Vec::new();
        for p in parts {
            if self.include_main_effect {
                out.push(p.to_string());
            }
            for x in &self.interactions {
                out.push(format!("{p}:{x}"));
            }
        }
        out
    }
}

/// One coefficient with its bands.
///
/// Bands use Student-t critical values with `dof` degrees of freedom, the
/// smallest cluster count minus one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicroTerm {
    pub coef: f64,
    pub se: f64,
    pub dof: f64,
    pub lo68: f64,
    pub hi68: f64,
    pub lo90: f64,
    pub hi90: f64,
    pub lo95: f64,
    pub hi95: f64,
}

impl MicroTerm {
    pub fn new(coef: f64, se: f64, dof: f64) -> Self {
        let [c68, c90, c95] = [0.84, 0.95, 0.975].map(|p| student_t_quantile(p, dof));
        MicroTerm {
            coef,
            se,
            dof,
            lo68: coef - c68 * se,
            hi68: coef + c68 * se,
            lo90: coef - c90 * se,
            hi90: coef + c90 * se,
            lo95: coef - c95 * se,
            hi95: coef + c95 * se,
        }
    }

    pub fn covers95(&self, v: f64) -> bool {
        self.lo95 <= v && v <= self.hi95
    }

    pub fn significant90(&self) -> bool {
        self.hi90 < 0.0 || self.lo90 > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionResult {
    pub horizon: usize,
    pub terms: Vec<(String, MicroTerm)>,
    pub nobs: usize,
    pub n_clusters: Vec<usize>,
    pub psd_repaired: bool,
    pub sweeps: usize,
    /// Nuisance regressors dropped as collinear after absorption.
    pub dropped: Vec<String>,
}

impl InteractionResult {
    pub fn term(&self, name: &str) -> Option<&MicroTerm> {
        self.terms.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

/// Regression inputs for one horizon before absorption.
#[derive(Debug, Clone)]
pub struct InteractionDesign {
    pub y: Vector,
    /// Nuisance columns followed by the key columns.
    pub x: Matrix,
    pub names: Vec<String>,
    pub n_key: usize,
    pub rows: Vec<usize>,
    pub weights: Option<Vec<f64>>,
}

/// Builds the outcome and regressors for horizon `spec.horizon`, dropping
/// rows where any input is missing.
pub fn interaction_design(frame: &MicroFrame, shock: &PeriodShockSeries, spec: &InteractionSpec) -> Result<InteractionDesign> {
    spec.validate(frame)?;
    if shock.calendar.freq() != crate::calendar::Frequency::Monthly {
        bail!(Domain, "micro regressions need a monthly shock series");
    }
    let h = spec.horizon as i64;
    let inter: Vec<&[f64]> = spec.interactions.iter().map(|n| frame.require_characteristic(n)).collect::<Result<_>>()?;
    let mut level_names: Vec<&String> = spec.controls.iter().collect();
    if spec.interaction_levels {
        for x in &spec.interactions {
            if !level_names.contains(&x) {
                level_names.push(x);
            }
        }
    }
    let levels: Vec<&[f64]> = level_names.iter().map(|n| frame.require_characteristic(n)).collect::<Result<_>>()?;
    let macros: Vec<_> = spec.macro_controls.iter().map(|n| frame.macro_control(n).unwrap()).collect();
    let intercept = spec.fe.is_empty();

    let mut names: Vec<String> = Vec::new();
    if intercept {
        names.push("const".into());
    }
    names.extend(level_names.iter().map(|s| s.to_string()));
    names.extend(spec.macro_controls.iter().cloned());
    let n_nuisance = names.len();
    names.extend(spec.term_names());
    let n_key = names.len() - n_nuisance;

    let mut rows = Vec::new();
    let mut ys = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    'rows: for i in 0..frame.len() {
        let t = frame.month()[i];
        let Some(ti) = shock.calendar.index_of(t) else { continue };
        let s = shock.values[ti];
        let unit = frame.unit(i);
        let (Some(base), Some(end)) = (frame.find(unit, t.offset(-1)), frame.find(unit, t.offset(h))) else {
            continue;
        };
        let y = libm::log(frame.loan()[end]) - libm::log(frame.loan()[base]);
        let mut row = Vec::with_capacity(names.len());
        if intercept {
            row.push(1.0);
        }
        for l in &levels {
            row.push(l[i]);
        }
        for m in &macros {
            match m.get(&t) {
                Some(v) => row.push(*v),
                None => continue 'rows,
            }
        }
        let parts: &[f64] = if spec.sign_split { &[s.max(0.0), s.min(0.0)] } else { &[s] };
        for p in parts {
            if spec.include_main_effect {
                row.push(*p);
            }
            for x in &inter {
                row.push(p * x[i]);
            }
        }
        if !y.is_finite() || row.iter().any(|v| !v.is_finite()) {
            continue;
        }
        rows.push(i);
        ys.push(y);
        xs.extend(row);
    }
    let n = rows.len();
    if n == 0 {
        bail!(InsufficientData, "no rows have the outcome at horizon {h} and every regressor");
    }
    if spec.sign_split {
        let pos = rows.iter().any(|&i| shock.values[shock.calendar.index_of(frame.month()[i]).unwrap()] > 0.0);
        let neg = rows.iter().any(|&i| shock.values[shock.calendar.index_of(frame.month()[i]).unwrap()] < 0.0);
        if !(pos && neg) {
            bail!(Degenerate, "sign split needs both positive and negative shocks in the sample");
        }
    }
    let weights = if spec.weighted { frame.weights().map(|w| rows.iter().map(|&i| w[i]).collect()) } else { None };
    Ok(InteractionDesign {
        y: Vector::from_vec(ys),
        x: Matrix::from_row_slice(n, names.len(), &xs),
        names,
        n_key,
        rows,
        weights,
    })
}

fn groups(frame: &MicroFrame, key: &Key, rows: &[usize]) -> Result<Vec<Vec<i64>>> {
    let all = frame.key_values(key)?;
    Ok(rows.iter().map(|&i| all[i].clone()).collect())
}

/// Estimates one horizon of the interaction local projection.
pub fn lp_interaction(frame: &MicroFrame, shock: &PeriodShockSeries, spec: &InteractionSpec) -> Result<InteractionResult> {
    let d = interaction_design(frame, shock, spec)?;
    let n = d.rows.len();
    let fe: Vec<FeGroups> = spec.fe.iter().map(|k| groups(frame, k, &d.rows).map(|g| FeGroups::from_keys(&g))).collect::<Result<_>>()?;

    let mut joint = Matrix::zeros(n, d.x.ncols() + 1);
    joint.column_mut(0).copy_from(&d.y);
    joint.columns_mut(1, d.x.ncols()).copy_from(&d.x);
    let absorbed = absorb_fixed_effects(&joint, &fe, d.weights.as_deref(), spec.absorb)?;
    let y = absorbed.data.column(0).into_owned();
    let mut x = absorbed.data.columns(1, d.x.ncols()).into_owned();

    let n_nuisance = d.names.len() - d.n_key;
    for j in 0..x.ncols() {
        if x.column(j).norm() <= ABSORBED_TOL * d.x.column(j).norm() {
            if j >= n_nuisance {
                bail!(Collinear, "{} has no variation left after absorbing the fixed effects", d.names[j]);
            }
            x.column_mut(j).fill(0.0);
        }
    }
    let wx = match &d.weights {
        Some(w) => Matrix::from_fn(n, x.ncols(), |i, j| x[(i, j)] * libm::sqrt(w[i])),
        None => x.clone(),
    };
    let keep = independent_columns(&wx, COLLINEAR_TOL);
    for j in n_nuisance..d.names.len() {
        if !keep.contains(&j) {
            bail!(Collinear, "{} is collinear with the other regressors", d.names[j]);
        }
    }
    let dropped = (0..n_nuisance).filter(|j| !keep.contains(j)).map(|j| d.names[j].clone()).collect();
    let xk = crate::linalg::select_columns(&x, &keep);
    let fit = least_squares(&xk, &y, d.weights.as_deref())?;
    let resid = match &d.weights {
        Some(w) => Vector::from_iterator(n, fit.resid.iter().zip(w).map(|(u, w)| u * w)),
        None => fit.resid.clone(),
    };
    let sc = scores(&xk, &resid);
    let cov = cluster_cov(frame, spec, &d.rows, &fit.bread, &sc)?;
    let k0 = keep.len() - d.n_key;
    let dof = (cov.n_clusters.iter().copied().min().unwrap_or(2) - 1) as f64;
    let terms = (0..d.n_key).map(|j| (d.names[n_nuisance + j].clone(), MicroTerm::new(fit.coef[k0 + j], cov.se(k0 + j), dof))).collect();
    Ok(InteractionResult {
        horizon: spec.horizon,
        terms,
        nobs: n,
        n_clusters: cov.n_clusters,
        psd_repaired: cov.psd_repaired,
        sweeps: absorbed.sweeps,
        dropped,
    })
}

fn cluster_cov(frame: &MicroFrame, spec: &InteractionSpec, rows: &[usize], bread: &Matrix, sc: &Matrix) -> Result<ClusterCov> {
    let a = groups(frame, &spec.cluster[0], rows)?;
    match spec.cluster.get(1) {
        None => oneway_cluster_cov(bread, sc, &a),
        Some(kb) => {
            let b = groups(frame, kb, rows)?;
            twoway_cluster_cov(bread, sc, &a, &b)
        }
    }
}

/// Runs [`lp_interaction`] for each horizon in `horizons`.
pub fn lp_interaction_path(
    frame: &MicroFrame,
    shock: &PeriodShockSeries,
    spec: &InteractionSpec,
    horizons: impl IntoIterator<Item = usize>,
) -> Result<Vec<InteractionResult>> {
    horizons
        .into_iter()
        .map(|h| {
            let s = InteractionSpec { horizon: h, ..spec.clone() };
            lp_interaction(frame, shock, &s).map_err(|e| match e {
                Error::InsufficientData(m) => Error::InsufficientData(format!("horizon {h}: {m}")),
                other => other,
            })
        })
        .collect()
}

/// Response implied by a level coefficient and an interaction slope at
/// characteristic value `x`.
pub fn marginal_effect(beta_h: f64, delta_h: f64, x: f64) -> f64 {
    beta_h + delta_h * x
}
