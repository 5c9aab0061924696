//! Pooled and group-mean panel Bayesian VARs with an exogenous shock.
//!
//! The stacked system is `Y = X B + E` with rows pooled across countries and
//! a common error covariance. Regressor columns are ordered as
//! `[lag 1 of all variables, ..., lag p of all variables, shock, intercept]`
//! (the shock column is omitted for recursive-identification VARs).

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::linalg::{self, Matrix, Vector};
use crate::panel::PanelDataset;
use crate::rng::{self, StreamRng};
use crate::stats;
use crate::{bail, Error, Result};

/// Smallest accepted posterior sample.
pub const MIN_DRAWS: usize = 500;

/// Litterman prior with a fixed diagonal error covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinnesotaPrior {
    pub tightness: f64,
    pub cross_factor: f64,
    pub lag_decay: f64,
    /// Prior SD of shock loadings and intercepts, in units of the equation's
    /// residual SD.
    pub exog_scale: f64,
}

impl Default for MinnesotaPrior {
    fn default() -> Self {
        MinnesotaPrior { tightness: 0.2, cross_factor: 0.5, lag_decay: 1.0, exog_scale: 100.0 }
    }
}

/// Conjugate Normal-Wishart prior implemented with dummy observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalWishartPrior {
    pub tightness: f64,
    pub lag_decay: f64,
    pub exog_scale: f64,
}

impl Default for NormalWishartPrior {
    fn default() -> Self {
        NormalWishartPrior { tightness: 0.2, lag_decay: 1.0, exog_scale: 100.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prior {
    Flat,
    NormalWishart(NormalWishartPrior),
    Minnesota(MinnesotaPrior),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarSpec {
    pub lags: usize,
    pub prior: Prior,
    pub draws: usize,
    pub seed: u64,
    /// Counts each period of an equation shared by every unit once rather
    /// than once per unit when forming posterior dispersion.
    pub shared_block_correction: bool,
}

impl Default for VarSpec {
    fn default() -> Self {
        VarSpec { lags: 2, prior: Prior::Minnesota(MinnesotaPrior::default()), draws: 1000, seed: 0, shared_block_correction: true }
    }
}

impl VarSpec {
    pub fn validate(&self) -> Result<()> {
        if self.lags == 0 {
            bail!(Domain, "a VAR needs at least one lag");
        }
        if self.draws < MIN_DRAWS {
            bail!(Domain, "at least {MIN_DRAWS} posterior draws are required, got {}", self.draws);
        }
        Ok(())
    }
}

/// Stacked regression arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct VarDesign {
    pub y: Matrix,
    pub x: Matrix,
    pub variables: Vec<String>,
    pub lags: usize,
    pub n_units: usize,
    pub rows_per_unit: usize,
    pub has_shock: bool,
    /// Equations whose dependent variable is identical across units.
    pub shared: Vec<bool>,
}

impl VarDesign {
    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn n_regressors(&self) -> usize {
        self.x.ncols()
    }

    /// Row of the coefficient matrix holding the shock loading.
    pub fn shock_row(&self) -> Option<usize> {
        self.has_shock.then_some(self.n_vars() * self.lags)
    }

    pub fn intercept_row(&self) -> usize {
        self.x.ncols() - 1
    }
}

/// Builds the design from per-unit `T x m` data blocks.
pub fn design_from_units(
    units: &[Matrix],
    variables: Vec<String>,
    lags: usize,
    shock: Option<&[f64]>,
) -> Result<VarDesign> {
    let m = variables.len();
    let Some(first) = units.first() else {
        bail!(InsufficientData, "no units supplied");
    };
    let t = first.nrows();
    if units.iter().any(|u| u.nrows() != t || u.ncols() != m) {
        bail!(Dimension, "every unit block must be {t} x {m}");
    }
    if lags == 0 {
        bail!(Domain, "a VAR needs at least one lag");
    }
    if t <= lags {
        bail!(InsufficientData, "{t} periods cannot support {lags} lags");
    }
    if let Some(s) = shock {
        if s.len() != t {
            bail!(Dimension, "shock has {} periods, data has {t}", s.len());
        }
    }
    if units.iter().any(|u| u.iter().any(|v| !v.is_finite())) || shock.is_some_and(|s| s.iter().any(|v| !v.is_finite())) {
        bail!(Domain, "VAR inputs must be finite");
    }
    let k = m * lags + usize::from(shock.is_some()) + 1;
    let rows_per_unit = t - lags;
    let n = units.len() * rows_per_unit;
    let mut y = Matrix::zeros(n, m);
    let mut x = Matrix::zeros(n, k);
    for (u, data) in units.iter().enumerate() {
        for s in lags..t {
            let row = u * rows_per_unit + (s - lags);
            for j in 0..m {
                y[(row, j)] = data[(s, j)];
            }
            for l in 1..=lags {
                for j in 0..m {
                    x[(row, (l - 1) * m + j)] = data[(s - l, j)];
                }
            }
            if let Some(sh) = shock {
                x[(row, m * lags)] = sh[s];
            }
            x[(row, k - 1)] = 1.0;
        }
    }
    Ok(VarDesign { y, x, shared: alloc::vec![false; m], variables, lags, n_units: units.len(), rows_per_unit, has_shock: shock.is_some() })
}

fn unit_blocks(panel: &PanelDataset) -> Vec<Matrix> {
    (0..panel.n_countries())
        .map(|c| Matrix::from_fn(panel.n_periods(), panel.n_vars(), |t, v| panel.get(c, t, v)))
        .collect()
}

/// Pools every country's rows into one stacked regression with the shock
/// entering contemporaneously.
pub fn build_pooled_design(panel: &PanelDataset, spec: &VarSpec) -> Result<VarDesign> {
    panel.require_balanced()?;
    if spec.lags == 0 {
        bail!(Domain, "a VAR needs at least one lag");
    }
    let mut design = design_from_units(&unit_blocks(panel), panel.variables().to_vec(), spec.lags, Some(panel.shock()))?;
    if panel.n_countries() > 1 {
        design.shared = (0..panel.n_vars()).map(|v| panel.is_global(v)).collect();
    }
    Ok(design)
}

/// Posterior sample of `(B, Sigma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarPosterior {
    /// `K x m` coefficient draws in design-column order.
    pub coef_draws: Vec<Matrix>,
    pub sigma_draws: Vec<Matrix>,
    /// Analytic posterior mean of `B`.
    pub posterior_mean: Matrix,
    pub variables: Vec<String>,
    pub lags: usize,
    pub has_shock: bool,
    pub n_rows: usize,
}

impl VarPosterior {
    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn shock_row(&self) -> Option<usize> {
        self.has_shock.then_some(self.n_vars() * self.lags)
    }
}

/// Residual SD of a univariate AR(p) with intercept for each variable.
fn ar_residual_sds(design: &VarDesign) -> Result<Vec<f64>> {
    let (m, p) = (design.n_vars(), design.lags);
    let n = design.y.nrows();
    (0..m)
        .map(|j| {
            let x = Matrix::from_fn(n, p + 1, |r, c| if c < p { design.x[(r, c * m + j)] } else { 1.0 });
            let y = design.y.column(j).into_owned();
            let fit = linalg::least_squares(&x, &y, None)?;
            let dof = n.saturating_sub(p + 1).max(1) as f64;
            let sd = libm::sqrt(fit.resid.norm_squared() / dof);
            if !(sd > 0.0) {
                bail!(Degenerate, "variable {} is perfectly predicted by its own lags", design.variables[j]);
            }
            Ok(sd)
        })
        .collect()
}

fn prior_own_mean(name: &str) -> f64 {
    if name.starts_with("ln") {
        1.0
    } else {
        0.0
    }
}

/// Draws `Sigma ~ IW(S, nu)` by the Bartlett decomposition of its inverse.
fn draw_inverse_wishart(rng: &mut StreamRng, s_inv_chol: &Matrix, nu: f64) -> Option<Matrix> {
    let m = s_inv_chol.nrows();
    let mut a = Matrix::zeros(m, m);
    for i in 0..m {
        a[(i, i)] = libm::sqrt(rng::chi_square(rng, nu - i as f64));
        for j in 0..i {
            a[(i, j)] = rng::normal(rng);
        }
    }
    let la = s_inv_chol * a;
    let inv = la.solve_lower_triangular(&Matrix::identity(m, m))?;
    let sigma = inv.transpose() * inv;
    Some((&sigma + sigma.transpose()) * 0.5)
}

struct Niw {
    mean: Matrix,
    omega: Matrix,
    scale: Matrix,
    dof: f64,
}

fn niw_posterior(x: &Matrix, y: &Matrix) -> Result<Niw> {
    let (b, e, omega) = linalg::least_squares_multi(x, y)?;
    let dof = (x.nrows() - x.ncols()) as f64;
    let m = y.ncols();
    if dof <= (m as f64) - 1.0 {
        bail!(InsufficientData, "{} rows leave {dof} degrees of freedom for a {m}-variable error covariance", x.nrows());
    }
    Ok(Niw { mean: b, omega, scale: e.transpose() * e, dof })
}

fn sample_niw(niw: &Niw, draws: usize, seed: u64, dispersion: &[f64]) -> Result<(Vec<Matrix>, Vec<Matrix>)> {
    let s_inv = linalg::spd_inverse(&niw.scale)
        .ok_or_else(|| Error::Degenerate("residual cross-product matrix is singular".into()))?;
    let s_inv_chol = linalg::cholesky_lower(&s_inv)
        .ok_or_else(|| Error::Degenerate("residual cross-product matrix is not positive definite".into()))?;
    let omega_chol = linalg::cholesky_lower(&niw.omega)
        .ok_or_else(|| Error::Degenerate("design cross-product is not positive definite".into()))?;
    let (k, m) = niw.mean.shape();
    let mut coefs = Vec::with_capacity(draws);
    let mut sigmas = Vec::with_capacity(draws);
    for d in 0..draws {
        let mut rng = rng::substream(seed, d as u64);
        let sigma = draw_inverse_wishart(&mut rng, &s_inv_chol, niw.dof)
            .ok_or_else(|| Error::SolverFailure("inverse-Wishart draw failed".into()))?;
        let sigma_chol = linalg::cholesky_lower(&sigma)
            .ok_or_else(|| Error::SolverFailure("inverse-Wishart draw is not positive definite".into()))?;
        let z = Matrix::from_fn(k, m, |_, _| rng::normal(&mut rng));
        let mut dev = &omega_chol * z * sigma_chol.transpose();
        for (j, f) in dispersion.iter().enumerate() {
            if *f != 1.0 {
                dev.column_mut(j).scale_mut(*f);
            }
        }
        coefs.push(&niw.mean + dev);
        sigmas.push(sigma);
    }
    Ok((coefs, sigmas))
}

/// Dummy observations for the Normal-Wishart prior.
fn nw_dummies(design: &VarDesign, hyper: &NormalWishartPrior, sds: &[f64]) -> (Matrix, Matrix) {
    let (m, p, k) = (design.n_vars(), design.lags, design.n_regressors());
    let n_exog = k - m * p;
    let rows = m * p + m + n_exog;
    let mut yd = Matrix::zeros(rows, m);
    let mut xd = Matrix::zeros(rows, k);
    let lam = hyper.tightness;
    for l in 1..=p {
        let decay = libm::pow(l as f64, hyper.lag_decay);
        for j in 0..m {
            let r = (l - 1) * m + j;
            xd[(r, r)] = decay * sds[j] / lam;
            if l == 1 {
                yd[(r, j)] = prior_own_mean(&design.variables[j]) * sds[j] / lam;
            }
        }
    }
    for j in 0..m {
        yd[(m * p + j, j)] = sds[j];
    }
    for e in 0..n_exog {
        xd[(m * p + m + e, m * p + e)] = 1.0 / hyper.exog_scale;
    }
    (yd, xd)
}

fn minnesota_posterior(design: &VarDesign, spec: &VarSpec, hyper: &MinnesotaPrior) -> Result<VarPosterior> {
    let (m, p, k) = (design.n_vars(), design.lags, design.n_regressors());
    let sds = ar_residual_sds(design)?;
    let xtx = design.x.transpose() * &design.x;
    let xty = design.x.transpose() * &design.y;
    let mut mean = Matrix::zeros(k, m);
    let mut chols = Vec::with_capacity(m);
    let repeats = shared_repeats(design, spec);
    for i in 0..m {
        let s2 = sds[i] * sds[i] * repeats[i];
        let mut prior_prec = Vector::zeros(k);
        let mut prior_mean = Vector::zeros(k);
        for l in 1..=p {
            let decay = libm::pow(l as f64, hyper.lag_decay);
            for j in 0..m {
                let c = (l - 1) * m + j;
                let sd = if i == j {
                    hyper.tightness / decay
                } else {
                    hyper.tightness * hyper.cross_factor * sds[i] / (decay * sds[j])
                };
                prior_prec[c] = 1.0 / (sd * sd);
            }
        }
        prior_mean[i] = prior_own_mean(&design.variables[i]);
        for c in m * p..k {
            let sd = hyper.exog_scale * sds[i];
            prior_prec[c] = 1.0 / (sd * sd);
        }
        let precision = &xtx / s2 + Matrix::from_diagonal(&prior_prec);
        let cov = linalg::spd_inverse(&precision)
            .ok_or_else(|| Error::Degenerate("posterior precision is not positive definite".into()))?;
        let rhs = prior_prec.component_mul(&prior_mean) + xty.column(i) / s2;
        let b = &cov * rhs;
        mean.set_column(i, &b);
        chols.push(linalg::cholesky_lower(&cov).ok_or_else(|| Error::Degenerate("posterior covariance is not positive definite".into()))?);
    }
    let sigma = Matrix::from_diagonal(&Vector::from_iterator(m, sds.iter().map(|s| s * s)));
    let mut coef_draws = Vec::with_capacity(spec.draws);
    for d in 0..spec.draws {
        let mut rng = rng::substream(spec.seed, d as u64);
        let mut b = mean.clone();
        for (i, l) in chols.iter().enumerate() {
            let z = Vector::from_fn(k, |_, _| rng::normal(&mut rng));
            let col = mean.column(i) + l * z;
            b.set_column(i, &col);
        }
        coef_draws.push(b);
    }
    Ok(VarPosterior {
        sigma_draws: alloc::vec![sigma; spec.draws],
        coef_draws,
        posterior_mean: mean,
        variables: design.variables.clone(),
        lags: p,
        has_shock: design.has_shock,
        n_rows: design.y.nrows(),
    })
}

/// Number of times each equation's observations repeat in the stack.
fn shared_repeats(design: &VarDesign, spec: &VarSpec) -> Vec<f64> {
    design
        .shared
        .iter()
        .map(|s| if *s && spec.shared_block_correction { design.n_units as f64 } else { 1.0 })
        .collect()
}

/// Samples the posterior directly (no MCMC). Draw `d` uses substream `d` of
/// `spec.seed`.
pub fn estimate_bvar(design: &VarDesign, spec: &VarSpec) -> Result<VarPosterior> {
    spec.validate()?;
    if design.y.iter().chain(design.x.iter()).any(|v| !v.is_finite()) {
        bail!(Domain, "design contains non-finite values");
    }
    let dispersion: Vec<f64> = shared_repeats(design, spec).iter().map(|r| libm::sqrt(*r)).collect();
    let wrap = |niw: Niw| -> Result<VarPosterior> {
        let (coef_draws, sigma_draws) = sample_niw(&niw, spec.draws, spec.seed, &dispersion)?;
        Ok(VarPosterior {
            coef_draws,
            sigma_draws,
            posterior_mean: niw.mean,
            variables: design.variables.clone(),
            lags: design.lags,
            has_shock: design.has_shock,
            n_rows: design.y.nrows(),
        })
    };
    match spec.prior {
        Prior::Flat => wrap(niw_posterior(&design.x, &design.y)?),
        Prior::NormalWishart(h) => {
            let sds = ar_residual_sds(design)?;
            let (yd, xd) = nw_dummies(design, &h, &sds);
            let mut x = Matrix::zeros(xd.nrows() + design.x.nrows(), design.x.ncols());
            let mut y = Matrix::zeros(yd.nrows() + design.y.nrows(), design.y.ncols());
            x.rows_mut(0, xd.nrows()).copy_from(&xd);
            x.rows_mut(xd.nrows(), design.x.nrows()).copy_from(&design.x);
            y.rows_mut(0, yd.nrows()).copy_from(&yd);
            y.rows_mut(yd.nrows(), design.y.nrows()).copy_from(&design.y);
            wrap(niw_posterior(&x, &y)?)
        }
        Prior::Minnesota(h) => minnesota_posterior(design, spec, &h),
    }
}

/// Horizon-indexed responses with 68% and 90% bands, stored `[variable][h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IrfResult {
    pub variables: Vec<String>,
    pub point: Vec<Vec<f64>>,
    pub lo68: Vec<Vec<f64>>,
    pub hi68: Vec<Vec<f64>>,
    pub lo90: Vec<Vec<f64>>,
    pub hi90: Vec<Vec<f64>>,
    pub note: String,
    /// Share of posterior draws with an explosive companion matrix.
    pub explosive_share: Option<f64>,
}

impl IrfResult {
    pub fn horizons(&self) -> usize {
        self.point.first().map_or(0, |v| v.len())
    }

    /// Posterior median and percentile bands from per-draw paths
    /// `draws[d][variable][h]`.
    pub fn from_draws(variables: Vec<String>, draws: &[Vec<Vec<f64>>], note: &str) -> Self {
        let m = variables.len();
        let h = draws.first().map_or(0, |d| d.first().map_or(0, |v| v.len()));
        let mut out = IrfResult {
            variables,
            point: alloc::vec![alloc::vec![0.0; h]; m],
            lo68: alloc::vec![alloc::vec![0.0; h]; m],
            hi68: alloc::vec![alloc::vec![0.0; h]; m],
            lo90: alloc::vec![alloc::vec![0.0; h]; m],
            hi90: alloc::vec![alloc::vec![0.0; h]; m],
            note: note.to_string(),
            explosive_share: None,
        };
        let mut buf = Vec::with_capacity(draws.len());
        for v in 0..m {
            for t in 0..h {
                buf.clear();
                buf.extend(draws.iter().map(|d| d[v][t]));
                buf.sort_by(f64::total_cmp);
                out.point[v][t] = stats::quantile_sorted(&buf, 0.5);
                out.lo68[v][t] = stats::quantile_sorted(&buf, 0.16);
                out.hi68[v][t] = stats::quantile_sorted(&buf, 0.84);
                out.lo90[v][t] = stats::quantile_sorted(&buf, 0.05);
                out.hi90[v][t] = stats::quantile_sorted(&buf, 0.95);
            }
        }
        out
    }

    /// True when `lo90 <= lo68 <= point <= hi68 <= hi90` everywhere.
    pub fn bands_ordered(&self) -> bool {
        (0..self.variables.len()).all(|v| {
            (0..self.horizons()).all(|t| {
                self.lo90[v][t] <= self.lo68[v][t]
                    && self.lo68[v][t] <= self.point[v][t]
                    && self.point[v][t] <= self.hi68[v][t]
                    && self.hi68[v][t] <= self.hi90[v][t]
            })
        })
    }
}

/// Lag matrices `A_l` (`m x m`, row = equation) from a `K x m` coefficient block.
pub fn lag_matrices(coef: &Matrix, m: usize, lags: usize) -> Vec<Matrix> {
    (0..lags)
        .map(|l| coef.rows(l * m, m).transpose())
        .collect()
}

/// Response path `[variable][h]` to an exogenous impulse `impact`.
pub fn propagate(lag_mats: &[Matrix], impact: &Vector, horizon: usize) -> Vec<Vec<f64>> {
    let m = impact.len();
    let mut path: Vec<Vector> = Vec::with_capacity(horizon + 1);
    path.push(impact.clone());
    for h in 1..=horizon {
        let mut next = Vector::zeros(m);
        for (l, a) in lag_mats.iter().enumerate() {
            if h > l {
                next += a * &path[h - l - 1];
            }
        }
        path.push(next);
    }
    (0..m).map(|v| path.iter().map(|p| p[v]).collect()).collect()
}

/// Companion matrix of the lag polynomial.
pub fn companion(lag_mats: &[Matrix]) -> Matrix {
    let m = lag_mats.first().map_or(0, |a| a.nrows());
    let p = lag_mats.len();
    let mut c = Matrix::zeros(m * p, m * p);
    for (l, a) in lag_mats.iter().enumerate() {
        c.view_mut((0, l * m), (m, m)).copy_from(a);
    }
    for i in m..m * p {
        c[(i, i - m)] = 1.0;
    }
    c
}

/// Responses to a `shock_size` move in the exogenous shock, per posterior draw.
pub fn irf_exogenous(post: &VarPosterior, horizon: usize, shock_size: f64) -> Result<IrfResult> {
    if horizon < 1 {
        bail!(Domain, "horizon must be at least 1");
    }
    let Some(row) = post.shock_row() else {
        bail!(Domain, "posterior has no exogenous shock column");
    };
    let m = post.n_vars();
    let mut paths = Vec::with_capacity(post.coef_draws.len());
    let mut explosive = 0usize;
    for b in &post.coef_draws {
        let mats = lag_matrices(b, m, post.lags);
        if linalg::spectral_radius(&companion(&mats)) > 1.0 {
            explosive += 1;
        }
        let impact = b.row(row).transpose() * shock_size;
        paths.push(propagate(&mats, &impact, horizon));
    }
    let mut out = IrfResult::from_draws(post.variables.clone(), &paths, "posterior median; 68% and 90% equal-tailed credible bands");
    out.explosive_share = Some(explosive as f64 / post.coef_draws.len().max(1) as f64);
    Ok(out)
}

/// Demeans each country's series with its full-sample mean and averages
/// across countries, returning the `T x m` averaged block.
pub fn group_mean_data(panel: &PanelDataset) -> Result<Matrix> {
    panel.require_balanced()?;
    let (nc, nt, nv) = (panel.n_countries(), panel.n_periods(), panel.n_vars());
    let mut avg = Matrix::zeros(nt, nv);
    let mut scale = vec_zeros(nv);
    for c in 0..nc {
        for v in 0..nv {
            let s = panel.series(c, v);
            let mu = stats::mean(&s);
            for t in 0..nt {
                let d = s[t] - mu;
                avg[(t, v)] += d / nc as f64;
                scale[v] = f64::max(scale[v], d.abs());
            }
        }
    }
    let flat: Vec<&str> = (0..nv)
        .filter(|&v| avg.column(v).iter().all(|x| x.abs() <= 1e-12 * scale[v].max(f64::MIN_POSITIVE)))
        .map(|v| panel.variables()[v].as_str())
        .collect();
    if !flat.is_empty() {
        bail!(Degenerate, "averaged deviations vanish for {:?}; the group-mean system would be pure noise", flat);
    }
    Ok(avg)
}

fn vec_zeros(n: usize) -> Vec<f64> {
    alloc::vec![0.0; n]
}

/// Group-mean VAR: estimate on the cross-country average of demeaned data.
pub fn group_mean_var(panel: &PanelDataset, spec: &VarSpec) -> Result<VarPosterior> {
    let avg = group_mean_data(panel)?;
    let design = design_from_units(&[avg], panel.variables().to_vec(), spec.lags, Some(panel.shock()))?;
    estimate_bvar(&design, spec)
}

/// First recursive structural shock series.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyShock {
    /// Index of the first period with a shock value (the lag order).
    pub first_period: usize,
    /// Posterior median of the first structural shock per period.
    pub shock: Vec<f64>,
    pub rejected_draws: usize,
}

/// Recursive identification of the shock to the first variable in
/// `ordering`: per draw, `e_1 = E_1 / sqrt(Sigma_11)`, then the median
/// across draws.
pub fn cholesky_structural_shock(
    data: &Matrix,
    variables: &[String],
    ordering: &[String],
    spec: &VarSpec,
) -> Result<CholeskyShock> {
    if ordering.is_empty() || ordering.len() != variables.len() {
        bail!(Domain, "ordering must list every variable exactly once");
    }
    let mut cols = Vec::with_capacity(ordering.len());
    for name in ordering {
        match variables.iter().position(|v| v == name) {
            Some(i) if !cols.contains(&i) => cols.push(i),
            _ => bail!(Domain, "ordering entry {name:?} is unknown or repeated"),
        }
    }
    let reordered = linalg::select_columns(data, &cols);
    let design = design_from_units(&[reordered], ordering.to_vec(), spec.lags, None)?;
    if design.y.nrows() <= design.n_regressors() {
        bail!(InsufficientData, "{} usable periods for {} regressors", design.y.nrows(), design.n_regressors());
    }
    let post = estimate_bvar(&design, spec)?;
    let n = design.y.nrows();
    let mut per_draw: Vec<Vec<f64>> = Vec::with_capacity(post.coef_draws.len());
    let mut rejected = 0;
    for (b, s) in post.coef_draws.iter().zip(&post.sigma_draws) {
        if linalg::cholesky_lower(s).is_none() {
            rejected += 1;
            continue;
        }
        let resid = &design.y.column(0) - &design.x * b.column(0);
        let sd = libm::sqrt(s[(0, 0)]);
        per_draw.push(resid.iter().map(|e| e / sd).collect());
    }
    if per_draw.is_empty() {
        bail!(SolverFailure, "every covariance draw was singular");
    }
    let mut buf = Vec::with_capacity(per_draw.len());
    let shock = (0..n)
        .map(|t| {
            buf.clear();
            buf.extend(per_draw.iter().map(|d| d[t]));
            stats::median(&buf)
        })
        .collect();
    Ok(CholeskyShock { first_period: spec.lags, shock, rejected_draws: rejected })
}
