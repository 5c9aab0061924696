//! Two-period global-bank / emerging-market-firm model.
//!
//! Firms produce `y = eps * A * k^alpha` with `eps ~ U[0, 1]`, borrow
//! `d = k` at price `q` and carry a legacy burden `D0`. They repay when
//! `eps * A * k^alpha >= d / q + D0`, which pins the default threshold.
//! A risk-neutral bank funds a US borrower and a finite grid of firms under
//! the leverage constraint
//!
//! ```text
//! R^d d0 <= theta_US q_US b_US + sum_i w_i theta_i q_i b_i + lambda n0
//! ```
//!
//! and prices every loan at `1/q_i = R^d + mu (1 - theta_i)`.

use alloc::format;
use alloc::vec::Vec;

use crate::{bail, Error, Result};

/// One firm on the discretized continuum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Firm {
    pub productivity: f64,
    pub theta: f64,
    pub legacy_debt: f64,
    /// Quadrature weight; uniform grids use `1 / n`.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub alpha: f64,
    pub firms: Vec<Firm>,
    pub theta_us: f64,
    /// Productivity of the representative US borrower (zero legacy debt).
    pub us_productivity: f64,
    pub deposit_rate: f64,
    pub lambda: f64,
    pub net_worth: f64,
    pub equity_cost_phi: f64,
    /// Equity issued at t = 0; zero in the baseline.
    pub equity_issuance: f64,
}

impl ModelParams {
    /// Builds a uniform-weight firm grid from `(A, theta, D0)` triples.
    pub fn uniform_firms(triples: &[(f64, f64, f64)]) -> Vec<Firm> {
        let w = 1.0 / triples.len().max(1) as f64;
        triples
            .iter()
            .map(|&(productivity, theta, legacy_debt)| Firm { productivity, theta, legacy_debt, weight: w })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            bail!(Domain, "alpha must lie in (0, 1), got {}", self.alpha);
        }
        if self.firms.is_empty() {
            bail!(Domain, "firm grid is empty");
        }
        if !(self.theta_us > 0.0 && self.theta_us < 1.0) {
            bail!(Domain, "theta_US must lie in (0, 1), got {}", self.theta_us);
        }
        if !(self.us_productivity > 0.0) {
            bail!(Domain, "US productivity must be positive");
        }
        if !(self.deposit_rate > 1.0) {
            bail!(Domain, "gross deposit rate must exceed 1, got {}", self.deposit_rate);
        }
        if !(self.lambda > 0.0) || !(self.net_worth > 0.0) || !(self.equity_cost_phi > 0.0) {
            bail!(Domain, "lambda, n0 and phi must be positive");
        }
        if !(self.equity_issuance >= 0.0) {
            bail!(Domain, "equity issuance must be nonnegative");
        }
        for (i, f) in self.firms.iter().enumerate() {
            if !(f.productivity > 0.0) {
                bail!(Domain, "firm {i}: productivity must be positive");
            }
            if !(f.theta > 0.0 && f.theta < 1.0) {
                bail!(Domain, "firm {i}: theta must lie in (0, 1)");
            }
            if !(f.theta < self.theta_us) {
                bail!(Domain, "firm {i}: theta {} must be below theta_US {}", f.theta, self.theta_us);
            }
            if !(f.legacy_debt >= 0.0) || !f.legacy_debt.is_finite() {
                bail!(Domain, "firm {i}: legacy debt must be finite and nonnegative");
            }
            if !(f.weight > 0.0) {
                bail!(Domain, "firm {i}: quadrature weight must be positive");
            }
        }
        Ok(())
    }

    /// Quadratic equity issuance cost `phi / 2 * e0^2`.
    pub fn equity_cost(&self) -> f64 {
        0.5 * self.equity_cost_phi * self.equity_issuance * self.equity_issuance
    }
}

/// Default threshold together with the certain-default flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub value: f64,
    /// Set when the threshold reaches or exceeds one.
    pub certain_default: bool,
}

/// `eps* = (d / q + D0) / (A k^alpha)`, unclamped.
pub fn default_threshold(
    new_debt: f64,
    loan_price: f64,
    legacy_debt: f64,
    productivity: f64,
    capital: f64,
    alpha: f64,
) -> Result<Threshold> {
    if !(loan_price > 0.0) {
        bail!(Domain, "loan price must be positive, got {loan_price}");
    }
    if !(productivity > 0.0) {
        bail!(Domain, "productivity must be positive, got {productivity}");
    }
    if !(capital >= 0.0) || !(new_debt >= 0.0) || !(legacy_debt >= 0.0) {
        bail!(Domain, "capital and debts must be nonnegative");
    }
    let obligations = new_debt / loan_price + legacy_debt;
    if capital == 0.0 {
        if new_debt > 0.0 {
            bail!(Domain, "positive debt with zero capital gives an infinite threshold");
        }
        return Ok(if obligations == 0.0 {
            Threshold { value: 0.0, certain_default: false }
        } else {
            Threshold { value: f64::INFINITY, certain_default: true }
        });
    }
    let value = obligations / (productivity * libm::pow(capital, alpha));
    Ok(Threshold { value, certain_default: value >= 1.0 })
}

/// `q = 1 / (R^d + mu (1 - theta))`.
pub fn loan_price(deposit_rate: f64, multiplier: f64, theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        bail!(Domain, "pledgeability must lie in (0, 1), got {theta}");
    }
    if !(deposit_rate > 0.0) || !(multiplier >= 0.0) {
        bail!(Domain, "need R^d > 0 and mu >= 0");
    }
    Ok(1.0 / (deposit_rate + multiplier * (1.0 - theta)))
}

/// Expected equity with `d = k`:
/// `A k^a (1 - eps*^2) / 2 - (k/q + D0)(1 - eps*)`, zero when `eps* >= 1`.
pub fn expected_equity(capital: f64, loan_price: f64, legacy_debt: f64, productivity: f64, alpha: f64) -> Result<f64> {
    let t = default_threshold(capital, loan_price, legacy_debt, productivity, capital, alpha)?;
    if capital == 0.0 || t.certain_default {
        return Ok(0.0);
    }
    let output = productivity * libm::pow(capital, alpha);
    let obligations = capital / loan_price + legacy_debt;
    let e = t.value;
    Ok(output * (1.0 - e * e) / 2.0 - obligations * (1.0 - e))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirmDecision {
    pub capital: f64,
    pub default_threshold: f64,
    pub expected_equity: f64,
    /// Centered finite-difference slope of expected equity at the optimum,
    /// expressed as an elasticity (`k * dPi/dk / Pi`); zero at boundaries.
    pub foc_residual: f64,
    /// Optimum at `k = 0` (shutdown) or at the upper bound.
    pub at_boundary: bool,
}

const GRID_POINTS: usize = 200;
const GRID_DECADES: f64 = 8.0;

/// Unconstrained frictionless optimum: argmax of `A k^a / 2 - k / q`.
pub fn frictionless_capital(loan_price: f64, productivity: f64, alpha: f64) -> f64 {
    libm::pow(alpha * productivity * loan_price / 2.0, 1.0 / (1.0 - alpha))
}

/// Optimal capital with the default upper bound of 100x the frictionless
/// optimum.
pub fn optimal_capital(loan_price: f64, legacy_debt: f64, productivity: f64, alpha: f64) -> Result<FirmDecision> {
    if !(loan_price > 0.0) || !(productivity > 0.0) {
        bail!(Domain, "loan price and productivity must be positive");
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        bail!(Domain, "alpha must lie in (0, 1)");
    }
    let k_max = 100.0 * frictionless_capital(loan_price, productivity, alpha);
    optimal_capital_bounded(loan_price, legacy_debt, productivity, alpha, k_max)
}

/// Maximizes expected equity over `[0, k_max]`: log-spaced grid search, then
/// golden-section refinement around the best grid point, then a bisection
/// polish on the sign of the analytic marginal value.
pub fn optimal_capital_bounded(
    loan_price: f64,
    legacy_debt: f64,
    productivity: f64,
    alpha: f64,
    k_max: f64,
) -> Result<FirmDecision> {
    let (q, d0, a) = (loan_price, legacy_debt, productivity);
    if !(q > 0.0) || !(a > 0.0) || !(d0 >= 0.0) || !(k_max > 0.0) {
        bail!(Domain, "invalid firm problem (q={q}, D0={d0}, A={a}, k_max={k_max})");
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        bail!(Domain, "alpha must lie in (0, 1)");
    }
    let pi = |k: f64| expected_equity(k, q, d0, a, alpha).unwrap_or(0.0);

    // Beyond k_zero repayment fails even at eps = 1, so equity is zero there.
    let k_zero = libm::pow(a * q, 1.0 / (1.0 - alpha));
    let k_hi = k_max.min(k_zero);

    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|j| k_hi * libm::pow(10.0, -GRID_DECADES * (1.0 - j as f64 / (GRID_POINTS - 1) as f64)))
        .collect();
    let values: Vec<f64> = grid.iter().map(|&k| pi(k)).collect();
    let (best, best_val) = values
        .iter()
        .enumerate()
        .fold((0usize, f64::NEG_INFINITY), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc });

    if !(best_val > 0.0) {
        return Ok(shutdown_decision(d0));
    }

    let lo = if best == 0 { 0.0 } else { grid[best - 1] };
    let hi = if best + 1 == GRID_POINTS { k_hi } else { grid[best + 1] };
    let mut k = golden_section_max(&pi, lo, hi, 1e-13);

    // Wherever equity is positive the marginal value has the sign of
    // h(k) = alpha q (A k^a + D0) - (2 - alpha) k, whose unique positive root
    // is the optimum. Golden section is only accurate to sqrt(eps) on the flat
    // top, so the root replaces it whenever h brackets a sign change.
    let foc = |k: f64| alpha * q * (a * libm::pow(k, alpha) + d0) - (2.0 - alpha) * k;
    let l0 = if lo > 0.0 { lo } else { hi * 1e-12 };
    if foc(l0) > 0.0 && foc(hi) < 0.0 {
        let (mut l, mut h) = (l0, hi);
        for _ in 0..200 {
            let m = 0.5 * (l + h);
            if m <= l || m >= h {
                break;
            }
            if foc(m) > 0.0 {
                l = m;
            } else {
                h = m;
            }
        }
        let root = 0.5 * (l + h);
        if pi(root) > 0.0 {
            k = root;
        }
    }

    let value = pi(k);
    if !(value > 0.0) {
        return Ok(shutdown_decision(d0));
    }
    let at_boundary = k >= k_max * (1.0 - 1e-9);
    let foc_residual = if at_boundary {
        0.0
    } else {
        let h = 1e-5 * k;
        (pi(k + h) - pi(k - h)) / (2.0 * h) * k / value
    };
    let threshold = default_threshold(k, q, d0, a, k, alpha)?.value;
    Ok(FirmDecision { capital: k, default_threshold: threshold, expected_equity: value, foc_residual, at_boundary })
}

fn shutdown_decision(legacy_debt: f64) -> FirmDecision {
    FirmDecision {
        capital: 0.0,
        default_threshold: if legacy_debt > 0.0 { f64::INFINITY } else { 0.0 },
        expected_equity: 0.0,
        foc_residual: 0.0,
        at_boundary: true,
    }
}

/// Golden-section search for the maximum of a unimodal function on `[a, b]`.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, rel_tol: f64) -> f64 {
    let inv_phi = (libm::sqrt(5.0) - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..300 {
        if (b - a).abs() <= rel_tol * (a.abs() + b.abs()).max(f64::MIN_POSITIVE) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        c
    } else {
        d
    }
}

/// Solved bank allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub multiplier: f64,
    pub loan_prices: Vec<f64>,
    pub us_price: f64,
    pub capital: Vec<f64>,
    /// `b(i) = d_i = k_i`.
    pub loans: Vec<f64>,
    pub us_loans: f64,
    pub deposits: f64,
    pub equity_issuance: f64,
    /// Net worth not deployed in lending (paid out when the bank is unconstrained
    /// and needs no deposits).
    pub payout: f64,
    pub constraint_binding: bool,
    /// Right-hand side minus left-hand side of the leverage constraint.
    pub constraint_slack: f64,
    pub decisions: Vec<FirmDecision>,
}

impl Equilibrium {
    pub fn spreads(&self, deposit_rate: f64) -> Vec<f64> {
        self.loan_prices.iter().map(|q| 1.0 / q - deposit_rate).collect()
    }

    /// `q_US b_US + sum w_i q_i b_i + payout - (n0 + d0 + e0 - Phi(e0))`.
    pub fn balance_sheet_residual(&self, params: &ModelParams) -> f64 {
        let assets = self.us_price * self.us_loans
            + params
                .firms
                .iter()
                .zip(self.loan_prices.iter().zip(&self.loans))
                .map(|(f, (q, b))| f.weight * q * b)
                .sum::<f64>();
        assets + self.payout - (params.net_worth + self.deposits + self.equity_issuance - params.equity_cost())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative tolerance on the leverage constraint when it binds.
    pub tolerance: f64,
    /// Upper end of the initial multiplier bracket, as a multiple of `R^d`.
    pub mu_max_factor: f64,
    /// Number of bracket doublings before giving up.
    pub max_doublings: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tolerance: 1e-10, mu_max_factor: 10.0, max_doublings: 4 }
    }
}

struct Allocation {
    eq: Equilibrium,
    scale: f64,
}

fn allocate(params: &ModelParams, mu: f64) -> Result<Allocation> {
    let rd = params.deposit_rate;
    let mut loan_prices = Vec::with_capacity(params.firms.len());
    let mut decisions = Vec::with_capacity(params.firms.len());
    let (mut assets, mut pledged) = (0.0, 0.0);
    for f in &params.firms {
        let q = loan_price(rd, mu, f.theta)?;
        let dec = optimal_capital(q, f.legacy_debt, f.productivity, params.alpha)?;
        assets += f.weight * q * dec.capital;
        pledged += f.weight * f.theta * q * dec.capital;
        loan_prices.push(q);
        decisions.push(dec);
    }
    let us_price = loan_price(rd, mu, params.theta_us)?;
    let us = optimal_capital(us_price, 0.0, params.us_productivity, params.alpha)?;
    assets += us_price * us.capital;
    pledged += params.theta_us * us_price * us.capital;

    let funds = params.net_worth + params.equity_issuance - params.equity_cost();
    let deposits = (assets - funds).max(0.0);
    let payout = (funds - assets).max(0.0);
    let slack = pledged + params.lambda * params.net_worth - rd * deposits;
    let scale = rd * deposits + pledged + params.lambda * params.net_worth;
    let capital: Vec<f64> = decisions.iter().map(|d| d.capital).collect();
    Ok(Allocation {
        eq: Equilibrium {
            multiplier: mu,
            loan_prices,
            us_price,
            loans: capital.clone(),
            capital,
            us_loans: us.capital,
            deposits,
            equity_issuance: params.equity_issuance,
            payout,
            constraint_binding: mu > 0.0,
            constraint_slack: slack,
            decisions,
        },
        scale,
    })
}

pub fn solve_bank_equilibrium(params: &ModelParams) -> Result<Equilibrium> {
    solve_bank_equilibrium_with(params, SolverOptions::default())
}

/// Finds the leverage-constraint multiplier by bisection.
///
/// Returns `mu = 0` when the constraint is slack at frictionless prices;
/// otherwise the root of the constraint slack, which rises monotonically in
/// `mu` as loan values shrink.
pub fn solve_bank_equilibrium_with(params: &ModelParams, opts: SolverOptions) -> Result<Equilibrium> {
    params.validate()?;
    let at_zero = allocate(params, 0.0)?;
    if at_zero.eq.constraint_slack >= 0.0 {
        return Ok(at_zero.eq);
    }

    let mut lo = 0.0;
    let mut slack_lo = at_zero.eq.constraint_slack;
    let mut hi = opts.mu_max_factor * params.deposit_rate;
    let mut upper = allocate(params, hi)?;
    let mut doublings = 0;
    while upper.eq.constraint_slack < 0.0 {
        if doublings == opts.max_doublings {
            return Err(Error::NoAdmissibleMultiplier {
                mu_lo: 0.0,
                mu_hi: hi,
                slack_lo: at_zero.eq.constraint_slack,
                slack_hi: upper.eq.constraint_slack,
            });
        }
        lo = hi;
        slack_lo = upper.eq.constraint_slack;
        hi *= 2.0;
        upper = allocate(params, hi)?;
        doublings += 1;
    }
    let slack_hi = upper.eq.constraint_slack;

    let operating = |e: &Equilibrium| -> Vec<bool> { e.capital.iter().map(|k| *k > 0.0).collect() };
    let mut below = at_zero;
    let mut above = upper;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let cur = allocate(params, mid)?;
        let s = cur.eq.constraint_slack;
        if s.abs() <= opts.tolerance * cur.scale {
            return Ok(cur.eq);
        }
        if s < 0.0 {
            lo = mid;
            below = cur;
        } else {
            hi = mid;
            above = cur;
        }
    }
    for side in [&above, &below] {
        if side.eq.constraint_slack.abs() <= opts.tolerance * side.scale {
            return Ok(side.eq.clone());
        }
    }
    let cause = if operating(&below.eq) != operating(&above.eq) {
        "a firm switches between shutdown and operation there"
    } else {
        "firm optima are not resolved finely enough for this tolerance"
    };
    Err(Error::SolverFailure(format!(
        "leverage constraint jumps across zero between mu = {lo} and {hi} (slack {:e} to {:e}; initial bracket slacks {slack_lo:e}, {slack_hi:e}); {cause}",
        below.eq.constraint_slack, above.eq.constraint_slack
    )))
}

/// Per-firm net-worth sensitivities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirmSensitivity {
    pub firm: usize,
    pub theta: f64,
    pub legacy_debt: f64,
    pub d_spread_d_n0: f64,
    pub d_k_d_n0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetWorthStatics {
    pub d_mu_d_n0: f64,
    pub firms: Vec<FirmSensitivity>,
}

/// Centered finite differences of the equilibrium in `n0`.
pub fn comparative_statics_n0(params: &ModelParams, delta_n0: f64) -> Result<NetWorthStatics> {
    if !(delta_n0 > 0.0) || !(delta_n0 < params.net_worth) {
        bail!(Domain, "step must lie in (0, n0), got {delta_n0}");
    }
    let center = solve_bank_equilibrium(params)?;
    if !center.constraint_binding {
        bail!(Domain, "leverage constraint is slack at n0 = {}", params.net_worth);
    }
    let mut up = params.clone();
    up.net_worth += delta_n0;
    let mut down = params.clone();
    down.net_worth -= delta_n0;
    let eq_up = solve_bank_equilibrium(&up)?;
    let eq_down = solve_bank_equilibrium(&down)?;
    if !eq_up.constraint_binding || !eq_down.constraint_binding {
        bail!(StepTooLarge, "constraint turns slack within n0 +/- {delta_n0}");
    }
    let regime = |e: &Equilibrium| -> Vec<bool> { e.capital.iter().map(|k| *k > 0.0).collect() };
    if regime(&eq_up) != regime(&center) || regime(&eq_down) != regime(&center) {
        bail!(StepTooLarge, "a firm enters or exits within n0 +/- {delta_n0}");
    }
    let rd = params.deposit_rate;
    let h2 = 2.0 * delta_n0;
    let firms = params
        .firms
        .iter()
        .enumerate()
        .map(|(i, f)| FirmSensitivity {
            firm: i,
            theta: f.theta,
            legacy_debt: f.legacy_debt,
            d_spread_d_n0: ((1.0 / eq_up.loan_prices[i] - rd) - (1.0 / eq_down.loan_prices[i] - rd)) / h2,
            d_k_d_n0: (eq_up.capital[i] - eq_down.capital[i]) / h2,
        })
        .collect();
    Ok(NetWorthStatics { d_mu_d_n0: (eq_up.multiplier - eq_down.multiplier) / h2, firms })
}

/// One row of a net-worth sweep in long format.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub firm_id: usize,
    pub theta: f64,
    pub legacy_debt: f64,
    pub net_worth: f64,
    pub multiplier: f64,
    pub loan_price: f64,
    pub spread: f64,
    pub capital: f64,
}

/// Solves the equilibrium at each net-worth level and flattens per-firm outcomes.
pub fn net_worth_sweep(params: &ModelParams, net_worths: &[f64]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(net_worths.len() * params.firms.len());
    for &n0 in net_worths {
        let mut p = params.clone();
        p.net_worth = n0;
        let eq = solve_bank_equilibrium(&p)?;
        for (i, f) in p.firms.iter().enumerate() {
            rows.push(SweepRow {
                firm_id: i,
                theta: f.theta,
                legacy_debt: f.legacy_debt,
                net_worth: n0,
                multiplier: eq.multiplier,
                loan_price: eq.loan_prices[i],
                spread: 1.0 / eq.loan_prices[i] - p.deposit_rate,
                capital: eq.capital[i],
            });
        }
    }
    Ok(rows)
}

/// Reference parameterization: a 5x5 grid of pledgeability and legacy debt
/// with a binding leverage constraint (`mu` near 1) and every firm operating.
pub fn binding_grid_params() -> ModelParams {
    let thetas = [0.2, 0.35, 0.5, 0.65, 0.8];
    let debts = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut triples = Vec::new();
    for &t in &thetas {
        for &d in &debts {
            triples.push((4.0, t, d));
        }
    }
    ModelParams {
        alpha: 0.5,
        firms: ModelParams::uniform_firms(&triples),
        theta_us: 0.9,
        us_productivity: 4.0,
        deposit_rate: 1.02,
        lambda: 0.5,
        net_worth: 0.3,
        equity_cost_phi: 1.0,
        equity_issuance: 0.0,
    }
}
