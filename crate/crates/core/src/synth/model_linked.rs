//! Firm registries whose loan responses come from the bank equilibrium.
//!
//! Firms draw pledgeability `theta_i` and legacy debt `D0_i`; each month the
//! global bank's net worth is `n0_t = mean + sd * m_t` with
//! `m_t = persistence * m_{t-1} + s_t` and `s_t` a clipped standard normal.
//! Log loans are equilibrium log capital plus a firm effect and noise, so
//! the cross-firm response ranking is the model's.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::calendar::{Calendar, Frequency};
use crate::micro::{Currency, MicroFrame};
use crate::model::{solve_bank_equilibrium, Equilibrium, ModelParams};
use crate::rng;
use crate::shocks::PeriodShockSeries;
use crate::{bail, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelLinkedSpec {
    pub seed: u64,
    /// Bank and US-borrower parameters; the firm grid is replaced by draws.
    pub base: ModelParams,
    pub n_firms: usize,
    pub productivity: f64,
    pub theta_range: (f64, f64),
    pub d0_range: (f64, f64),
    pub calendar: Calendar,
    pub n0_mean: f64,
    pub n0_sd: f64,
    /// Shocks are clipped to `[-clip, clip]`.
    pub clip: f64,
    pub persistence: f64,
    /// SD of the measurement error in the observed proxies.
    pub proxy_noise: f64,
    pub firm_fe_sd: f64,
    /// SD of iid noise in log loans.
    pub noise_sd: f64,
}

impl ModelLinkedSpec {
    /// Binding-constraint configuration in which capital of high-`D0` firms
    /// responds less to bank net worth.
    pub fn overhang_dominant(seed: u64, calendar: Calendar) -> Self {
        ModelLinkedSpec {
            seed,
            base: crate::model::binding_grid_params(),
            n_firms: 60,
            productivity: 4.0,
            theta_range: (0.2, 0.8),
            d0_range: (0.0, 1.0),
            calendar,
            n0_mean: 0.4,
            n0_sd: 0.05,
            clip: 2.5,
            persistence: 0.0,
            proxy_noise: 0.05,
            firm_fe_sd: 0.5,
            noise_sd: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.calendar.freq() != Frequency::Monthly {
            bail!(Domain, "registry calendars are monthly");
        }
        if self.n_firms < 2 {
            bail!(Domain, "at least two firms are needed");
        }
        let (t0, t1) = self.theta_range;
        let (d0, d1) = self.d0_range;
        if !(0.0 <= t0 && t0 <= t1 && t1 < 1.0) || !(0.0 <= d0 && d0 <= d1) {
            bail!(Domain, "theta range must lie in [0, 1) and legacy debt must be nonnegative");
        }
        if !(self.n0_sd >= 0.0) || !(self.clip > 0.0) || !(self.persistence.abs() < 1.0) {
            bail!(Domain, "net-worth path needs a nonnegative SD, a positive clip and |persistence| < 1");
        }
        let reach = self.n0_sd * self.clip / (1.0 - self.persistence.abs());
        if !(self.n0_mean - reach > 0.0) {
            bail!(Domain, "net-worth path can reach {} and must stay positive", self.n0_mean - reach);
        }
        if !(self.proxy_noise >= 0.0 && self.firm_fe_sd >= 0.0 && self.noise_sd >= 0.0) {
            bail!(Domain, "noise SDs must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelLinkedTruth {
    pub theta: Vec<f64>,
    pub legacy_debt: Vec<f64>,
    /// Net worth for the pre-sample month and every calendar month.
    pub n0: Vec<f64>,
    /// Equilibrium log capital, `[month][firm]`, aligned with `n0`.
    pub log_capital: Vec<Vec<f64>>,
    /// Log capital at `n0_mean`.
    pub log_capital_mean: Vec<f64>,
    pub multiplier: Vec<f64>,
}

fn regime(eq: &Equilibrium) -> (bool, Vec<bool>) {
    (eq.constraint_binding, eq.capital.iter().map(|k| *k > 0.0).collect())
}

/// Simulates the registry. Fails when the constraint turns slack or a firm
/// enters or exits anywhere along the net-worth path.
pub fn gen_model_linked_registry(spec: &ModelLinkedSpec) -> Result<(MicroFrame, PeriodShockSeries, ModelLinkedTruth)> {
    spec.validate()?;
    let t_len = spec.calendar.len;
    let n = spec.n_firms;

    let mut firm_rng = rng::substream(spec.seed, 0);
    let draw = |r: &mut rng::StreamRng, (a, b): (f64, f64)| a + (b - a) * rng::uniform(r);
    let theta: Vec<f64> = (0..n).map(|_| draw(&mut firm_rng, spec.theta_range)).collect();
    let debt: Vec<f64> = (0..n).map(|_| draw(&mut firm_rng, spec.d0_range)).collect();
    let fe: Vec<f64> = (0..n).map(|_| spec.firm_fe_sd * rng::normal(&mut firm_rng)).collect();
    let d0_proxy: Vec<f64> = debt.iter().map(|d| d + spec.proxy_noise * rng::normal(&mut firm_rng)).collect();
    let theta_proxy: Vec<f64> = theta.iter().map(|t| t + spec.proxy_noise * rng::normal(&mut firm_rng)).collect();

    let mut shock_rng = rng::substream(spec.seed, 1);
    let shock: Vec<f64> = (0..t_len).map(|_| rng::normal(&mut shock_rng).clamp(-spec.clip, spec.clip)).collect();
    let mut m = 0.0;
    let mut n0 = alloc::vec![spec.n0_mean];
    for s in &shock {
        m = spec.persistence * m + s;
        n0.push(spec.n0_mean + spec.n0_sd * m);
    }

    let triples: Vec<(f64, f64, f64)> = theta.iter().zip(&debt).map(|(t, d)| (spec.productivity, *t, *d)).collect();
    let mut params = spec.base.clone();
    params.firms = ModelParams::uniform_firms(&triples);
    let solve = |nw: f64| -> Result<Equilibrium> {
        let mut p = params.clone();
        p.net_worth = nw;
        solve_bank_equilibrium(&p)
    };
    let center = solve(spec.n0_mean)?;
    let reference = regime(&center);
    if !reference.0 {
        bail!(Domain, "leverage constraint is slack at mean net worth {}", spec.n0_mean);
    }
    if reference.1.iter().any(|op| !op) {
        bail!(Domain, "some firms shut down at mean net worth {}", spec.n0_mean);
    }
    let mut log_capital = Vec::with_capacity(t_len + 1);
    let mut multiplier = Vec::with_capacity(t_len + 1);
    for (t, &nw) in n0.iter().enumerate() {
        let eq = if nw == spec.n0_mean { center.clone() } else { solve(nw)? };
        if regime(&eq) != reference {
            let what = if eq.constraint_binding { "a firm enters or exits" } else { "the constraint turns slack" };
            let when = if t == 0 { String::from("the pre-sample month") } else { format!("{}", spec.calendar.period(t - 1)) };
            bail!(Domain, "regime flip at {when} (n0 = {nw}): {what}");
        }
        log_capital.push(eq.capital.iter().map(|k| libm::log(*k)).collect::<Vec<f64>>());
        multiplier.push(eq.multiplier);
    }

    let mut noise_rng = rng::substream(spec.seed, 2);
    let (mut firm_col, mut bank_col, mut cur_col, mut month_col, mut loan_col) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let (mut dp, mut tp) = (Vec::new(), Vec::new());
    for i in 0..n {
        for (t, lk) in log_capital.iter().enumerate() {
            let month = spec.calendar.start.offset(t as i64 - 1);
            firm_col.push(i as u64);
            bank_col.push(0);
            cur_col.push(Currency::Dollar);
            month_col.push(month);
            loan_col.push(libm::exp(lk[i] + fe[i] + spec.noise_sd * rng::normal(&mut noise_rng)));
            dp.push(d0_proxy[i]);
            tp.push(theta_proxy[i]);
        }
    }
    let mut frame = MicroFrame::new(Some(firm_col), bank_col, cur_col, month_col, loan_col)?;
    frame.add_characteristic("d0_proxy", dp)?;
    frame.add_characteristic("theta_proxy", tp)?;
    let truth = ModelLinkedTruth {
        theta,
        legacy_debt: debt,
        n0,
        log_capital,
        log_capital_mean: center.capital.iter().map(|k| libm::log(*k)).collect(),
        multiplier,
    };
    Ok((frame, PeriodShockSeries::from_values(spec.calendar, shock)?, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::Period;

    fn spec() -> ModelLinkedSpec {
        let cal = Calendar::new(Period::monthly(2015, 1), Period::monthly(2015, 12)).unwrap();
        ModelLinkedSpec { n_firms: 8, ..ModelLinkedSpec::overhang_dominant(3, cal) }
    }

    #[test]
    fn panel_shape_and_truth() {
        let (f, s, truth) = gen_model_linked_registry(&spec()).unwrap();
        assert_eq!(f.len(), 8 * 13);
        assert_eq!(s.values.len(), 12);
        assert_eq!(truth.n0.len(), 13);
        assert_eq!(truth.n0[0], 0.4);
        assert!(truth.multiplier.iter().all(|m| *m > 0.0));
    }

    #[test]
    fn zero_sd_gives_constant_capital() {
        let (_, _, truth) = gen_model_linked_registry(&ModelLinkedSpec { n0_sd: 0.0, ..spec() }).unwrap();
        for row in &truth.log_capital {
            assert_eq!(row, &truth.log_capital_mean);
        }
    }

    #[test]
    fn rejects_paths_that_reach_zero() {
        assert!(gen_model_linked_registry(&ModelLinkedSpec { n0_sd: 0.2, ..spec() }).is_err());
        assert!(gen_model_linked_registry(&ModelLinkedSpec { theta_range: (0.5, 1.0), ..spec() }).is_err());
    }
}
