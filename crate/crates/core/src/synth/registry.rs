//! Loan registries with known interaction coefficients.
//!
//! Log loans accumulate monthly increments
//!
//! `dln L_{u,t} = a_u + c_cur + k a_t + m_t + g_{.,t} + (beta + delta' X_{u,t-1}) s_t + e_{u,t}`
//!
//! so a shock moves the level permanently and `ln L_{t+h} - ln L_{t-1}`
//! loads on `s_t` with the same `beta` and `delta` at every horizon. `g`
//! holds bank-month effects (and firm-month effects at firm grain), `a_t` is
//! an observed macro series stored as the `activity` control and `m_t` an
//! unobserved common month effect.
//!
//! Characteristics come from a Gaussian copula: a latent AR(1) with unit
//! stationary variance is mapped through a quantile function that is
//! piecewise linear between the 10th, 50th and 90th percentiles in log or
//! logit space and extrapolated linearly beyond them.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::calendar::{Calendar, Frequency, Period};
use crate::micro::{Currency, MicroFrame};
use crate::rng::{self, StreamRng};
use crate::shocks::PeriodShockSeries;
use crate::{bail, Result};

/// Standard-normal 90th percentile.
const Z10: f64 = 1.281_551_565_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grain {
    /// Units are bank x currency.
    Bank,
    /// Units are firm x bank x currency.
    Firm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    /// Positive quantities.
    Log,
    /// Shares in (0, 1).
    Logit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharSpec {
    pub name: String,
    /// 10th, 50th and 90th percentiles.
    pub quantiles: [f64; 3],
    pub space: Space,
}

impl CharSpec {
    pub fn new(name: &str, quantiles: [f64; 3], space: Space) -> Self {
        CharSpec { name: name.into(), quantiles, space }
    }

    /// Liabilities to net worth of banks.
    pub fn bank_leverage() -> Self {
        CharSpec::new("leverage", [3.435, 10.594, 12.674], Space::Log)
    }

    /// Share of dollar credit of banks.
    pub fn bank_dollar_share() -> Self {
        CharSpec::new("dollar_share", [0.024, 0.774, 0.886], Space::Logit)
    }

    /// Debt-to-collateral ratio of firms.
    pub fn firm_leverage() -> Self {
        CharSpec::new("leverage", [0.23, 1.41, 4.75], Space::Log)
    }

    /// Share of foreign-currency debt of firms.
    pub fn firm_fc_share() -> Self {
        CharSpec::new("fc_share", [0.09, 0.47, 0.90], Space::Logit)
    }

    fn forward(&self, x: f64) -> f64 {
        match self.space {
            Space::Log => libm::log(x),
            Space::Logit => libm::log(x / (1.0 - x)),
        }
    }

    fn inverse(&self, v: f64) -> f64 {
        match self.space {
            Space::Log => libm::exp(v),
            Space::Logit => 1.0 / (1.0 + libm::exp(-v)),
        }
    }

    fn validate(&self) -> Result<()> {
        let [a, b, c] = self.quantiles;
        if !(a < b && b < c) {
            bail!(Domain, "characteristic {:?}: quantiles must increase", self.name);
        }
        let ok = match self.space {
            Space::Log => a > 0.0,
            Space::Logit => a > 0.0 && c < 1.0,
        };
        if !ok {
            bail!(Domain, "characteristic {:?}: quantiles outside the support of its space", self.name);
        }
        Ok(())
    }

    /// Value at latent standard-normal `z`.
    pub fn quantile_at(&self, z: f64) -> f64 {
        let [lo, mid, hi] = self.quantiles.map(|q| self.forward(q));
        let v = if z < 0.0 { mid + (mid - lo) * z / Z10 } else { mid + (hi - mid) * z / Z10 };
        self.inverse(v)
    }
}

/// Common factor in characteristics that also moves loan growth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Confounder {
    /// Loading of the latent characteristics on the factor.
    pub loading: f64,
    /// Coefficient on `s_t * phi_{t-1}` in loan growth.
    pub gamma: f64,
    pub persistence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistryDgpSpec {
    pub seed: u64,
    pub grain: Grain,
    pub n_banks: usize,
    /// Ignored at bank grain.
    pub n_firms: usize,
    pub banks_per_firm: usize,
    /// Monthly calendar of observed rows.
    pub calendar: Calendar,
    pub characteristics: Vec<CharSpec>,
    /// Latent correlation between every pair of characteristics, in [0, 1).
    pub char_corr: f64,
    pub char_persistence: f64,
    /// Latent variance share of the firm component at firm grain.
    pub firm_share: f64,
    pub beta: f64,
    /// One slope per characteristic.
    pub delta: Vec<f64>,
    /// Response to negative shocks; `None` means symmetric.
    pub beta_neg: Option<f64>,
    pub delta_neg: Option<Vec<f64>>,
    pub unit_fe_sd: f64,
    pub time_fe_sd: f64,
    /// Loading `k` of loan growth on the observed `activity` series.
    pub activity_loading: f64,
    pub common_month_sd: f64,
    pub dollar_effect: f64,
    pub noise_sd: f64,
    /// Probability that a firm-bank relationship also borrows in dollars.
    pub dollar_prob: f64,
    pub missing_rate: f64,
    /// SD of log bank size; sizes become regression weights.
    pub size_sd: f64,
    pub confounder: Option<Confounder>,
}

impl RegistryDgpSpec {
    /// Bank-currency registry with `0.1 s - 0.02 s x leverage`.
    pub fn bank_level(seed: u64, calendar: Calendar) -> Self {
        RegistryDgpSpec {
            seed,
            grain: Grain::Bank,
            n_banks: 100,
            n_firms: 0,
            banks_per_firm: 0,
            calendar,
            characteristics: alloc::vec![CharSpec::bank_leverage()],
            char_corr: 0.0,
            char_persistence: 0.9,
            firm_share: 0.0,
            beta: 0.1,
            delta: alloc::vec![-0.02],
            beta_neg: None,
            delta_neg: None,
            unit_fe_sd: 0.01,
            time_fe_sd: 0.02,
            activity_loading: 0.02,
            common_month_sd: 0.002,
            dollar_effect: 0.005,
            noise_sd: 0.03,
            dollar_prob: 1.0,
            missing_rate: 0.02,
            size_sd: 0.4,
            confounder: None,
        }
    }

    /// Firm-bank-currency registry interacting the shock with relationship
    /// leverage and the foreign-currency share.
    pub fn firm_level(seed: u64, calendar: Calendar) -> Self {
        RegistryDgpSpec {
            grain: Grain::Firm,
            n_banks: 12,
            n_firms: 150,
            banks_per_firm: 3,
            characteristics: alloc::vec![CharSpec::firm_leverage(), CharSpec::firm_fc_share()],
            char_corr: 0.3,
            firm_share: 0.5,
            beta: 0.05,
            delta: alloc::vec![-0.02, 0.04],
            dollar_prob: 0.5,
            size_sd: 0.0,
            ..RegistryDgpSpec::bank_level(seed, calendar)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.calendar.freq() != Frequency::Monthly {
            bail!(Domain, "registry calendars are monthly");
        }
        if self.n_banks < 2 {
            bail!(Domain, "at least two banks are needed");
        }
        if self.grain == Grain::Firm && (self.n_firms == 0 || self.banks_per_firm == 0 || self.banks_per_firm > self.n_banks) {
            bail!(Domain, "firm grain needs firms and 1..=n_banks banks per firm");
        }
        if self.characteristics.is_empty() {
            bail!(Domain, "at least one characteristic is needed");
        }
        for c in &self.characteristics {
            c.validate()?;
        }
        let k = self.characteristics.len();
        if self.delta.len() != k || self.delta_neg.as_ref().is_some_and(|d| d.len() != k) {
            bail!(Dimension, "one slope per characteristic is required");
        }
        if !(0.0..1.0).contains(&self.char_corr) {
            bail!(Domain, "characteristic correlation must lie in [0, 1), got {}", self.char_corr);
        }
        if !(self.char_persistence.abs() < 1.0) || !(0.0..=1.0).contains(&self.firm_share) {
            bail!(Domain, "persistence must lie in (-1, 1) and the firm share in [0, 1]");
        }
        let sds = [self.unit_fe_sd, self.time_fe_sd, self.common_month_sd, self.noise_sd, self.size_sd];
        if !self.activity_loading.is_finite() {
            bail!(Domain, "activity loading must be finite");
        }
        if sds.iter().any(|s| !(*s >= 0.0)) || !(self.noise_sd > 0.0) {
            bail!(Domain, "standard deviations must be nonnegative and the noise SD positive");
        }
        if !(0.0..=1.0).contains(&self.dollar_prob) || !(0.0..0.5).contains(&self.missing_rate) {
            bail!(Domain, "dollar probability must lie in [0, 1] and the missing rate in [0, 0.5)");
        }
        if let Some(c) = self.confounder {
            if !(c.persistence.abs() < 1.0) {
                bail!(Domain, "confounder persistence must lie in (-1, 1)");
            }
        }
        Ok(())
    }
}

/// True coefficients, constant across horizons.
#[derive(Debug, Clone, PartialEq)]
pub struct RegistryTruth {
    pub beta_pos: f64,
    pub beta_neg: f64,
    pub delta_pos: Vec<(String, f64)>,
    pub delta_neg: Vec<(String, f64)>,
    /// Confounding factor by month, `NaN` without a confounder.
    pub phi: Vec<f64>,
}

impl RegistryTruth {
    /// Value of a regression term as named by
    /// [`crate::micro::InteractionSpec::term_names`]; `None` for terms whose
    /// value depends on the shock sign when the DGP is asymmetric.
    pub fn term(&self, name: &str) -> Option<f64> {
        let (part, ch) = match name.split_once(':') {
            Some((p, c)) => (p, Some(c)),
            None => (name, None),
        };
        let pick = |beta: f64, deltas: &[(String, f64)]| match ch {
            None => Some(beta),
            Some(c) => Some(deltas.iter().find(|(n, _)| n == c).map_or(0.0, |(_, d)| *d)),
        };
        let pos = pick(self.beta_pos, &self.delta_pos);
        let neg = pick(self.beta_neg, &self.delta_neg);
        match part {
            "shock_pos" => pos,
            "shock_neg" => neg,
            "shock" if pos == neg => pos,
            _ => None,
        }
    }
}

struct Unit {
    firm: Option<u64>,
    bank: usize,
    currency: Currency,
}

fn units(spec: &RegistryDgpSpec, rng: &mut StreamRng) -> Vec<Unit> {
    let mut out = Vec::new();
    match spec.grain {
        Grain::Bank => {
            for b in 0..spec.n_banks {
                out.push(Unit { firm: None, bank: b, currency: Currency::Local });
                if rng::uniform(rng) < spec.dollar_prob {
                    out.push(Unit { firm: None, bank: b, currency: Currency::Dollar });
                }
            }
        }
        Grain::Firm => {
            for f in 0..spec.n_firms {
                let mut banks: Vec<usize> = Vec::new();
                while banks.len() < spec.banks_per_firm {
                    let b = (rng::uniform(rng) * spec.n_banks as f64) as usize % spec.n_banks;
                    if !banks.contains(&b) {
                        banks.push(b);
                    }
                }
                banks.sort();
                for b in banks {
                    out.push(Unit { firm: Some(f as u64), bank: b, currency: Currency::Local });
                    if rng::uniform(rng) < spec.dollar_prob {
                        out.push(Unit { firm: Some(f as u64), bank: b, currency: Currency::Dollar });
                    }
                }
            }
        }
    }
    out
}

/// Draws `k` equicorrelated standard normals.
fn correlated(rng: &mut StreamRng, k: usize, rho: f64) -> Vec<f64> {
    let common = rng::normal(rng);
    (0..k).map(|_| libm::sqrt(rho) * common + libm::sqrt(1.0 - rho) * rng::normal(rng)).collect()
}

/// Simulates a registry, its monthly shock and the true coefficients.
pub fn gen_micro_registry(spec: &RegistryDgpSpec) -> Result<(MicroFrame, PeriodShockSeries, RegistryTruth)> {
    spec.validate()?;
    let t_len = spec.calendar.len;
    let k = spec.characteristics.len();

    let mut shock_rng = rng::substream(spec.seed, 0);
    let shock: Vec<f64> = (0..t_len).map(|_| rng::normal(&mut shock_rng)).collect();

    let mut macro_rng = rng::substream(spec.seed, 1);
    let activity: Vec<f64> = (0..t_len).map(|_| rng::normal(&mut macro_rng)).collect();
    let common: Vec<f64> = (0..t_len).map(|t| spec.activity_loading * activity[t] + spec.common_month_sd * rng::normal(&mut macro_rng)).collect();
    // phi[t + 1] is the factor at month t; phi[0] is the month before the calendar
    let phi: Vec<f64> = match spec.confounder {
        None => alloc::vec![0.0; t_len + 1],
        Some(c) => {
            let mut p = Vec::with_capacity(t_len + 1);
            let mut x = rng::normal(&mut macro_rng);
            for _ in 0..=t_len {
                p.push(x);
                x = c.persistence * x + libm::sqrt(1.0 - c.persistence * c.persistence) * rng::normal(&mut macro_rng);
            }
            p
        }
    };

    let mut layout_rng = rng::substream(spec.seed, 2);
    let units = units(spec, &mut layout_rng);
    let size: Vec<f64> = (0..spec.n_banks).map(|_| libm::exp(spec.size_sd * rng::normal(&mut layout_rng))).collect();
    let bank_fe: Vec<f64> = (0..spec.n_banks).map(|_| spec.unit_fe_sd * rng::normal(&mut layout_rng)).collect();
    let bank_month: Vec<f64> = (0..spec.n_banks * t_len).map(|_| spec.time_fe_sd * rng::normal(&mut layout_rng)).collect();
    let n_firms = if spec.grain == Grain::Firm { spec.n_firms } else { 0 };
    let mut firm_rng = rng::substream(spec.seed, 3);
    let firm_fe: Vec<f64> = (0..n_firms).map(|_| spec.unit_fe_sd * rng::normal(&mut firm_rng)).collect();
    let firm_month: Vec<f64> = (0..n_firms * t_len).map(|_| spec.time_fe_sd * rng::normal(&mut firm_rng)).collect();

    // latent characteristic paths: firm component (firm grain) and unit component
    let rho = spec.char_persistence;
    let innov = libm::sqrt(1.0 - rho * rho);
    let latent_path = |r: &mut StreamRng| -> Vec<Vec<f64>> {
        let mut z = correlated(r, k, spec.char_corr);
        let mut path = Vec::with_capacity(t_len + 1);
        for _ in 0..=t_len {
            path.push(z.clone());
            let e = correlated(r, k, spec.char_corr);
            for (zi, ei) in z.iter_mut().zip(e) {
                *zi = rho * *zi + innov * ei;
            }
        }
        path
    };
    let firm_latent: Vec<Vec<Vec<f64>>> = (0..n_firms).map(|f| latent_path(&mut rng::substream(spec.seed, 1_000_000 + f as u64))).collect();
    let loading = spec.confounder.map_or(0.0, |c| c.loading);

    let mut firm_col = Vec::new();
    let (mut bank_col, mut cur_col, mut month_col, mut loan_col, mut weight_col) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut chars: Vec<Vec<f64>> = alloc::vec![Vec::new(); k];
    let delta_neg = spec.delta_neg.as_ref().unwrap_or(&spec.delta);
    let beta_neg = spec.beta_neg.unwrap_or(spec.beta);

    for (u, unit) in units.iter().enumerate() {
        let mut r = rng::substream(spec.seed, 10_000 + u as u64);
        let own = latent_path(&mut r);
        // x[t] holds the characteristic at month t - 1
        let x: Vec<Vec<f64>> = (0..=t_len)
            .map(|t| {
                (0..k)
                    .map(|j| {
                        let mut z = own[t][j];
                        if let Some(f) = unit.firm {
                            let w = spec.firm_share;
                            z = libm::sqrt(w) * firm_latent[f as usize][t][j] + libm::sqrt(1.0 - w) * z;
                        }
                        spec.characteristics[j].quantile_at(z + loading * phi[t])
                    })
                    .collect()
            })
            .collect();
        let mut log_loan = 5.0 + rng::normal(&mut r);
        let dollar = if unit.currency == Currency::Dollar { spec.dollar_effect } else { 0.0 };
        let drift = bank_fe[unit.bank] + unit.firm.map_or(0.0, |f| firm_fe[f as usize]) + dollar;
        let mut rows = Vec::with_capacity(t_len + 1);
        rows.push((spec.calendar.start.offset(-1), log_loan));
        for t in 0..t_len {
            let s = shock[t];
            let (b, d) = if s >= 0.0 { (spec.beta, &spec.delta) } else { (beta_neg, delta_neg) };
            let mut g = drift + common[t] + bank_month[unit.bank * t_len + t];
            if let Some(f) = unit.firm {
                g += firm_month[f as usize * t_len + t];
            }
            let slope = b + d.iter().zip(&x[t]).map(|(d, x)| d * x).sum::<f64>();
            let conf = spec.confounder.map_or(0.0, |c| c.gamma * s * phi[t]);
            log_loan += g + slope * s + conf + spec.noise_sd * rng::normal(&mut r);
            rows.push((spec.calendar.period(t), log_loan));
        }
        // the pre-sample row only anchors the first outcome
        for (i, (month, ll)) in rows.into_iter().enumerate() {
            if i > 0 && rng::uniform(&mut r) < spec.missing_rate {
                continue;
            }
            firm_col.push(unit.firm.unwrap_or(0));
            bank_col.push(unit.bank as u64);
            cur_col.push(unit.currency);
            month_col.push(month);
            loan_col.push(libm::exp(ll));
            weight_col.push(size[unit.bank]);
            for j in 0..k {
                chars[j].push(if i == 0 { f64::NAN } else { x[i - 1][j] });
            }
        }
    }
    let firm = (spec.grain == Grain::Firm).then_some(firm_col);
    let mut frame = MicroFrame::new(firm, bank_col, cur_col, month_col, loan_col)?;
    for (c, v) in spec.characteristics.iter().zip(chars) {
        frame.add_characteristic(&c.name, v)?;
    }
    frame.set_weights(weight_col)?;
    frame.add_macro_control("activity", (0..t_len).map(|t| (spec.calendar.period(t), activity[t])).collect())?;
    if spec.confounder.is_some() {
        let series: BTreeMap<Period, f64> = (0..t_len).map(|t| (spec.calendar.period(t), phi[t])).collect();
        frame.add_macro_control("phi_lag", series)?;
    }
    let names = spec.characteristics.iter().map(|c| c.name.clone());
    let truth = RegistryTruth {
        beta_pos: spec.beta,
        beta_neg,
        delta_pos: names.clone().zip(spec.delta.iter().copied()).collect(),
        delta_neg: names.zip(delta_neg.iter().copied()).collect(),
        phi: if spec.confounder.is_some() { phi[1..].to_vec() } else { alloc::vec![f64::NAN; t_len] },
    };
    Ok((frame, PeriodShockSeries::from_values(spec.calendar, shock)?, truth))
}
