//! Static panels with a common shock for local-projection oracles.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::calendar::Calendar;
use crate::panel::PanelDataset;
use crate::rng;
use crate::{bail, Result};

/// `y_{c,t} = a_pos s_t^+ + a_neg s_t^- + e_{c,t}` with a standard normal
/// shock and no dynamics; a common noise control `w` is included.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticLpSpec {
    pub seed: u64,
    pub n_countries: usize,
    pub calendar: Calendar,
    pub loading_pos: f64,
    pub loading_neg: f64,
    pub noise_sd: f64,
}

impl StaticLpSpec {
    pub fn symmetric(seed: u64, n_countries: usize, calendar: Calendar, loading: f64) -> Self {
        StaticLpSpec { seed, n_countries, calendar, loading_pos: loading, loading_neg: loading, noise_sd: 1.0 }
    }
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("C{:02}", i + 1)).collect()
}

pub fn gen_static_lp_panel(spec: &StaticLpSpec) -> Result<PanelDataset> {
    if spec.n_countries == 0 || !(spec.noise_sd >= 0.0) {
        bail!(Domain, "need at least one country and a nonnegative noise SD");
    }
    let t = spec.calendar.len;
    let mut p = PanelDataset::new(names(spec.n_countries), spec.calendar, alloc::vec!["y".into(), "w".into()], alloc::vec![false, true])?;
    let mut common = rng::substream(spec.seed, 0);
    let shock: Vec<f64> = (0..t).map(|_| rng::normal(&mut common)).collect();
    let w: Vec<f64> = (0..t).map(|_| rng::normal(&mut common)).collect();
    for c in 0..spec.n_countries {
        let mut r = rng::substream(spec.seed, 1 + c as u64);
        for (i, s) in shock.iter().enumerate() {
            let mean = spec.loading_pos * s.max(0.0) + spec.loading_neg * s.min(0.0);
            p.set(c, i, 0, mean + spec.noise_sd * rng::normal(&mut r));
            p.set(c, i, 1, w[i]);
        }
    }
    p.set_shock(shock)?;
    Ok(p)
}

/// Endogenous-regressor system instrumented by the shock `z`:
/// `ebp_t = pi z_t + v_t`, `y_{c,t} = b ebp_t + zeta v_t + e_{c,t}`.
/// The common `v_t` makes `ebp` correlated with the outcome error.
#[derive(Debug, Clone, PartialEq)]
pub struct IvDgpSpec {
    pub seed: u64,
    pub n_countries: usize,
    pub calendar: Calendar,
    pub b: f64,
    pub pi: f64,
    pub v_sd: f64,
    pub zeta: f64,
    pub noise_sd: f64,
}

impl IvDgpSpec {
    pub fn canonical(seed: u64, n_countries: usize, calendar: Calendar) -> Self {
        IvDgpSpec { seed, n_countries, calendar, b: -0.8, pi: 0.5, v_sd: 0.5, zeta: 1.5, noise_sd: 0.5 }
    }

    /// Large-sample limit of the OLS slope of `y` on `ebp`.
    pub fn ols_limit(&self) -> f64 {
        let v2 = self.v_sd * self.v_sd;
        self.b + self.zeta * v2 / (self.pi * self.pi + v2)
    }
}

/// Panel with variables `y` and global `ebp`; the shock is the instrument.
pub fn gen_iv_panel(spec: &IvDgpSpec) -> Result<PanelDataset> {
    if spec.n_countries == 0 || !(spec.v_sd >= 0.0 && spec.noise_sd >= 0.0) {
        bail!(Domain, "need at least one country and nonnegative SDs");
    }
    let t = spec.calendar.len;
    let mut p = PanelDataset::new(names(spec.n_countries), spec.calendar, alloc::vec!["y".into(), "ebp".into()], alloc::vec![false, true])?;
    let mut common = rng::substream(spec.seed, 0);
    let z: Vec<f64> = (0..t).map(|_| rng::normal(&mut common)).collect();
    let v: Vec<f64> = (0..t).map(|_| spec.v_sd * rng::normal(&mut common)).collect();
    for c in 0..spec.n_countries {
        let mut r = rng::substream(spec.seed, 1 + c as u64);
        for i in 0..t {
            let ebp = spec.pi * z[i] + v[i];
            p.set(c, i, 1, ebp);
            p.set(c, i, 0, spec.b * ebp + spec.zeta * v[i] + spec.noise_sd * rng::normal(&mut r));
        }
    }
    p.set_shock(z)?;
    Ok(p)
}
