//! Pooled-VAR macro panels with a common global block.

use alloc::string::String;
use alloc::vec::Vec;

use crate::calendar::Calendar;
use crate::linalg::{self, Matrix, Vector};
use crate::panel::{PanelDataset, EME_BLOCK};
use crate::rng;
use crate::var::{companion, propagate};
use crate::{bail, Result};

/// Data-generating VAR in the canonical nine-variable layout.
///
/// Global rows (`is_global`) may load only on global lags and draw one
/// innovation per period shared by all countries, so the global block is
/// identical across countries. Country rows draw independent innovations.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroDgpSpec {
    pub seed: u64,
    pub countries: Vec<String>,
    pub calendar: Calendar,
    /// `A_1, ..., A_p`, each `m x m` with rows indexing equations.
    pub lag_mats: Vec<Matrix>,
    /// Impact of a unit exogenous shock.
    pub loading: Vector,
    pub intercept: Vector,
    pub noise_sd: Vector,
    /// Periods simulated and discarded before the sample starts.
    pub burn_in: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroTruth {
    /// `[variable][h]` response to a unit shock for `h = 0..=horizon`.
    pub irf: Vec<Vec<f64>>,
    pub lag_mats: Vec<Matrix>,
    pub loading: Vector,
}

impl MacroTruth {
    pub fn horizon(&self) -> usize {
        self.irf.first().map_or(0, |v| v.len().saturating_sub(1))
    }
}

fn country_names(n: usize) -> Vec<String> {
    (0..n).map(|i| alloc::format!("C{:02}", i + 1)).collect()
}

impl MacroDgpSpec {
    /// Stable two-lag system: persistent own dynamics, EME variables
    /// loading on lagged global conditions, and a shock that appreciates
    /// the currency, expands activity and credit, and lowers the EBP.
    pub fn canonical(seed: u64, n_countries: usize, calendar: Calendar) -> Self {
        let m = 9;
        let own1 = [0.55, 0.6, 0.65, 0.5, 0.5, 0.7, 0.6, 0.7, 0.5];
        let own2 = [0.1, 0.1, 0.05, 0.1, 0.1, 0.1, 0.1, 0.1, 0.15];
        let mut a1 = Matrix::zeros(m, m);
        let mut a2 = Matrix::zeros(m, m);
        for i in 0..m {
            a1[(i, i)] = own1[i];
            a2[(i, i)] = own2[i];
        }
        // EME rows: activity and credit respond to global financial conditions
        a1[(1, 8)] = -0.1;
        a1[(2, 8)] = -0.15;
        a1[(2, 1)] = 0.1;
        a1[(3, 1)] = 0.1;
        a1[(4, 1)] = 0.1;
        a1[(0, 5)] = 0.05;
        // global rows: only global lags
        a1[(6, 8)] = -0.1;
        a1[(5, 6)] = 0.1;
        MacroDgpSpec {
            seed,
            countries: country_names(n_countries),
            calendar,
            lag_mats: alloc::vec![a1, a2],
            loading: Vector::from_vec(alloc::vec![-0.3, 0.4, 0.6, 0.3, 0.35, 0.1, 0.2, 0.05, -0.5]),
            intercept: Vector::from_element(m, 0.1),
            noise_sd: Vector::from_element(m, 0.5),
            burn_in: 100,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.loading.len()
    }

    pub fn is_global(&self, v: usize) -> bool {
        v >= EME_BLOCK.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.n_vars();
        if m != 9 {
            bail!(Dimension, "the macro DGP uses the nine-variable layout, got {m}");
        }
        if self.lag_mats.is_empty() || self.lag_mats.iter().any(|a| a.shape() != (m, m)) {
            bail!(Dimension, "lag matrices must be {m} x {m}");
        }
        if self.intercept.len() != m || self.noise_sd.len() != m {
            bail!(Dimension, "intercept and noise SDs need {m} entries");
        }
        if self.noise_sd.iter().any(|s| !(*s > 0.0)) {
            bail!(Domain, "noise SDs must be positive");
        }
        if self.countries.is_empty() {
            bail!(Domain, "at least one country is required");
        }
        for a in &self.lag_mats {
            for i in (0..m).filter(|i| self.is_global(*i)) {
                if (0..m).any(|j| !self.is_global(j) && a[(i, j)] != 0.0) {
                    bail!(Domain, "global equation {i} loads on a country variable; the global block must be common");
                }
            }
        }
        let radius = linalg::spectral_radius(&companion(&self.lag_mats));
        if !(radius < 1.0) {
            bail!(Domain, "DGP companion matrix is not stable (spectral radius {radius})");
        }
        Ok(())
    }

    pub fn true_irf(&self, horizon: usize) -> Vec<Vec<f64>> {
        propagate(&self.lag_mats, &self.loading, horizon)
    }
}

/// Simulates the panel and returns it with the true response to a unit shock.
pub fn gen_macro_panel(spec: &MacroDgpSpec, horizon: usize) -> Result<(PanelDataset, MacroTruth)> {
    spec.validate()?;
    let m = spec.n_vars();
    let t_obs = spec.calendar.len;
    let total = spec.burn_in + t_obs;
    let nc = spec.countries.len();

    let mut shock_rng = rng::substream(spec.seed, 0);
    let shock: Vec<f64> = (0..total).map(|_| rng::normal(&mut shock_rng)).collect();
    let mut global_rng = rng::substream(spec.seed, 1);
    let global_noise: Vec<Vector> = (0..total)
        .map(|_| Vector::from_fn(m, |i, _| if spec.is_global(i) { spec.noise_sd[i] * rng::normal(&mut global_rng) } else { 0.0 }))
        .collect();

    let mut panel = PanelDataset::canonical(spec.countries.clone(), spec.calendar)?;
    for c in 0..nc {
        let mut crng = rng::substream(spec.seed, 2 + c as u64);
        let mut hist: Vec<Vector> = Vec::with_capacity(total);
        for t in 0..total {
            let mut y = spec.intercept.clone() + &spec.loading * shock[t];
            for (l, a) in spec.lag_mats.iter().enumerate() {
                if t > l {
                    y += a * &hist[t - l - 1];
                }
            }
            for i in 0..m {
                y[i] += if spec.is_global(i) { global_noise[t][i] } else { spec.noise_sd[i] * rng::normal(&mut crng) };
            }
            hist.push(y);
        }
        for t in 0..t_obs {
            for v in 0..m {
                panel.set(c, t, v, hist[spec.burn_in + t][v]);
            }
        }
    }
    panel.set_shock(shock[spec.burn_in..].to_vec())?;
    let truth = MacroTruth { irf: spec.true_irf(horizon), lag_mats: spec.lag_mats.clone(), loading: spec.loading.clone() };
    Ok((panel, truth))
}
