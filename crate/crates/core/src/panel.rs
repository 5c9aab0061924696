//! Country × period macro panels with an aligned exogenous shock series.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::calendar::{Calendar, Period};
use crate::{bail, Result};

/// Emerging-market block in canonical order.
pub const EME_BLOCK: [&str; 5] = ["ln_ner", "ln_gdp", "ln_gfc", "ln_expo", "ln_impo"];
/// Global (US) block in canonical order; identical across countries.
pub const GLOBAL_BLOCK: [&str; 4] = ["fed_funds", "ln_indpro", "ln_pcepi", "ebp"];

/// A missing cell in a panel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gap {
    pub country: String,
    pub period: Period,
}

/// Dense panel; missing cells hold `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    countries: Vec<String>,
    calendar: Calendar,
    variables: Vec<String>,
    global: Vec<bool>,
    data: Vec<f64>,
    shock: Vec<f64>,
}

impl PanelDataset {
    /// Empty panel (all cells missing, shock zero).
    pub fn new(countries: Vec<String>, calendar: Calendar, variables: Vec<String>, global: Vec<bool>) -> Result<Self> {
        if countries.is_empty() || variables.is_empty() {
            bail!(Domain, "a panel needs at least one country and one variable");
        }
        if global.len() != variables.len() {
            bail!(Dimension, "{} global flags for {} variables", global.len(), variables.len());
        }
        for (i, c) in countries.iter().enumerate() {
            if countries[..i].contains(c) {
                bail!(Domain, "duplicate country {c:?}");
            }
        }
        for (i, v) in variables.iter().enumerate() {
            if variables[..i].contains(v) {
                bail!(Domain, "duplicate variable {v:?}");
            }
        }
        let n = countries.len() * calendar.len * variables.len();
        Ok(PanelDataset {
            data: alloc::vec![f64::NAN; n],
            shock: alloc::vec![0.0; calendar.len],
            countries,
            calendar,
            variables,
            global,
        })
    }

    /// Panel with the canonical nine-variable layout.
    pub fn canonical(countries: Vec<String>, calendar: Calendar) -> Result<Self> {
        let variables = EME_BLOCK.iter().chain(GLOBAL_BLOCK.iter()).map(|s| s.to_string()).collect();
        let global = (0..9).map(|i| i >= EME_BLOCK.len()).collect();
        PanelDataset::new(countries, calendar, variables, global)
    }

    pub fn countries(&self) -> &[String] {
        &self.countries
    }

    pub fn calendar(&self) -> Calendar {
        self.calendar
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn is_global(&self, var: usize) -> bool {
        self.global[var]
    }

    pub fn n_countries(&self) -> usize {
        self.countries.len()
    }

    pub fn n_periods(&self) -> usize {
        self.calendar.len
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    pub fn country_index(&self, name: &str) -> Option<usize> {
        self.countries.iter().position(|c| c == name)
    }

    #[inline]
    fn idx(&self, c: usize, t: usize, v: usize) -> usize {
        (c * self.calendar.len + t) * self.variables.len() + v
    }

    #[inline]
    pub fn get(&self, c: usize, t: usize, v: usize) -> f64 {
        self.data[self.idx(c, t, v)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, t: usize, v: usize, value: f64) {
        let i = self.idx(c, t, v);
        self.data[i] = value;
    }

    /// Values of one variable for one country over the calendar.
    pub fn series(&self, c: usize, v: usize) -> Vec<f64> {
        (0..self.calendar.len).map(|t| self.get(c, t, v)).collect()
    }

    pub fn shock(&self) -> &[f64] {
        &self.shock
    }

    pub fn set_shock(&mut self, shock: Vec<f64>) -> Result<()> {
        if shock.len() != self.calendar.len {
            bail!(Dimension, "shock has {} periods, panel has {}", shock.len(), self.calendar.len);
        }
        if shock.iter().any(|v| !v.is_finite()) {
            bail!(Domain, "shock series must be finite");
        }
        self.shock = shock;
        Ok(())
    }

    /// Adds a per-period series (e.g. an instrument) as a new global variable.
    pub fn add_global_variable(&mut self, name: &str, values: &[f64]) -> Result<usize> {
        if values.len() != self.calendar.len {
            bail!(Dimension, "{} values for {} periods", values.len(), self.calendar.len);
        }
        if self.var_index(name).is_some() {
            bail!(Domain, "variable {name:?} already present");
        }
        let (nc, nt, nv) = (self.n_countries(), self.n_periods(), self.n_vars());
        let mut data = Vec::with_capacity(nc * nt * (nv + 1));
        for c in 0..nc {
            for (t, val) in values.iter().enumerate() {
                data.extend_from_slice(&self.data[self.idx(c, t, 0)..self.idx(c, t, 0) + nv]);
                data.push(*val);
            }
        }
        self.data = data;
        self.variables.push(name.to_string());
        self.global.push(true);
        Ok(nv)
    }

    /// Missing (country, period) cells, counting a cell missing when any
    /// variable is missing.
    pub fn gaps(&self) -> Vec<Gap> {
        let mut out = Vec::new();
        for c in 0..self.n_countries() {
            for t in 0..self.n_periods() {
                if (0..self.n_vars()).any(|v| !self.get(c, t, v).is_finite()) {
                    out.push(Gap { country: self.countries[c].clone(), period: self.calendar.period(t) });
                }
            }
        }
        out
    }

    pub fn is_balanced(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Fails unless global-block variables agree across countries to `tol`.
    pub fn check_global_equality(&self, tol: f64) -> Result<()> {
        for v in (0..self.n_vars()).filter(|v| self.global[*v]) {
            for t in 0..self.n_periods() {
                let mut first: Option<f64> = None;
                for c in 0..self.n_countries() {
                    let x = self.get(c, t, v);
                    if !x.is_finite() {
                        continue;
                    }
                    match first {
                        None => first = Some(x),
                        Some(f) if (f - x).abs() > tol * (1.0 + f.abs()) => bail!(
                            Domain,
                            "global variable {} differs across countries at {} ({f} vs {x} for {})",
                            self.variables[v],
                            self.calendar.period(t),
                            self.countries[c]
                        ),
                        _ => {}
                    }
                }
            }
        }
        Ok(())
    }

    /// Requires a fully observed panel.
    pub fn require_balanced(&self) -> Result<()> {
        let gaps = self.gaps();
        if let Some(g) = gaps.first() {
            bail!(Unbalanced, "{} missing cells, first at {} {}", gaps.len(), g.country, g.period);
        }
        Ok(())
    }

    /// Keeps only the listed countries (in the given order).
    pub fn select_countries(&self, keep: &[usize]) -> Result<Self> {
        let names = keep.iter().map(|&c| self.countries[c].clone()).collect();
        let mut out = PanelDataset::new(names, self.calendar, self.variables.clone(), self.global.clone())?;
        for (new_c, &c) in keep.iter().enumerate() {
            for t in 0..self.n_periods() {
                for v in 0..self.n_vars() {
                    out.set(new_c, t, v, self.get(c, t, v));
                }
            }
        }
        out.shock = self.shock.clone();
        Ok(out)
    }
}
