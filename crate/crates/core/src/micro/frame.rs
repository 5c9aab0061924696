//! Loan-registry frames at bank–currency or firm–bank–currency grain.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::calendar::{Frequency, Period};
use crate::{bail, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Currency {
    Local,
    Dollar,
}

impl Currency {
    pub fn code(self) -> u64 {
        match self {
            Currency::Local => 0,
            Currency::Dollar => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Currency::Local => "LC",
            Currency::Dollar => "USD",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "LC" | "local" | "UYU" => Ok(Currency::Local),
            "USD" | "dollar" | "FC" => Ok(Currency::Dollar),
            other => bail!(Domain, "unknown currency {other:?}"),
        }
    }
}

/// A dimension that fixed-effect and cluster keys are built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Dim {
    Firm,
    Bank,
    Currency,
    Month,
}

/// A tuple of dimensions, e.g. firm x month.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Key(pub Vec<Dim>);

impl Key {
    pub fn of(dims: &[Dim]) -> Self {
        let mut d = dims.to_vec();
        d.sort();
        d.dedup();
        Key(d)
    }

    pub fn bank() -> Self {
        Key::of(&[Dim::Bank])
    }

    pub fn firm() -> Self {
        Key::of(&[Dim::Firm])
    }

    pub fn currency() -> Self {
        Key::of(&[Dim::Currency])
    }

    pub fn month() -> Self {
        Key::of(&[Dim::Month])
    }

    pub fn firm_month() -> Self {
        Key::of(&[Dim::Firm, Dim::Month])
    }

    pub fn bank_month() -> Self {
        Key::of(&[Dim::Bank, Dim::Month])
    }

    pub fn has_month(&self) -> bool {
        self.0.contains(&Dim::Month)
    }

    pub fn name(&self) -> String {
        let parts: Vec<&str> = self
            .0
            .iter()
            .map(|d| match d {
                Dim::Firm => "firm",
                Dim::Bank => "bank",
                Dim::Currency => "currency",
                Dim::Month => "month",
            })
            .collect();
        parts.join("x")
    }
}

/// Columnar registry. Characteristic values stored on the row for month `t`
/// are the unit's values at `t - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroFrame {
    firm: Option<Vec<u64>>,
    bank: Vec<u64>,
    currency: Vec<Currency>,
    month: Vec<Period>,
    loan: Vec<f64>,
    characteristics: Vec<(String, Vec<f64>)>,
    weights: Option<Vec<f64>>,
    macro_controls: Vec<(String, BTreeMap<Period, f64>)>,
    index: BTreeMap<(u64, u64, u64, i64), usize>,
}

/// Identity of a lending relationship.
pub type UnitKey = (u64, u64, u64);

impl MicroFrame {
    pub fn new(
        firm: Option<Vec<u64>>,
        bank: Vec<u64>,
        currency: Vec<Currency>,
        month: Vec<Period>,
        loan: Vec<f64>,
    ) -> Result<Self> {
        let n = bank.len();
        if currency.len() != n || month.len() != n || loan.len() != n || firm.as_ref().is_some_and(|f| f.len() != n) {
            bail!(Dimension, "registry columns have different lengths");
        }
        if let Some(i) = month.iter().position(|m| m.freq != Frequency::Monthly) {
            bail!(Domain, "row {i}: registry months must be monthly periods");
        }
        if let Some(i) = loan.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            bail!(Domain, "row {i}: loan_outstanding must be positive, got {}", loan[i]);
        }
        let mut index = BTreeMap::new();
        for i in 0..n {
            let key = (firm.as_ref().map_or(0, |f| f[i]), bank[i], currency[i].code(), month[i].ordinal());
            if index.insert(key, i).is_some() {
                bail!(Domain, "row {i}: duplicate (unit, currency, month) key {:?} {} {}", &key, currency[i].as_str(), month[i]);
            }
        }
        Ok(MicroFrame { firm, bank, currency, month, loan, characteristics: Vec::new(), weights: None, macro_controls: Vec::new(), index })
    }

    pub fn len(&self) -> usize {
        self.bank.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bank.is_empty()
    }

    pub fn is_firm_level(&self) -> bool {
        self.firm.is_some()
    }

    pub fn firm(&self) -> Option<&[u64]> {
        self.firm.as_deref()
    }

    pub fn bank(&self) -> &[u64] {
        &self.bank
    }

    pub fn currency(&self) -> &[Currency] {
        &self.currency
    }

    pub fn month(&self) -> &[Period] {
        &self.month
    }

    pub fn loan(&self) -> &[f64] {
        &self.loan
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn unit(&self, row: usize) -> UnitKey {
        (self.firm.as_ref().map_or(0, |f| f[row]), self.bank[row], self.currency[row].code())
    }

    /// Row of `unit` at `month`, if observed.
    pub fn find(&self, unit: UnitKey, month: Period) -> Option<usize> {
        self.index.get(&(unit.0, unit.1, unit.2, month.ordinal())).copied()
    }

    pub fn add_characteristic(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.len() {
            bail!(Dimension, "characteristic {name:?} has {} values for {} rows", values.len(), self.len());
        }
        if self.characteristic(name).is_some() {
            bail!(Domain, "characteristic {name:?} already present");
        }
        self.characteristics.push((name.into(), values));
        Ok(())
    }

    pub fn characteristic(&self, name: &str) -> Option<&[f64]> {
        self.characteristics.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn characteristic_names(&self) -> Vec<&str> {
        self.characteristics.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn require_characteristic(&self, name: &str) -> Result<&[f64]> {
        self.characteristic(name).ok_or_else(|| crate::Error::Domain(format!("characteristic {name:?} is not in the frame")))
    }

    pub fn set_weights(&mut self, weights: Vec<f64>) -> Result<()> {
        if weights.len() != self.len() {
            bail!(Dimension, "{} weights for {} rows", weights.len(), self.len());
        }
        if let Some(i) = weights.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
            bail!(Domain, "row {i}: weights must be positive");
        }
        self.weights = Some(weights);
        Ok(())
    }

    pub fn add_macro_control(&mut self, name: &str, series: BTreeMap<Period, f64>) -> Result<()> {
        if self.macro_control(name).is_some() {
            bail!(Domain, "macro control {name:?} already present");
        }
        self.macro_controls.push((name.into(), series));
        Ok(())
    }

    pub fn macro_control(&self, name: &str) -> Option<&BTreeMap<Period, f64>> {
        self.macro_controls.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }

    pub fn macro_control_names(&self) -> Vec<&str> {
        self.macro_controls.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// Per-row identifier tuple for `key`.
    pub fn key_values(&self, key: &Key) -> Result<Vec<Vec<i64>>> {
        if key.0.is_empty() {
            bail!(Domain, "empty key");
        }
        if key.0.contains(&Dim::Firm) && self.firm.is_none() {
            bail!(Domain, "key {} needs firm identifiers but the frame is bank level", key.name());
        }
        Ok((0..self.len())
            .map(|i| {
                key.0
                    .iter()
                    .map(|d| match d {
                        Dim::Firm => self.firm.as_ref().map_or(0, |f| f[i] as i64),
                        Dim::Bank => self.bank[i] as i64,
                        Dim::Currency => self.currency[i].code() as i64,
                        Dim::Month => self.month[i].ordinal(),
                    })
                    .collect()
            })
            .collect())
    }

    /// Fails when `key` is the full row identity.
    pub fn check_fe_key(&self, key: &Key) -> Result<()> {
        let full = if self.is_firm_level() {
            Key::of(&[Dim::Firm, Dim::Bank, Dim::Currency, Dim::Month])
        } else {
            Key::of(&[Dim::Bank, Dim::Currency, Dim::Month])
        };
        if *key == full {
            bail!(Domain, "fixed effect {} equals the row identity and would absorb everything", key.name());
        }
        self.key_values(key).map(|_| ())
    }
}
