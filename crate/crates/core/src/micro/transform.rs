//! Within-unit standardization and relationship-age detrending.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::linalg::{least_squares, Matrix, Vector};
use crate::{bail, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Standardized<K> {
    /// z-scores; `NaN` for rows of excluded units and for missing inputs.
    pub values: Vec<f64>,
    /// Units with fewer than two observations or no variation.
    pub excluded: Vec<K>,
}

/// Subtracts each unit's mean and divides by its sample SD.
pub fn standardize_within_unit<K: Ord + Clone>(values: &[f64], units: &[K]) -> Result<Standardized<K>> {
    if values.len() != units.len() {
        bail!(Dimension, "{} values for {} unit keys", values.len(), units.len());
    }
    let mut groups: BTreeMap<&K, Vec<usize>> = BTreeMap::new();
    for (i, u) in units.iter().enumerate() {
        if values[i].is_finite() {
            groups.entry(u).or_default().push(i);
        }
    }
    let mut out = alloc::vec![f64::NAN; values.len()];
    let mut excluded = Vec::new();
    let seen: alloc::collections::BTreeSet<&K> = groups.keys().copied().collect();
    for (u, idx) in &groups {
        let x: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
        let m = crate::stats::mean(&x);
        let sd = crate::stats::std_dev(&x);
        let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if x.len() < 2 || !(sd > 1e-14 * scale) {
            excluded.push((*u).clone());
            continue;
        }
        for &i in idx {
            out[i] = (values[i] - m) / sd;
        }
    }
    for u in units {
        if !seen.contains(u) && !excluded.contains(u) {
            excluded.push(u.clone());
        }
    }
    excluded.sort();
    Ok(Standardized { values: out, excluded })
}

/// Residuals of a pooled OLS of `leverage` on `1, age, .., age^degree`.
pub fn detrend_by_age(leverage: &[f64], age: &[f64], degree: usize) -> Result<Vec<f64>> {
    if leverage.len() != age.len() {
        bail!(Dimension, "{} leverage values for {} ages", leverage.len(), age.len());
    }
    if !(1..=2).contains(&degree) {
        bail!(Domain, "degree must be 1 or 2, got {degree}");
    }
    if let Some(a) = age.iter().find(|a| !(**a >= 0.0) || !a.is_finite()) {
        bail!(Domain, "relationship age must be nonnegative, got {a}");
    }
    if leverage.iter().any(|v| !v.is_finite()) {
        bail!(Domain, "leverage must be finite");
    }
    let n = age.len();
    if n < degree + 2 {
        bail!(InsufficientData, "{n} observations for a degree-{degree} age trend");
    }
    let x = Matrix::from_fn(n, degree + 1, |i, j| libm::pow(age[i], j as f64));
    let fit = least_squares(&x, &Vector::from_column_slice(leverage), None).map_err(|e| match e {
        crate::Error::Collinear(_) => crate::Error::Collinear("relationship age has too little variation for the polynomial".into()),
        other => other,
    })?;
    Ok(fit.resid.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_triple() {
        let s = standardize_within_unit(&[1.0, 2.0, 3.0], &[0, 0, 0]).unwrap();
        assert_eq!(s.values, [-1.0, 0.0, 1.0]);
    }

    #[test]
    fn flags_constant_and_singleton_units() {
        let s = standardize_within_unit(&[1.0, 1.0, 4.0, 2.0, 5.0], &['a', 'a', 'b', 'c', 'c']).unwrap();
        assert_eq!(s.excluded, ['a', 'b']);
        assert!(s.values[..3].iter().all(|v| v.is_nan()));
        assert!((s.values[3] + s.values[4]).abs() < 1e-15);
    }

    #[test]
    fn exact_polynomials_leave_no_residual() {
        let age: Vec<f64> = (0..20).map(|i| i as f64 * 1.5).collect();
        let lin: Vec<f64> = age.iter().map(|a| 2.0 - 0.3 * a).collect();
        assert!(detrend_by_age(&lin, &age, 1).unwrap().iter().all(|r| r.abs() < 1e-12));
        let quad: Vec<f64> = age.iter().map(|a| a * a).collect();
        assert!(detrend_by_age(&quad, &age, 2).unwrap().iter().all(|r| r.abs() < 1e-9));
        assert!(detrend_by_age(&quad, &age, 1).unwrap().iter().any(|r| r.abs() > 1.0));
        assert!(detrend_by_age(&quad, &[3.0; 20], 1).is_err());
    }
}
