//! Natural cubic spline interpolation from quarterly to monthly frequency.

use alloc::vec::Vec;

use crate::calendar::Period;
use crate::{bail, Result};

/// Second derivatives of the natural cubic spline through `(x_i, y_i)`,
/// solved with the Thomas algorithm.
fn second_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = alloc::vec![0.0; n];
    if n < 3 {
        return m;
    }
    let k = n - 2;
    let mut sub = alloc::vec![0.0; k];
    let mut diag = alloc::vec![0.0; k];
    let mut sup = alloc::vec![0.0; k];
    let mut rhs = alloc::vec![0.0; k];
    for i in 1..n - 1 {
        let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
        sub[i - 1] = h0;
        diag[i - 1] = 2.0 * (h0 + h1);
        sup[i - 1] = h1;
        rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
    }
    for i in 1..k {
        let w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    m[k] = rhs[k - 1] / diag[k - 1];
    for i in (0..k - 1).rev() {
        m[i + 1] = (rhs[i] - sup[i] * m[i + 2]) / diag[i];
    }
    m
}

/// Evaluates the natural cubic spline through `(x, y)` at `at`.
pub fn natural_cubic_spline(x: &[f64], y: &[f64], at: &[f64]) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        bail!(Dimension, "{} knots but {} values", x.len(), y.len());
    }
    if x.len() < 4 {
        bail!(Domain, "cubic spline interpolation needs at least 4 points, got {}", x.len());
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        bail!(Domain, "knots must be strictly increasing");
    }
    let m = second_derivatives(x, y);
    let n = x.len();
    Ok(at
        .iter()
        .map(|&t| {
            let i = match x.iter().position(|&k| k >= t) {
                Some(0) => 0,
                Some(j) => j - 1,
                None => n - 2,
            }
            .min(n - 2);
            let h = x[i + 1] - x[i];
            if t == x[i] {
                return y[i];
            }
            if t == x[i + 1] {
                return y[i + 1];
            }
            let a = (x[i + 1] - t) / h;
            let b = (t - x[i]) / h;
            a * y[i] + b * y[i + 1] + ((a * a * a - a) * m[i] + (b * b * b - b) * m[i + 1]) * h * h / 6.0
        })
        .collect())
}

/// Places quarterly values at quarter-end months and interpolates every
/// month in between; returns `3 (n - 1) + 1` monthly values.
pub fn cubic_spline_interpolate(quarterly: &[f64]) -> Result<Vec<f64>> {
    let n = quarterly.len();
    if n < 4 {
        bail!(Domain, "cubic spline interpolation needs at least 4 quarterly points, got {n}");
    }
    let x: Vec<f64> = (0..n).map(|i| 3.0 * i as f64).collect();
    let at: Vec<f64> = (0..=3 * (n - 1)).map(|j| j as f64).collect();
    natural_cubic_spline(&x, quarterly, &at)
}

/// Monthly interpolation with the first output month attached.
pub fn quarterly_to_monthly(first_quarter: Period, quarterly: &[f64]) -> Result<(Period, Vec<f64>)> {
    Ok((first_quarter.end_month(), cubic_spline_interpolate(quarterly)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_linear_data() {
        let q: Vec<f64> = (0..6).map(|i| 2.0 + 0.5 * i as f64).collect();
        let m = cubic_spline_interpolate(&q).unwrap();
        assert_eq!(m.len(), 16);
        for (j, v) in m.iter().enumerate() {
            assert!((v - (2.0 + 0.5 * j as f64 / 3.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn passes_through_knots() {
        let q = [1.0, -2.0, 0.5, 4.0, 3.0];
        let m = cubic_spline_interpolate(&q).unwrap();
        for (i, v) in q.iter().enumerate() {
            assert_eq!(m[3 * i], *v);
        }
    }

    #[test]
    fn rejects_short_input() {
        assert!(cubic_spline_interpolate(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn natural_boundary_and_continuity() {
        let x = [0.0, 1.0, 2.5, 3.0, 5.0];
        let y = [0.0, 1.0, -1.0, 0.5, 2.0];
        let m = second_derivatives(&x, &y);
        assert_eq!(m[0], 0.0);
        assert_eq!(m[4], 0.0);
        // first derivative continuity at interior knots
        for i in 1..4 {
            let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
            let left = (y[i] - y[i - 1]) / h0 + h0 * (2.0 * m[i] + m[i - 1]) / 6.0;
            let right = (y[i + 1] - y[i]) / h1 - h1 * (2.0 * m[i] + m[i + 1]) / 6.0;
            assert!((left - right).abs() < 1e-12);
        }
    }

    #[test]
    fn monthly_start_is_quarter_end() {
        let (p, _) = quarterly_to_monthly(Period::quarterly(2001, 2), &[1.0, 2.0, 3.0, 5.0]).unwrap();
        assert_eq!(p, Period::monthly(2001, 6));
    }
}
