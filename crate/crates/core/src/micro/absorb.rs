//! Weighted alternating projections for high-dimensional fixed effects.

use alloc::vec::Vec;

use crate::cluster::dense_ids;
use crate::linalg::Matrix;
use crate::{bail, Error, Result};

/// Dense group labels of one fixed-effect dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FeGroups {
    pub ids: Vec<usize>,
    pub count: usize,
}

impl FeGroups {
    pub fn from_keys<K: Ord + Clone>(keys: &[K]) -> Self {
        let (ids, count) = dense_ids(keys);
        FeGroups { ids, count }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsorbOptions {
    /// Stop once a sweep moves no entry by more than this fraction of the
    /// column's largest absolute value.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for AbsorbOptions {
    fn default() -> Self {
        AbsorbOptions { tolerance: 1e-8, max_sweeps: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Absorbed {
    pub data: Matrix,
    /// Largest sweep count over columns.
    pub sweeps: usize,
    /// Largest final relative change over columns.
    pub last_delta: f64,
}

fn demean_once(x: &mut [f64], g: &FeGroups, w: &[f64], sums: &mut [f64], wsum: &[f64]) {
    sums.iter_mut().for_each(|s| *s = 0.0);
    for (i, v) in x.iter().enumerate() {
        sums[g.ids[i]] += w[i] * v;
    }
    for (i, v) in x.iter_mut().enumerate() {
        *v -= sums[g.ids[i]] / wsum[g.ids[i]];
    }
}

/// Projects every column of `columns` off the span of the fixed-effect
/// indicators (weighted by `weights`).
///
/// With a single dimension the projection is exact after one sweep.
pub fn absorb_fixed_effects(columns: &Matrix, fe: &[FeGroups], weights: Option<&[f64]>, opts: AbsorbOptions) -> Result<Absorbed> {
    let n = columns.nrows();
    if fe.iter().any(|g| g.ids.len() != n) {
        bail!(Dimension, "fixed-effect labels must cover all {n} rows");
    }
    if fe.iter().any(|g| g.ids.iter().any(|&i| i >= g.count)) {
        bail!(Domain, "fixed-effect label out of range");
    }
    let ones;
    let w = match weights {
        Some(w) if w.len() != n => bail!(Dimension, "{} weights for {n} rows", w.len()),
        Some(w) if w.iter().any(|v| !(*v > 0.0 && v.is_finite())) => bail!(Domain, "weights must be positive"),
        Some(w) => w,
        None => {
            ones = alloc::vec![1.0; n];
            &ones
        }
    };
    let wsums: Vec<Vec<f64>> = fe
        .iter()
        .map(|g| {
            let mut s = alloc::vec![0.0; g.count];
            for (i, &id) in g.ids.iter().enumerate() {
                s[id] += w[i];
            }
            s
        })
        .collect();
    let mut out = columns.clone();
    let (mut max_sweeps, mut max_delta) = (0, 0.0f64);
    if fe.is_empty() {
        return Ok(Absorbed { data: out, sweeps: 0, last_delta: 0.0 });
    }
    let mut sums: Vec<Vec<f64>> = fe.iter().map(|g| alloc::vec![0.0; g.count]).collect();
    for j in 0..columns.ncols() {
        let mut col: Vec<f64> = columns.column(j).iter().copied().collect();
        let scale = col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if scale == 0.0 {
            continue;
        }
        let mut prev = col.clone();
        let mut sweeps = 0;
        let mut delta;
        loop {
            for (k, g) in fe.iter().enumerate() {
                demean_once(&mut col, g, w, &mut sums[k], &wsums[k]);
            }
            sweeps += 1;
            delta = col.iter().zip(&prev).fold(0.0f64, |a, (x, y)| a.max((x - y).abs())) / scale;
            if fe.len() == 1 || delta <= opts.tolerance {
                break;
            }
            if sweeps >= opts.max_sweeps {
                return Err(Error::NotConverged { sweeps, last_delta: delta });
            }
            prev.copy_from_slice(&col);
        }
        if fe.len() == 1 {
            delta = 0.0;
        }
        max_sweeps = max_sweeps.max(sweeps);
        max_delta = max_delta.max(delta);
        out.column_mut(j).copy_from_slice(&col);
    }
    Ok(Absorbed { data: out, sweeps: max_sweeps, last_delta: max_delta })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_key_is_group_demeaning() {
        let x = Matrix::from_column_slice(5, 1, &[1.0, 3.0, 2.0, 6.0, 10.0]);
        let g = FeGroups::from_keys(&[0, 0, 1, 1, 1]);
        let w = [1.0, 3.0, 1.0, 1.0, 2.0];
        let a = absorb_fixed_effects(&x, &[g], Some(&w), AbsorbOptions::default()).unwrap();
        assert_eq!(a.sweeps, 1);
        let m0 = (1.0 + 9.0) / 4.0;
        let m1 = (2.0 + 6.0 + 20.0) / 4.0;
        let expect = [1.0 - m0, 3.0 - m0, 2.0 - m1, 6.0 - m1, 10.0 - m1];
        for (a, b) in a.data.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn balanced_two_way_matches_within_transform() {
        let (r, c) = (4, 5);
        let x = Matrix::from_fn(r * c, 1, |i, _| ((i * 7) % 11) as f64 + 0.3 * (i as f64).sin());
        let rows: Vec<usize> = (0..r * c).map(|i| i / c).collect();
        let cols: Vec<usize> = (0..r * c).map(|i| i % c).collect();
        let a = absorb_fixed_effects(&x, &[FeGroups::from_keys(&rows), FeGroups::from_keys(&cols)], None, AbsorbOptions::default()).unwrap();
        let grand = x.mean();
        for i in 0..r * c {
            let rm: f64 = (0..c).map(|j| x[(rows[i] * c + j, 0)]).sum::<f64>() / c as f64;
            let cm: f64 = (0..r).map(|k| x[(k * c + cols[i], 0)]).sum::<f64>() / r as f64;
            assert!((a.data[(i, 0)] - (x[(i, 0)] - rm - cm + grand)).abs() < 1e-10);
        }
    }

    #[test]
    fn reports_non_convergence() {
        let x = Matrix::from_fn(40, 1, |i, _| (i as f64).cos());
        let a: Vec<usize> = (0..40).map(|i| i / 2).collect();
        let b: Vec<usize> = (0..40).map(|i| (i + 1) / 2 % 20).collect();
        let opts = AbsorbOptions { tolerance: 1e-15, max_sweeps: 3 };
        let err = absorb_fixed_effects(&x, &[FeGroups::from_keys(&a), FeGroups::from_keys(&b)], None, opts).unwrap_err();
        assert!(matches!(err, Error::NotConverged { sweeps: 3, .. }));
    }
}
