//! Cluster-robust sandwich covariances.
//!
//! Scores are per-row contributions `s_i = x_i w_i u_i`; the bread is
//! `(X' W X)^{-1}`. Every dimension applies the CR1 factor
//! `G/(G-1) * (N-1)/(N-K)` with its own cluster count `G`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::linalg::{self, Matrix};
use crate::{bail, Result};

/// Covariance estimate with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterCov {
    pub cov: Matrix,
    /// Cluster counts per dimension (one entry for one-way).
    pub n_clusters: Vec<usize>,
    /// True when negative eigenvalues were truncated.
    pub psd_repaired: bool,
}

impl ClusterCov {
    pub fn se(&self, j: usize) -> f64 {
        libm::sqrt(self.cov[(j, j)].max(0.0))
    }
}

/// Dense cluster labels `0..G` in order of first appearance.
pub fn dense_ids<K: Ord + Clone>(keys: &[K]) -> (Vec<usize>, usize) {
    let mut map = BTreeMap::new();
    let ids = keys
        .iter()
        .map(|k| {
            let next = map.len();
            *map.entry(k.clone()).or_insert(next)
        })
        .collect();
    (ids, map.len())
}

/// `sum_g (sum_{i in g} s_i)(sum_{i in g} s_i)'` and the cluster count.
pub fn cluster_meat<K: Ord + Clone>(scores: &Matrix, keys: &[K]) -> Result<(Matrix, usize)> {
    if keys.len() != scores.nrows() {
        bail!(Dimension, "{} cluster keys for {} score rows", keys.len(), scores.nrows());
    }
    let (ids, g) = dense_ids(keys);
    let k = scores.ncols();
    let mut sums = Matrix::zeros(g, k);
    for (i, &c) in ids.iter().enumerate() {
        for j in 0..k {
            sums[(c, j)] += scores[(i, j)];
        }
    }
    Ok((sums.transpose() * sums, g))
}

fn cr1(g: usize, n: usize, k: usize) -> Result<f64> {
    if g < 2 {
        bail!(Domain, "a cluster dimension with {g} cluster leaves the variance undefined");
    }
    if n <= k {
        bail!(InsufficientData, "{n} observations for {k} parameters");
    }
    Ok(g as f64 / (g - 1) as f64 * (n - 1) as f64 / (n - k) as f64)
}

fn sandwich(bread: &Matrix, meat: &Matrix) -> Matrix {
    let v = bread * meat * bread;
    (&v + v.transpose()) * 0.5
}

/// One-way CR1 covariance.
pub fn oneway_cluster_cov<K: Ord + Clone>(bread: &Matrix, scores: &Matrix, keys: &[K]) -> Result<ClusterCov> {
    let (meat, g) = cluster_meat(scores, keys)?;
    let c = cr1(g, scores.nrows(), scores.ncols())?;
    Ok(ClusterCov { cov: sandwich(bread, &meat) * c, n_clusters: alloc::vec![g], psd_repaired: false })
}

/// HC1 covariance: every row its own cluster.
pub fn robust_cov(bread: &Matrix, scores: &Matrix) -> Result<ClusterCov> {
    let rows: Vec<usize> = (0..scores.nrows()).collect();
    oneway_cluster_cov(bread, scores, &rows)
}

/// Two-way covariance by inclusion–exclusion, `V_A + V_B - V_{A∩B}`,
/// with eigenvalue truncation when the sum is not PSD.
pub fn twoway_cluster_cov<A: Ord + Clone, B: Ord + Clone>(
    bread: &Matrix,
    scores: &Matrix,
    a: &[A],
    b: &[B],
) -> Result<ClusterCov> {
    if a.len() != b.len() {
        bail!(Dimension, "cluster key lengths differ ({} vs {})", a.len(), b.len());
    }
    let va = oneway_cluster_cov(bread, scores, a)?;
    let vb = oneway_cluster_cov(bread, scores, b)?;
    let both: Vec<(A, B)> = a.iter().cloned().zip(b.iter().cloned()).collect();
    let vab = oneway_cluster_cov(bread, scores, &both)?;
    let raw = &va.cov + &vb.cov - &vab.cov;
    let (cov, psd_repaired) = linalg::psd_repair(&raw);
    let cov = if psd_repaired { cov } else { raw };
    Ok(ClusterCov { cov, n_clusters: alloc::vec![va.n_clusters[0], vb.n_clusters[0]], psd_repaired })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Matrix, Matrix) {
        let scores = Matrix::from_row_slice(6, 2, &[1.0, 0.5, -2.0, 1.0, 0.5, 0.3, 1.5, -1.0, -0.7, 0.2, 0.4, 0.9]);
        let bread = Matrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        (bread, scores)
    }

    #[test]
    fn dense_ids_follow_first_appearance() {
        let (ids, g) = dense_ids(&[7, 3, 7, 9, 3]);
        assert_eq!(ids, [0, 1, 0, 2, 1]);
        assert_eq!(g, 3);
    }

    #[test]
    fn coincident_keys_reduce_to_one_way() {
        let (bread, scores) = toy();
        let keys = [1, 1, 2, 2, 3, 3];
        let one = oneway_cluster_cov(&bread, &scores, &keys).unwrap();
        let two = twoway_cluster_cov(&bread, &scores, &keys, &keys).unwrap();
        assert!((one.cov - two.cov).abs().max() < 1e-14);
    }

    #[test]
    fn single_cluster_is_rejected() {
        let (bread, scores) = toy();
        assert!(oneway_cluster_cov(&bread, &scores, &[0; 6]).is_err());
        assert!(twoway_cluster_cov(&bread, &scores, &[0, 0, 1, 1, 2, 2], &[0; 6]).is_err());
    }

    #[test]
    fn robust_is_hc1() {
        let (bread, scores) = toy();
        let v = robust_cov(&bread, &scores).unwrap();
        let meat = scores.transpose() * &scores;
        let expect = &bread * meat * &bread * (6.0 / 4.0);
        assert!((v.cov - expect).abs().max() < 1e-13);
    }
}
