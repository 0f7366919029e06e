use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{pairwise_distances, Matrix};

pub const NOISE: i64 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanParams {
    /// Neighbourhood radius; neighbours satisfy `d <= eps`.
    pub eps: f64,
    /// Neighbourhood size, the point itself included, that makes a core point.
    pub min_pts: usize,
}

impl DbscanParams {
    pub fn new(eps: f64, min_pts: usize) -> Result<Self> {
        let p = DbscanParams { eps, min_pts };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.eps.is_finite() || self.eps < 0.0 {
            return Err(Error::InvalidParams(format!("eps must be >= 0, got {}", self.eps)));
        }
        if self.min_pts < 1 {
            return Err(Error::InvalidParams("min_pts must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-point cluster labels; [`NOISE`] marks noise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterLabels {
    pub labels: Vec<i64>,
    /// Number of non-noise clusters; labels are `0..k`.
    pub k: usize,
}

impl ClusterLabels {
    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }

    /// Member lists of each cluster, in label order.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            if l >= 0 {
                out[l as usize].push(i);
            }
        }
        out
    }
}

fn validate_distances(d: &Matrix) -> Result<()> {
    if !d.is_square() {
        return Err(Error::InvalidDistanceMatrix(format!(
            "{}x{} is not square",
            d.rows(),
            d.cols()
        )));
    }
    let n = d.rows();
    for i in 0..n {
        if d.get(i, i) != 0.0 {
            return Err(Error::InvalidDistanceMatrix(format!("diagonal entry {i} is not zero")));
        }
        for j in 0..n {
            let v = d.get(i, j);
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidDistanceMatrix(format!("entry ({i},{j}) = {v}")));
            }
            if (v - d.get(j, i)).abs() > 1e-9 * v.abs().max(1.0) {
                return Err(Error::InvalidDistanceMatrix(format!("asymmetric at ({i},{j})")));
            }
        }
    }
    Ok(())
}

/// DBSCAN over a precomputed symmetric distance matrix.
///
/// Points are visited in index order. A border point joins the first
/// cluster whose expansion reaches it.
pub fn dbscan_dist(d: &Matrix, params: &DbscanParams) -> Result<ClusterLabels> {
    params.validate()?;
    validate_distances(d)?;
    let n = d.rows();
    let neighbours: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| d.get(i, j) <= params.eps).collect())
        .collect();
    let core: Vec<bool> = neighbours.iter().map(|nb| nb.len() >= params.min_pts).collect();

    let mut labels = vec![NOISE; n];
    let mut k = 0usize;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if labels[start] != NOISE || !core[start] {
            continue;
        }
        let label = k as i64;
        k += 1;
        labels[start] = label;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            for &q in &neighbours[p] {
                if labels[q] == NOISE {
                    labels[q] = label;
                    if core[q] {
                        queue.push_back(q);
                    }
                }
            }
        }
    }
    Ok(ClusterLabels { labels, k })
}

/// DBSCAN on feature rows with Euclidean distance.
pub fn dbscan_points(points: &Matrix, params: &DbscanParams) -> Result<ClusterLabels> {
    dbscan_dist(&pairwise_distances(points), params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> Matrix {
        pairwise_distances(&Matrix::from_rows(xs.iter().map(|&x| vec![x]).collect()))
    }

    #[test]
    fn two_dense_groups() {
        let d = line(&[0.0, 1.0, 2.0, 10.0, 11.0, 12.0]);
        let l = dbscan_dist(&d, &DbscanParams::new(1.0, 3).unwrap()).unwrap();
        assert_eq!(l.labels, vec![0, 0, 0, 1, 1, 1]);
        assert_eq!(l.k, 2);
    }

    #[test]
    fn min_pts_one_has_no_noise() {
        let d = line(&[0.0, 0.5, 5.0, 5.4, 20.0]);
        let l = dbscan_dist(&d, &DbscanParams::new(0.5, 1).unwrap()).unwrap();
        assert_eq!(l.labels, vec![0, 0, 1, 1, 2]);
        assert_eq!(l.noise_count(), 0);
    }

    #[test]
    fn zero_eps_distinct_points_all_noise() {
        let d = line(&[0.0, 1.0, 2.0]);
        let l = dbscan_dist(&d, &DbscanParams::new(0.0, 2).unwrap()).unwrap();
        assert_eq!(l.labels, vec![NOISE; 3]);
        assert_eq!(l.k, 0);
    }

    #[test]
    fn border_point_goes_to_first_cluster() {
        // 2.0 is a border point reachable from the cores 1.0 and 3.0
        let d = line(&[0.0, 0.1, 0.2, 1.0, 2.0, 3.0, 3.8, 3.9, 4.0]);
        let l = dbscan_dist(&d, &DbscanParams::new(1.0, 4).unwrap()).unwrap();
        assert_eq!(l.labels, vec![0, 0, 0, 0, 0, 1, 1, 1, 1]);
    }

    #[test]
    fn rejects_bad_matrices() {
        let asym = Matrix::from_rows(vec![vec![0.0, 1.0], vec![2.0, 0.0]]);
        let neg = Matrix::from_rows(vec![vec![0.0, -1.0], vec![-1.0, 0.0]]);
        let p = DbscanParams::new(1.0, 1).unwrap();
        assert!(matches!(dbscan_dist(&asym, &p), Err(Error::InvalidDistanceMatrix(_))));
        assert!(matches!(dbscan_dist(&neg, &p), Err(Error::InvalidDistanceMatrix(_))));
        assert!(DbscanParams::new(-0.1, 1).is_err());
        assert!(DbscanParams::new(0.1, 0).is_err());
    }
}
