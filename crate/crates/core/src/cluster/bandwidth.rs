use std::io::Write;

use crate::error::{Error, Result};
use crate::matrix::{pairwise_distances, Matrix};

/// Mean distance from each point to its `ceil(quantile * (n - 1))`-th nearest
/// neighbour.
///
/// Falls back to the smallest non-zero pairwise distance when that mean is
/// zero, which happens when every point has an exact duplicate.
pub fn estimate_bandwidth(points: &Matrix, quantile: f64) -> Result<f64> {
    if !(quantile > 0.0 && quantile <= 1.0) {
        return Err(Error::InvalidParams(format!(
            "bandwidth quantile must be in (0, 1], got {quantile}"
        )));
    }
    let n = points.rows();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    let k = ((quantile * (n - 1) as f64 - 1e-9).ceil() as usize).clamp(1, n - 1);
    let dist = pairwise_distances(points);
    let kth = k_distances(&dist, k)?;
    let mean = kth.iter().sum::<f64>() / n as f64;
    if mean > 0.0 {
        return Ok(mean);
    }
    dist.iter_rows()
        .flat_map(|r| r.iter().copied())
        .filter(|&d| d > 0.0)
        .min_by(f64::total_cmp)
        .ok_or(Error::AllPointsIdentical)
}

/// Distance from every point to its `k`-th nearest other point.
pub fn k_distances(dist: &Matrix, k: usize) -> Result<Vec<f64>> {
    let n = dist.rows();
    if !dist.is_square() {
        return Err(Error::InvalidDistanceMatrix("matrix is not square".into()));
    }
    if k == 0 || n <= k {
        return Err(Error::TooFewPoints { needed: k + 1, got: n });
    }
    Ok((0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist.get(i, j)).collect();
            row.sort_by(f64::total_cmp);
            row[k - 1]
        })
        .collect())
}

/// Result of the k-distance elbow heuristic.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsSuggestion {
    pub eps: f64,
    /// k-distances sorted in descending order.
    pub curve: Vec<f64>,
    /// Position of the elbow in `curve`, `None` when the median was used.
    pub elbow: Option<usize>,
}

impl EpsSuggestion {
    /// True when the curve had no curvature and the median was returned.
    pub fn is_degenerate(&self) -> bool {
        self.elbow.is_none()
    }
}

/// Picks eps at the point of maximum positive second difference of the
/// descending k-distance curve. Ties go to the larger eps; a curve without
/// positive curvature yields its median.
pub fn suggest_eps(dist: &Matrix, k: usize) -> Result<EpsSuggestion> {
    Ok(eps_from_curve(k_distances(dist, k)?))
}

/// Elbow rule applied to an arbitrary k-distance curve (any order).
pub fn eps_from_curve(mut curve: Vec<f64>) -> EpsSuggestion {
    curve.sort_by(|a, b| b.total_cmp(a));
    let scale = curve.iter().fold(0.0f64, |m, &x| m.max(x.abs())).max(1.0);
    let mut elbow: Option<(usize, f64)> = None;
    for i in 1..curve.len().saturating_sub(1) {
        let second = curve[i - 1] - 2.0 * curve[i] + curve[i + 1];
        if second > 1e-12 * scale && elbow.is_none_or(|(_, best)| second > best) {
            elbow = Some((i, second));
        }
    }
    let (eps, elbow) = match elbow {
        Some((i, _)) => (curve[i], Some(i)),
        None => {
            log::warn!("k-distance curve has no elbow; using its median");
            (median(&curve), None)
        }
    };
    EpsSuggestion { eps, curve, elbow }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// `rank,k_distance` rows of a suggestion's curve.
pub fn write_k_distance_csv<W: Write>(s: &EpsSuggestion, mut out: W) -> std::io::Result<()> {
    writeln!(out, "rank,k_distance")?;
    for (i, d) in s.curve.iter().enumerate() {
        writeln!(out, "{i},{d}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> Matrix {
        Matrix::from_rows(xs.iter().map(|&x| vec![x]).collect())
    }

    #[test]
    fn two_points() {
        assert_eq!(estimate_bandwidth(&line(&[0.0, 2.0]), 0.5).unwrap(), 2.0);
    }

    #[test]
    fn duplicates_fall_back_to_smallest_gap() {
        // every point has a twin, so every nearest-neighbour distance is 0
        let x = line(&[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(estimate_bandwidth(&x, 0.1).unwrap(), 1.0);
    }

    #[test]
    fn identical_points_error() {
        assert!(matches!(
            estimate_bandwidth(&line(&[3.0, 3.0, 3.0]), 0.3),
            Err(Error::AllPointsIdentical)
        ));
        assert!(matches!(
            estimate_bandwidth(&line(&[3.0]), 0.3),
            Err(Error::TooFewPoints { .. })
        ));
        assert!(estimate_bandwidth(&line(&[0.0, 1.0]), 0.0).is_err());
    }

    #[test]
    fn quantile_selects_neighbour_rank() {
        // n = 4, quantile 1.0 -> 3rd neighbour = farthest point
        let x = line(&[0.0, 1.0, 3.0, 6.0]);
        let expected = (6.0 + 5.0 + 3.0 + 6.0) / 4.0;
        assert!((estimate_bandwidth(&x, 1.0).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn elbow_at_largest_curvature() {
        let s = eps_from_curve(vec![9.0, 8.8, 8.5, 3.0, 2.9, 2.8]);
        assert_eq!(s.eps, 3.0);
        assert_eq!(s.elbow, Some(3));
    }

    #[test]
    fn linear_curve_uses_median() {
        let s = eps_from_curve(vec![5.0, 4.0, 3.0, 2.0, 1.0]);
        assert!(s.is_degenerate());
        assert_eq!(s.eps, 3.0);
    }

    #[test]
    fn curvature_tie_prefers_larger_eps() {
        // second differences: 2 at index 1 and 2 at index 4
        let s = eps_from_curve(vec![10.0, 6.0, 4.0, 2.0, 0.0, 0.0]);
        assert_eq!(s.elbow, Some(1));
        assert_eq!(s.eps, 6.0);
    }

    #[test]
    fn two_points_single_distance() {
        let d = Matrix::from_rows(vec![vec![0.0, 0.7], vec![0.7, 0.0]]);
        let s = suggest_eps(&d, 1).unwrap();
        assert_eq!(s.eps, 0.7);
        assert!(matches!(suggest_eps(&d, 2), Err(Error::TooFewPoints { .. })));
    }

    #[test]
    fn curve_csv() {
        let mut buf = Vec::new();
        write_k_distance_csv(&eps_from_curve(vec![2.0, 1.0]), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "rank,k_distance\n0,2\n1,1\n");
    }
}
