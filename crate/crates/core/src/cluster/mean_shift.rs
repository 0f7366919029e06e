use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{euclidean, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanShiftParams {
    /// Radius of the flat kernel. A point `p` is in the window around `x`
    /// when `|p - x| < bandwidth`.
    pub bandwidth: f64,
    pub max_iters: usize,
    /// Convergence threshold as a fraction of the bandwidth.
    pub shift_tol: f64,
}

impl MeanShiftParams {
    pub fn new(bandwidth: f64) -> Result<Self> {
        let p = MeanShiftParams {
            bandwidth,
            max_iters: 300,
            shift_tol: 1e-3,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.bandwidth.is_finite() || self.bandwidth <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "bandwidth must be positive, got {}",
                self.bandwidth
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParams("max_iters must be positive".into()));
        }
        if !(self.shift_tol > 0.0 && self.shift_tol < 1.0) {
            return Err(Error::InvalidParams(format!(
                "shift_tol must be in (0, 1), got {}",
                self.shift_tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanShiftResult {
    /// Mean of the points assigned to each mode.
    pub modes: Vec<Vec<f64>>,
    /// Converged position that anchored each mode during merging.
    pub peaks: Vec<Vec<f64>>,
    /// Mode index of every input point.
    pub assignment: Vec<usize>,
    /// Window population at each peak.
    pub support: Vec<usize>,
    /// Largest number of shifts any seed needed.
    pub iterations: usize,
    /// Seeds that hit `max_iters` without converging.
    pub unconverged: usize,
}

impl MeanShiftResult {
    pub fn members(&self, mode: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == mode)
            .collect()
    }
}

fn window_mean(points: &Matrix, at: &[f64], bandwidth: f64, out: &mut [f64]) -> usize {
    out.iter_mut().for_each(|x| *x = 0.0);
    let mut count = 0;
    for p in points.iter_rows() {
        if euclidean(p, at) < bandwidth {
            count += 1;
            for (o, v) in out.iter_mut().zip(p) {
                *o += v;
            }
        }
    }
    if count > 0 {
        out.iter_mut().for_each(|x| *x /= count as f64);
    }
    count
}

/// Flat-kernel Mean Shift seeded at every point.
///
/// Each seed moves to the mean of the points in its window until the shift
/// drops below `shift_tol * bandwidth`. Converged positions are then visited
/// by decreasing support (ties by seed index); one within `bandwidth / 2`
/// of an already accepted peak joins it, otherwise it becomes a new peak.
pub fn mean_shift(points: &Matrix, params: &MeanShiftParams) -> Result<MeanShiftResult> {
    params.validate()?;
    let n = points.rows();
    if n == 0 {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    let dim = points.cols();
    let tol = params.shift_tol * params.bandwidth;

    let mut converged: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut iterations = 0;
    let mut unconverged = 0;
    let mut next = vec![0.0; dim];
    for seed in points.iter_rows() {
        let mut x = seed.to_vec();
        let mut steps = 0;
        loop {
            window_mean(points, &x, params.bandwidth, &mut next);
            if euclidean(&next, &x) < tol {
                break;
            }
            std::mem::swap(&mut x, &mut next);
            steps += 1;
            if steps >= params.max_iters {
                unconverged += 1;
                break;
            }
        }
        iterations = iterations.max(steps);
        converged.push(x);
    }
    if unconverged > 0 {
        log::warn!("{unconverged} mean shift seed(s) hit max_iters");
    }

    let support: Vec<usize> = converged
        .iter()
        .map(|c| {
            points
                .iter_rows()
                .filter(|p| euclidean(p, c) < params.bandwidth)
                .count()
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| support[b].cmp(&support[a]).then(a.cmp(&b)));

    let merge_radius = params.bandwidth / 2.0;
    let mut peaks: Vec<usize> = Vec::new();
    let mut assignment = vec![0usize; n];
    for &s in &order {
        match peaks
            .iter()
            .position(|&p| euclidean(&converged[p], &converged[s]) <= merge_radius)
        {
            Some(m) => assignment[s] = m,
            None => {
                assignment[s] = peaks.len();
                peaks.push(s);
            }
        }
    }

    let mut modes = vec![vec![0.0; dim]; peaks.len()];
    let mut counts = vec![0usize; peaks.len()];
    for (i, &m) in assignment.iter().enumerate() {
        counts[m] += 1;
        for (o, v) in modes[m].iter_mut().zip(points.row(i)) {
            *o += v;
        }
    }
    for (mode, &c) in modes.iter_mut().zip(&counts) {
        mode.iter_mut().for_each(|x| *x /= c as f64);
    }

    Ok(MeanShiftResult {
        modes,
        support: peaks.iter().map(|&p| support[p]).collect(),
        peaks: peaks.iter().map(|&p| converged[p].clone()).collect(),
        assignment,
        iterations,
        unconverged,
    })
}
