//! Adapted boosted mean shift clustering.
//!
//! Classes are dealt over a `width x height` grid. Every round runs Mean
//! Shift inside each cell to produce intermediate modes (iModes), scores
//! each class against its iMode, resamples cells from their linear-5
//! neighbourhood weighted by those scores, and clusters the iModes with
//! DBSCAN over `1 - similarity`. Rounds stop once the DBSCAN cluster count
//! has been equal for `stability_target` consecutive rounds. Each class
//! then joins the cluster of its most similar final iMode.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{self, DbscanParams, MeanShiftParams, NOISE};
use crate::encode::FeatureMatrix;
use crate::error::{Error, Result};
use crate::ingest::MonolithGraph;
use crate::lexicon::{self, TermBag, Vocabulary};
use crate::matrix::{cosine, Matrix};
use crate::metrics::Decomposition;
use crate::simfuncs::{SimilarityIndex, SimilarityWeights};

/// Intermediate mode: the classes of one cell that converged together.
#[derive(Debug, Clone, PartialEq)]
pub struct IMode {
    /// Sorted class indices.
    pub members: Vec<usize>,
    /// Sum of the members' structural feature rows.
    pub structural: Vec<f64>,
    /// Sum of the members' term counts.
    pub term_freq: TermBag,
}

impl IMode {
    pub fn from_members(mut members: Vec<usize>, structural: Vec<f64>, term_freq: TermBag) -> Self {
        members.sort_unstable();
        IMode {
            members,
            structural,
            term_freq,
        }
    }

    /// Aggregates the given classes.
    pub fn aggregate(members: Vec<usize>, features: &FeatureMatrix, bags: &[TermBag]) -> Self {
        let mut structural = vec![0.0; features.block_split];
        let mut term_freq = TermBag::new();
        for &c in &members {
            for (s, v) in structural.iter_mut().zip(features.structural_row(c)) {
                *s += v;
            }
            term_freq.merge(&bags[c]);
        }
        IMode::from_members(members, structural, term_freq)
    }
}

/// Which cells a cell draws from when resampling.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Neighborhood {
    /// The cell itself and its north, south, east and west neighbours,
    /// wrapping around the grid edges.
    #[default]
    Linear5,
}

impl Neighborhood {
    /// Distinct cell indices in the neighbourhood of `cell`, itself first.
    pub fn cells(self, cell: usize, width: usize, height: usize) -> Vec<usize> {
        let (r, c) = (cell / width, cell % width);
        let at = |r: usize, c: usize| r * width + c;
        let candidates = match self {
            Neighborhood::Linear5 => [
                cell,
                at((r + height - 1) % height, c),
                at((r + 1) % height, c),
                at(r, (c + 1) % width),
                at(r, (c + width - 1) % width),
            ],
        };
        let mut out = Vec::with_capacity(5);
        for x in candidates {
            if !out.contains(&x) {
                out.push(x);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    /// Row-major cells of class indices.
    pub cells: Vec<Vec<usize>>,
    pub neighborhood: Neighborhood,
}

impl Grid {
    pub fn total_size(&self) -> usize {
        self.cells.iter().map(Vec::len).sum()
    }
}

fn stream(seed: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&a.to_le_bytes());
    key[16..24].copy_from_slice(&b.to_le_bytes());
    key[24..].copy_from_slice(b"bmscgrid");
    ChaCha8Rng::from_seed(key)
}

/// Shuffles `ids` with `seed` and deals them round-robin into the cells.
pub fn init_grid(ids: &[usize], width: usize, height: usize, seed: u64) -> Result<Grid> {
    let cells_n = width * height;
    if cells_n == 0 {
        return Err(Error::InvalidParams("grid must have at least one cell".into()));
    }
    if ids.len() < cells_n {
        log::warn!("{} classes for {cells_n} cells; some cells start empty", ids.len());
    }
    let mut order = ids.to_vec();
    let mut rng = stream(seed, u64::MAX, 0);
    // Fisher-Yates
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let mut cells = vec![Vec::new(); cells_n];
    for (k, id) in order.into_iter().enumerate() {
        cells[k % cells_n].push(id);
    }
    Ok(Grid {
        width,
        height,
        cells,
        neighborhood: Neighborhood::Linear5,
    })
}

/// Mean Shift inside one cell; one iMode per mode.
///
/// The bandwidth is estimated from the cell's own rows and multiplied by
/// `bandwidth_scale`. A single class, or a cell of identical rows, is one
/// iMode.
pub fn cell_modes(
    cell: &[usize],
    features: &FeatureMatrix,
    bags: &[TermBag],
    quantile: f64,
    bandwidth_scale: f64,
) -> Result<Vec<IMode>> {
    if cell.is_empty() {
        return Ok(Vec::new());
    }
    let rows = features.rows.select_rows(cell);
    let bandwidth = match cluster::estimate_bandwidth(&rows, quantile) {
        Ok(b) => b * bandwidth_scale,
        Err(Error::TooFewPoints { .. } | Error::AllPointsIdentical) => {
            return Ok(vec![IMode::aggregate(cell.to_vec(), features, bags)]);
        }
        Err(e) => return Err(e),
    };
    let result = cluster::mean_shift(&rows, &MeanShiftParams::new(bandwidth)?)?;
    Ok((0..result.modes.len())
        .map(|m| {
            let members = result.members(m).into_iter().map(|i| cell[i]).collect();
            IMode::aggregate(members, features, bags)
        })
        .collect())
}

/// Cosine between a class's TF-IDF vector and its iMode's aggregated term
/// vector, both weighted by the class-corpus IDF.
pub fn confidence(class: usize, imode: &IMode, bags: &[TermBag], vocab: Option<&Vocabulary>) -> f64 {
    let Some(vocab) = vocab else {
        return 0.0;
    };
    cosine(&vocab.tfidf_vector(&bags[class]), &vocab.tfidf_vector(&imode.term_freq)).max(0.0)
}

/// Redraws every cell from its neighbourhood pool.
///
/// `confidences[j][k]` belongs to `grid.cells[j][k]`. A class seen in
/// several pooled cells keeps its highest confidence. Each cell draws its
/// current size without replacement with weights `confidence + floor_weight`.
/// All cells are drawn from the old grid.
///
/// Independent draws can lose a class from every cell. Each lost class is
/// then put back in place of a class drawn more than once, searching the
/// lost class's old neighbourhood first and replacing the lowest-weight
/// surplus copy, so every class stays on the grid.
pub fn resample(grid: &Grid, confidences: &[Vec<f64>], floor_weight: f64, seed: u64) -> Result<Grid> {
    if confidences.len() != grid.cells.len()
        || confidences.iter().zip(&grid.cells).any(|(c, cell)| c.len() != cell.len())
    {
        return Err(Error::DimensionMismatch("confidences do not match the grid".into()));
    }
    let mut weight_of: BTreeMap<usize, f64> = BTreeMap::new();
    let mut home: BTreeMap<usize, usize> = BTreeMap::new();
    for (j, (cell, conf)) in grid.cells.iter().zip(confidences).enumerate() {
        for (&c, &w) in cell.iter().zip(conf) {
            let e = weight_of.entry(c).or_insert(w);
            *e = e.max(w);
            home.entry(c).or_insert(j);
        }
    }
    let mut cells: Vec<Vec<usize>> = (0..grid.cells.len())
        .map(|j| {
            let mut pool: Vec<(usize, f64)> = Vec::new();
            for nb in grid.neighborhood.cells(j, grid.width, grid.height) {
                for (&class, &conf) in grid.cells[nb].iter().zip(&confidences[nb]) {
                    match pool.iter_mut().find(|(c, _)| *c == class) {
                        Some(slot) => slot.1 = slot.1.max(conf),
                        None => pool.push((class, conf)),
                    }
                }
            }
            pool.sort_by_key(|&(c, _)| c);
            let target = grid.cells[j].len();
            if pool.len() < target {
                log::warn!("cell {j}: pool of {} below target {target}", pool.len());
            }
            let weights: Vec<f64> = pool.iter().map(|&(_, w)| w + floor_weight).collect();
            let mut rng = stream(seed, j as u64, 1);
            weighted_sample(&weights, target, &mut rng)
                .into_iter()
                .map(|k| pool[k].0)
                .collect()
        })
        .collect();
    restore_coverage(&mut cells, grid, &home, &weight_of);
    Ok(Grid {
        cells,
        ..grid.clone()
    })
}

fn restore_coverage(
    cells: &mut [Vec<usize>],
    grid: &Grid,
    home: &BTreeMap<usize, usize>,
    weight_of: &BTreeMap<usize, f64>,
) {
    let mut count: BTreeMap<usize, usize> = BTreeMap::new();
    for &c in cells.iter().flatten() {
        *count.entry(c).or_insert(0) += 1;
    }
    for (&lost, &was) in home {
        if count.contains_key(&lost) {
            continue;
        }
        let near = grid.neighborhood.cells(was, grid.width, grid.height);
        let order = near.iter().copied().chain((0..cells.len()).filter(|j| !near.contains(j)));
        let mut slot = None;
        for j in order {
            let surplus = cells[j]
                .iter()
                .enumerate()
                .filter(|(_, c)| count[c] > 1)
                .min_by(|a, b| weight_of[a.1].total_cmp(&weight_of[b.1]).then(b.1.cmp(a.1)));
            if let Some((k, _)) = surplus {
                slot = Some((j, k));
                break;
            }
        }
        let Some((j, k)) = slot else {
            // fewer slots than classes; only possible on a grid that did not cover them
            break;
        };
        let old = std::mem::replace(&mut cells[j][k], lost);
        *count.get_mut(&old).expect("counted") -= 1;
        count.insert(lost, 1);
    }
}

/// Sequential weighted draws without replacement; returns indices.
pub fn weighted_sample<R: Rng>(weights: &[f64], count: usize, rng: &mut R) -> Vec<usize> {
    let mut left: Vec<usize> = (0..weights.len()).collect();
    let mut out = Vec::with_capacity(count.min(weights.len()));
    while out.len() < count && !left.is_empty() {
        let total: f64 = left.iter().map(|&i| weights[i]).sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut chosen = left.len() - 1;
            for (k, &i) in left.iter().enumerate() {
                r -= weights[i];
                if r < 0.0 {
                    chosen = k;
                    break;
                }
            }
            chosen
        } else {
            rng.gen_range(0..left.len())
        };
        out.push(left.remove(pick));
    }
    out
}

/// Pairwise `1 - MS` between iModes, zero diagonal.
pub fn imode_distance_matrix(imodes: &[IMode], graph: &MonolithGraph, weights: SimilarityWeights) -> Matrix {
    to_distance(&SimilarityIndex::new(imodes, graph, weights).matrix().0)
}

fn to_distance(sim: &Matrix) -> Matrix {
    let n = sim.rows();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                d.set(i, j, (1.0 - sim.get(i, j)).clamp(0.0, 1.0));
            }
        }
    }
    d
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BmscParams {
    pub width: usize,
    pub height: usize,
    /// DBSCAN radius on iMode distance; `None` picks it from the k-distance
    /// curve of each round with `k = min_pts`.
    pub eps: Option<f64>,
    pub min_pts: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Neighbour-rank quantile for per-cell bandwidth estimation.
    pub quantile: f64,
    /// Multiplier applied to every estimated cell bandwidth.
    pub bandwidth_scale: f64,
    pub stability_target: usize,
    pub max_iterations: usize,
    pub floor_weight: f64,
    pub seed: u64,
}

impl Default for BmscParams {
    fn default() -> Self {
        BmscParams {
            width: 3,
            height: 3,
            eps: None,
            min_pts: 1,
            alpha: 0.5,
            beta: 0.5,
            quantile: 0.3,
            bandwidth_scale: 1.0,
            stability_target: 3,
            max_iterations: 50,
            floor_weight: 0.01,
            seed: 42,
        }
    }
}

impl BmscParams {
    pub fn weights(&self) -> Result<SimilarityWeights> {
        SimilarityWeights::new(self.alpha, self.beta)
    }

    pub fn validate(&self) -> Result<()> {
        self.weights()?;
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParams("grid dimensions must be positive".into()));
        }
        if let Some(eps) = self.eps {
            DbscanParams::new(eps, self.min_pts)?;
        } else if self.min_pts == 0 {
            return Err(Error::InvalidParams("min_pts must be >= 1".into()));
        }
        if !(self.quantile > 0.0 && self.quantile <= 1.0) {
            return Err(Error::InvalidParams(format!("quantile must be in (0, 1], got {}", self.quantile)));
        }
        if !self.bandwidth_scale.is_finite() || self.bandwidth_scale <= 0.0 {
            return Err(Error::InvalidParams("bandwidth_scale must be positive".into()));
        }
        if self.stability_target == 0 || self.max_iterations == 0 {
            return Err(Error::InvalidParams(
                "stability_target and max_iterations must be positive".into(),
            ));
        }
        if self.floor_weight.is_nan() || self.floor_weight < 0.0 {
            return Err(Error::InvalidParams("floor_weight must be >= 0".into()));
        }
        Ok(())
    }
}

/// One line of the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub imodes: usize,
    pub clusters: usize,
    pub noise: usize,
    pub eps: f64,
    pub stability: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BmscOutcome {
    pub decomposition: Decomposition,
    pub log: Vec<IterationRecord>,
    /// False when `max_iterations` was reached first.
    pub converged: bool,
    /// Structural similarities clamped to 1 over the whole run.
    pub clamped: usize,
    pub final_imodes: Vec<IMode>,
    /// Cluster of each final iMode, noise already split into singletons.
    pub imode_clusters: Vec<usize>,
}

impl BmscOutcome {
    /// The run log as JSON lines.
    pub fn log_jsonl(&self) -> String {
        let mut s = String::new();
        for r in &self.log {
            s.push_str(&serde_json::to_string(r).expect("records serialize"));
            s.push('\n');
        }
        s
    }
}

fn dbscan_round(d: &Matrix, eps: Option<f64>, min_pts: usize) -> Result<(cluster::ClusterLabels, f64)> {
    let eps = match eps {
        Some(e) => e,
        None if d.rows() > min_pts => cluster::suggest_eps(d, min_pts)?.eps,
        None => 0.0,
    };
    Ok((cluster::dbscan_dist(d, &DbscanParams::new(eps, min_pts)?)?, eps))
}

/// Runs the full clustering loop and assigns every class to a microservice.
///
/// `bags` are the normalized term bags of the classes.
pub fn decompose(
    graph: &MonolithGraph,
    features: &FeatureMatrix,
    bags: &[TermBag],
    params: &BmscParams,
) -> Result<BmscOutcome> {
    params.validate()?;
    let n = graph.len();
    if features.len() != n || bags.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} classes, {} feature rows, {} term bags",
            features.len(),
            bags.len()
        )));
    }
    let weights = params.weights()?;
    let class_vocab = lexicon::build_vocabulary(bags).ok();
    let ids: Vec<usize> = (0..n).collect();
    let mut grid = init_grid(&ids, params.width, params.height, params.seed)?;

    let mut log = Vec::new();
    let mut stability = 0usize;
    let mut last_count: Option<usize> = None;
    let mut converged = false;
    let mut clamped = 0;
    let mut last: Option<(Vec<IMode>, Vec<usize>)> = None;

    for iteration in 0..params.max_iterations {
        let per_cell: Vec<Vec<IMode>> = grid
            .cells
            .par_iter()
            .map(|cell| cell_modes(cell, features, bags, params.quantile, params.bandwidth_scale))
            .collect::<Result<_>>()?;

        let confidences: Vec<Vec<f64>> = grid
            .cells
            .iter()
            .zip(&per_cell)
            .map(|(cell, modes)| {
                cell.iter()
                    .map(|&c| {
                        let m = modes
                            .iter()
                            .find(|m| m.members.binary_search(&c).is_ok())
                            .expect("iModes partition their cell");
                        confidence(c, m, bags, class_vocab.as_ref())
                    })
                    .collect()
            })
            .collect();

        let imodes: Vec<IMode> = per_cell.into_iter().flatten().collect();
        let index = SimilarityIndex::new(&imodes, graph, weights);
        let (sim, c) = index.matrix();
        clamped += c;
        let dist = to_distance(&sim);
        let (labels, eps) = dbscan_round(&dist, params.eps, params.min_pts)?;

        stability = if last_count == Some(labels.k) { stability + 1 } else { 1 };
        last_count = Some(labels.k);
        log.push(IterationRecord {
            iteration,
            imodes: imodes.len(),
            clusters: labels.k,
            noise: labels.noise_count(),
            eps,
            stability,
        });
        last = Some((imodes, split_noise(&labels.labels, labels.k)));
        if stability >= params.stability_target {
            converged = true;
            break;
        }
        grid = resample(
            &grid,
            &confidences,
            params.floor_weight,
            params.seed.wrapping_add(1 + iteration as u64),
        )?;
    }
    if !converged {
        log::warn!(
            "cluster count did not stabilise within {} iterations",
            params.max_iterations
        );
    }

    let (final_imodes, imode_clusters) = last.expect("at least one iteration runs");
    let index = SimilarityIndex::new(&final_imodes, graph, weights);
    let cluster_count = imode_clusters.iter().max().map_or(0, |m| m + 1);
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); cluster_count];
    for (c, bag) in bags.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..final_imodes.len() {
            let s = index.class_to_imode(c, bag, j);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((j, s));
            }
        }
        match best {
            Some((j, s)) if s > 0.0 => groups[imode_clusters[j]].push(c),
            _ => groups.push(vec![c]),
        }
    }

    Ok(BmscOutcome {
        decomposition: Decomposition::from_groups(graph, groups),
        log,
        converged,
        clamped,
        final_imodes,
        imode_clusters,
    })
}

/// Gives each noise point its own cluster id after the regular ones.
fn split_noise(labels: &[i64], k: usize) -> Vec<usize> {
    let mut next = k;
    labels
        .iter()
        .map(|&l| {
            if l == NOISE {
                next += 1;
                next - 1
            } else {
                l as usize
            }
        })
        .collect()
}
