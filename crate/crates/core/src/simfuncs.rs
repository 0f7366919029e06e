//! Structural, semantic and combined similarity between iModes.

use serde::{Deserialize, Serialize};

use crate::bmsc::IMode;
use crate::error::{Error, Result};
use crate::ingest::MonolithGraph;
use crate::lexicon::{self, TermBag, Vocabulary};
use crate::matrix::{cosine, Matrix};

/// Weights of the structural and semantic terms; they sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl SimilarityWeights {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let w = SimilarityWeights { alpha, beta };
        w.validate()?;
        Ok(w)
    }

    /// `alpha` for the structural term, `1 - alpha` for the semantic one.
    pub fn from_alpha(alpha: f64) -> Result<Self> {
        Self::new(alpha, 1.0 - alpha)
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        if !in_unit(self.alpha) || !in_unit(self.beta) || (self.alpha + self.beta - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParams(format!(
                "alpha and beta must lie in [0, 1] and sum to 1, got {} and {}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

impl Default for SimilarityWeights {
    fn default() -> Self {
        SimilarityWeights { alpha: 0.5, beta: 0.5 }
    }
}

/// Call volume between two iModes and into each of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CallRollup {
    /// Frequency of edges with one end in each iMode, both directions.
    pub call_ij: u64,
    pub call_in_i: u64,
    pub call_in_j: u64,
}

fn mask(members: &[usize], n: usize) -> Vec<bool> {
    let mut m = vec![false; n];
    for &c in members {
        m[c] = true;
    }
    m
}

fn rollup_masks(graph: &MonolithGraph, a: &[bool], b: &[bool]) -> CallRollup {
    let mut r = CallRollup::default();
    for e in graph.edges() {
        let (s, t) = (e.caller, e.callee);
        if (a[s] && b[t]) || (b[s] && a[t]) {
            r.call_ij += e.frequency;
        }
        if a[t] {
            r.call_in_i += e.frequency;
        }
        if b[t] {
            r.call_in_j += e.frequency;
        }
    }
    r
}

/// Rolls class-level calls up to a pair of iModes.
///
/// Every edge is counted at most once in `call_ij`, so identical member
/// sets count each internal edge once.
pub fn rollup_calls(a: &IMode, b: &IMode, graph: &MonolithGraph) -> CallRollup {
    let n = graph.len();
    rollup_masks(graph, &mask(&a.members, n), &mask(&b.members, n))
}

/// Structural similarity value and whether it had to be clamped to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructuralSimilarity {
    pub value: f64,
    pub clamped: bool,
}

/// Piecewise call-ratio similarity. Both incoming totals zero gives 0.
pub fn sim_str_from_rollup(r: &CallRollup) -> StructuralSimilarity {
    let call = r.call_ij as f64;
    let raw = match (r.call_in_i, r.call_in_j) {
        (0, 0) => 0.0,
        (0, j) => call / j as f64,
        (i, 0) => call / i as f64,
        (i, j) => 0.5 * (call / j as f64 + call / i as f64),
    };
    StructuralSimilarity {
        value: raw.clamp(0.0, 1.0),
        clamped: raw > 1.0,
    }
}

pub fn sim_str(a: &IMode, b: &IMode, graph: &MonolithGraph) -> f64 {
    sim_str_from_rollup(&rollup_calls(a, b, graph)).value
}

/// Cosine of the TF-IDF vectors of two term bags under `vocab`.
pub fn sim_sem_bags(a: &TermBag, b: &TermBag, vocab: &Vocabulary) -> f64 {
    cosine(&vocab.tfidf_vector(a), &vocab.tfidf_vector(b)).max(0.0)
}

/// Semantic similarity of two iModes; `vocab` is the current iMode corpus.
pub fn sim_sem(a: &IMode, b: &IMode, vocab: &Vocabulary) -> f64 {
    sim_sem_bags(&a.term_freq, &b.term_freq, vocab)
}

/// `alpha * sim_str + beta * sim_sem`. Without a vocabulary the semantic
/// term is 0.
pub fn imode_similarity(
    a: &IMode,
    b: &IMode,
    weights: &SimilarityWeights,
    graph: &MonolithGraph,
    vocab: Option<&Vocabulary>,
) -> f64 {
    let s = sim_str(a, b, graph);
    let t = vocab.map_or(0.0, |v| sim_sem(a, b, v));
    weights.alpha * s + weights.beta * t
}

/// Vocabulary of the iModes' aggregated term bags, `None` when every bag is empty.
pub fn imode_vocabulary(imodes: &[IMode]) -> Option<Vocabulary> {
    let bags: Vec<TermBag> = imodes.iter().map(|m| m.term_freq.clone()).collect();
    lexicon::build_vocabulary(&bags).ok()
}

/// Precomputed membership masks and TF-IDF vectors for many similarity
/// queries against one set of iModes.
pub struct SimilarityIndex<'a> {
    graph: &'a MonolithGraph,
    weights: SimilarityWeights,
    vocab: Option<Vocabulary>,
    masks: Vec<Vec<bool>>,
    vectors: Vec<Vec<f64>>,
}

impl<'a> SimilarityIndex<'a> {
    pub fn new(imodes: &[IMode], graph: &'a MonolithGraph, weights: SimilarityWeights) -> Self {
        let vocab = imode_vocabulary(imodes);
        let masks = imodes.iter().map(|m| mask(&m.members, graph.len())).collect();
        let vectors = imodes
            .iter()
            .map(|m| vocab.as_ref().map_or_else(Vec::new, |v| v.tfidf_vector(&m.term_freq)))
            .collect();
        SimilarityIndex {
            graph,
            weights,
            vocab,
            masks,
            vectors,
        }
    }

    pub fn vocabulary(&self) -> Option<&Vocabulary> {
        self.vocab.as_ref()
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    /// Similarity between iModes `i` and `j`, and whether `sim_str` was clamped.
    pub fn pair(&self, i: usize, j: usize) -> (f64, bool) {
        let s = sim_str_from_rollup(&rollup_masks(self.graph, &self.masks[i], &self.masks[j]));
        let t = if self.vocab.is_some() {
            cosine(&self.vectors[i], &self.vectors[j]).max(0.0)
        } else {
            0.0
        };
        (self.weights.alpha * s.value + self.weights.beta * t, s.clamped)
    }

    /// Similarity between a single class, treated as a one-member iMode,
    /// and iMode `j`.
    pub fn class_to_imode(&self, class: usize, bag: &TermBag, j: usize) -> f64 {
        let mut single = vec![false; self.graph.len()];
        single[class] = true;
        let s = sim_str_from_rollup(&rollup_masks(self.graph, &single, &self.masks[j])).value;
        let t = self
            .vocab
            .as_ref()
            .map_or(0.0, |v| cosine(&v.tfidf_vector(bag), &self.vectors[j]).max(0.0));
        self.weights.alpha * s + self.weights.beta * t
    }

    /// Full symmetric similarity matrix with a unit diagonal, plus the
    /// number of clamped structural values.
    pub fn matrix(&self) -> (Matrix, usize) {
        let n = self.len();
        let mut m = Matrix::zeros(n, n);
        let mut clamped = 0;
        for i in 0..n {
            m.set(i, i, 1.0);
            for j in i + 1..n {
                let (v, c) = self.pair(i, j);
                clamped += usize::from(c);
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        (m, clamped)
    }
}
