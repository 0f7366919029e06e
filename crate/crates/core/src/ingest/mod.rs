//! Loading the monolith: classes, weighted call edges and raw term bags.
//!
//! Three entry points produce the same validated [`MonolithGraph`]: the
//! canonical JSON document ([`load_graph`]), a `caller,callee,count` CSV
//! export ([`import_dependency_csv`]) and a best-effort source scanner
//! ([`scan_sources`]).

mod csv_import;
mod format;
mod scan;

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::lexicon::TermBag;

pub use csv_import::{import_dependency_csv, CsvImport};
pub use format::{graph_from_json, graph_to_json, load_graph, save_graph, GraphDocument};
pub use scan::{scan_sources, AmbiguousCall, ScanOptions, ScanOutcome, ScanReport};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassNode {
    pub id: String,
    pub name: String,
    /// Raw, not yet normalized, token counts.
    pub terms: TermBag,
}

impl ClassNode {
    pub fn new(id: impl Into<String>) -> Self {
        let id = id.into();
        ClassNode {
            name: id.clone(),
            id,
            terms: TermBag::new(),
        }
    }

    pub fn with_terms(mut self, terms: TermBag) -> Self {
        self.terms = terms;
        self
    }
}

/// A directed call edge between two class indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CallEdge {
    pub caller: usize,
    pub callee: usize,
    pub frequency: u64,
}

/// An edge as it appears in input files, before validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawEdge {
    pub caller: String,
    pub callee: String,
    pub frequency: u64,
}

impl RawEdge {
    pub fn new(caller: impl Into<String>, callee: impl Into<String>, frequency: u64) -> Self {
        RawEdge {
            caller: caller.into(),
            callee: callee.into(),
            frequency,
        }
    }
}

/// What normalization did while building a graph.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadSummary {
    pub classes: usize,
    pub edges: usize,
    pub self_edges_dropped: usize,
    pub duplicates_merged: usize,
    pub total_frequency: u64,
}

/// The monolith: classes indexed `0..N` and merged, self-free call edges.
#[derive(Debug, Clone, PartialEq)]
pub struct MonolithGraph {
    classes: Vec<ClassNode>,
    edges: Vec<CallEdge>,
    index: HashMap<String, usize>,
}

impl MonolithGraph {
    /// Validates classes and edges. Self edges are dropped and repeated
    /// `(caller, callee)` pairs are merged by summing frequencies.
    pub fn build(
        classes: Vec<ClassNode>,
        edges: impl IntoIterator<Item = RawEdge>,
    ) -> Result<(Self, LoadSummary)> {
        if classes.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let mut index = HashMap::with_capacity(classes.len());
        for (i, class) in classes.iter().enumerate() {
            if class.id.is_empty() {
                return Err(Error::Malformed(format!("class #{i} has an empty id")));
            }
            if class.name.is_empty() {
                return Err(Error::Malformed(format!("class `{}` has an empty name", class.id)));
            }
            if index.insert(class.id.clone(), i).is_some() {
                return Err(Error::DuplicateClass(class.id.clone()));
            }
        }

        let mut summary = LoadSummary::default();
        let mut merged: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        for edge in edges {
            let caller = *index
                .get(&edge.caller)
                .ok_or_else(|| Error::UnknownClass(edge.caller.clone()))?;
            let callee = *index
                .get(&edge.callee)
                .ok_or_else(|| Error::UnknownClass(edge.callee.clone()))?;
            if edge.frequency == 0 {
                return Err(Error::Malformed(format!(
                    "edge {} -> {} has frequency 0",
                    edge.caller, edge.callee
                )));
            }
            if caller == callee {
                summary.self_edges_dropped += 1;
                continue;
            }
            let slot = merged.entry((caller, callee)).or_insert(0);
            if *slot > 0 {
                summary.duplicates_merged += 1;
            }
            *slot += edge.frequency;
        }
        if summary.self_edges_dropped > 0 {
            log::warn!("dropped {} self edge(s)", summary.self_edges_dropped);
        }

        let edges: Vec<CallEdge> = merged
            .into_iter()
            .map(|((caller, callee), frequency)| CallEdge {
                caller,
                callee,
                frequency,
            })
            .collect();
        summary.classes = classes.len();
        summary.edges = edges.len();
        summary.total_frequency = edges.iter().map(|e| e.frequency).sum();
        Ok((
            MonolithGraph {
                classes,
                edges,
                index,
            },
            summary,
        ))
    }

    /// Number of classes, `N`.
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    /// Always false for a validated graph.
    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[ClassNode] {
        &self.classes
    }

    pub fn class(&self, index: usize) -> &ClassNode {
        &self.classes[index]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Edges sorted by `(caller, callee)`.
    pub fn edges(&self) -> &[CallEdge] {
        &self.edges
    }

    pub fn total_frequency(&self) -> u64 {
        self.edges.iter().map(|e| e.frequency).sum()
    }

    /// Frequency of `caller -> callee`, 0 when absent.
    pub fn call(&self, caller: usize, callee: usize) -> u64 {
        self.edges
            .binary_search_by(|e| (e.caller, e.callee).cmp(&(caller, callee)))
            .map(|i| self.edges[i].frequency)
            .unwrap_or(0)
    }

    /// Dense `N x N` matrix of directed call frequencies.
    pub fn call_matrix(&self) -> Vec<Vec<u64>> {
        let n = self.len();
        let mut m = vec![vec![0u64; n]; n];
        for e in &self.edges {
            m[e.caller][e.callee] = e.frequency;
        }
        m
    }

    pub fn incoming_totals(&self) -> Vec<u64> {
        let mut v = vec![0; self.len()];
        for e in &self.edges {
            v[e.callee] += e.frequency;
        }
        v
    }

    pub fn outgoing_totals(&self) -> Vec<u64> {
        let mut v = vec![0; self.len()];
        for e in &self.edges {
            v[e.caller] += e.frequency;
        }
        v
    }

    /// Edges expressed with class ids, in edge order.
    pub fn raw_edges(&self) -> Vec<RawEdge> {
        self.edges
            .iter()
            .map(|e| {
                RawEdge::new(
                    self.classes[e.caller].id.clone(),
                    self.classes[e.callee].id.clone(),
                    e.frequency,
                )
            })
            .collect()
    }

    /// Returns a copy with every frequency multiplied by `factor`.
    pub fn scaled(&self, factor: u64) -> MonolithGraph {
        let mut g = self.clone();
        for e in &mut g.edges {
            e.frequency *= factor;
        }
        g
    }
}
