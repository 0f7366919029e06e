//! Structural and semantic class encodings and their six combinations.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::MonolithGraph;
use crate::lexicon::{self, TermBag};
use crate::matrix::{norm, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StructuralEncoding {
    /// Total incoming and outgoing call frequency.
    InOut,
    /// Undirected call frequency to every other class.
    CallFrequency,
    /// Calls from classes invoking both members of a pair.
    CoDependent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SemanticEncoding {
    BagOfWords,
    TfIdf,
}

/// One of the six structural x semantic combinations, numbered 1 to 6.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Configuration(u8);

impl Configuration {
    pub const DEFAULT: Configuration = Configuration(6);

    pub fn new(id: u8) -> Result<Self> {
        if (1..=6).contains(&id) {
            Ok(Configuration(id))
        } else {
            Err(Error::InvalidParams(format!("configuration must be 1-6, got {id}")))
        }
    }

    pub fn all() -> impl Iterator<Item = Configuration> {
        (1..=6).map(Configuration)
    }

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn structural(self) -> StructuralEncoding {
        match self.0 {
            1 | 2 => StructuralEncoding::InOut,
            3 | 4 => StructuralEncoding::CallFrequency,
            _ => StructuralEncoding::CoDependent,
        }
    }

    pub fn semantic(self) -> SemanticEncoding {
        if self.0 % 2 == 1 {
            SemanticEncoding::BagOfWords
        } else {
            SemanticEncoding::TfIdf
        }
    }
}

impl Default for Configuration {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl TryFrom<u8> for Configuration {
    type Error = Error;
    fn try_from(id: u8) -> Result<Self> {
        Configuration::new(id)
    }
}

impl From<Configuration> for u8 {
    fn from(c: Configuration) -> u8 {
        c.0
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Per-class feature rows: a unit-normalized structural block followed by
/// a unit-normalized semantic block.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Matrix,
    pub config: Configuration,
    /// First semantic column.
    pub block_split: usize,
    pub labels: Vec<String>,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.rows() == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.rows.row(i)
    }

    pub fn structural_row(&self, i: usize) -> &[f64] {
        &self.rows.row(i)[..self.block_split]
    }

    /// Classes whose whole feature row is zero.
    pub fn zero_rows(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.row(i).iter().all(|&x| x == 0.0))
            .collect()
    }

    /// CSV with a `class` column followed by one column per feature label.
    pub fn write_csv<W: Write>(&self, graph: &MonolithGraph, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["class".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for i in 0..self.len() {
            let mut rec = vec![graph.class(i).id.clone()];
            rec.extend(self.row(i).iter().map(|x| x.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("<feature csv>", e))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Malformed(e.to_string())
}

/// `[incoming, outgoing]` call totals per class.
pub fn structural_inout(graph: &MonolithGraph) -> Matrix {
    let inc = graph.incoming_totals();
    let out = graph.outgoing_totals();
    Matrix::from_rows_with_cols(
        inc.iter()
            .zip(&out)
            .map(|(&i, &o)| vec![i as f64, o as f64])
            .collect(),
        2,
    )
}

/// Symmetric `call(i->j) + call(j->i)` with a zero diagonal.
pub fn structural_freq(graph: &MonolithGraph) -> Matrix {
    let n = graph.len();
    let mut m = Matrix::zeros(n, n);
    for e in graph.edges() {
        let v = m.get(e.caller, e.callee) + e.frequency as f64;
        m.set(e.caller, e.callee, v);
        m.set(e.callee, e.caller, v);
    }
    m
}

/// Sum of calls into `target` from classes that call both `target` and `other`.
pub fn codependent_one_sided(calls: &[Vec<u64>], target: usize, other: usize) -> u64 {
    calls
        .iter()
        .filter(|row| row[target] > 0 && row[other] > 0)
        .map(|row| row[target])
        .sum()
}

/// Symmetric co-dependency matrix: `one_sided(i, j) + one_sided(j, i)`.
pub fn structural_codep(graph: &MonolithGraph) -> Matrix {
    let calls = graph.call_matrix();
    let n = graph.len();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = (codependent_one_sided(&calls, i, j) + codependent_one_sided(&calls, j, i)) as f64;
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    m
}

fn unit_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let n = norm(row);
        if n > 0.0 {
            row.iter_mut().for_each(|x| *x /= n);
        }
    }
    out
}

/// Unit-normalizes each block row-wise and concatenates them.
pub fn combine(structural: &Matrix, semantic: &Matrix, config: Configuration) -> Result<FeatureMatrix> {
    if structural.rows() != semantic.rows() {
        return Err(Error::DimensionMismatch(format!(
            "structural block has {} rows, semantic block {}",
            structural.rows(),
            semantic.rows()
        )));
    }
    let s = unit_rows(structural);
    let t = unit_rows(semantic);
    let rows = (0..s.rows())
        .map(|i| s.row(i).iter().chain(t.row(i)).copied().collect())
        .collect();
    let block_split = structural.cols();
    let labels = (0..block_split)
        .map(|c| format!("s{c}"))
        .chain((0..semantic.cols()).map(|c| format!("t{c}")))
        .collect();
    let rows = Matrix::from_rows_with_cols(rows, block_split + semantic.cols());
    if rows.iter_rows().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParams("non-finite feature value".into()));
    }
    Ok(FeatureMatrix {
        rows,
        config,
        block_split,
        labels,
    })
}

/// Builds the full feature matrix for one configuration.
///
/// `bags` are the normalized term bags, indexed like the graph's classes.
/// When no class has any term the semantic block has zero columns.
pub fn encode(graph: &MonolithGraph, bags: &[TermBag], config: Configuration) -> Result<FeatureMatrix> {
    if bags.len() != graph.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} term bags for {} classes",
            bags.len(),
            graph.len()
        )));
    }
    let (structural, s_labels): (Matrix, Vec<String>) = match config.structural() {
        StructuralEncoding::InOut => (
            structural_inout(graph),
            vec!["call_in".into(), "call_out".into()],
        ),
        StructuralEncoding::CallFrequency => (structural_freq(graph), class_labels(graph, "freq")),
        StructuralEncoding::CoDependent => (structural_codep(graph), class_labels(graph, "codep")),
    };
    let (semantic, t_labels) = match lexicon::build_vocabulary(bags) {
        Ok(vocab) => {
            let m = match config.semantic() {
                SemanticEncoding::BagOfWords => lexicon::bow_matrix(bags, &vocab),
                SemanticEncoding::TfIdf => lexicon::tfidf_matrix(bags, &vocab)?,
            };
            let labels = vocab.terms().iter().map(|t| format!("term:{t}")).collect();
            (m, labels)
        }
        Err(Error::EmptyVocabulary) => {
            log::warn!("no class has any term; semantic block is empty");
            (Matrix::zeros(graph.len(), 0), Vec::new())
        }
        Err(e) => return Err(e),
    };
    let mut fm = combine(&structural, &semantic, config)?;
    fm.labels = s_labels.into_iter().chain(t_labels).collect();
    let zero = fm.zero_rows();
    if !zero.is_empty() {
        log::warn!("{} class(es) have an all-zero feature row", zero.len());
    }
    Ok(fm)
}

fn class_labels(graph: &MonolithGraph, prefix: &str) -> Vec<String> {
    graph
        .classes()
        .iter()
        .map(|c| format!("{prefix}:{}", c.id))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{ClassNode, RawEdge};

    /// A<-B:5, A<-C:3, A<-D:1, B<-C:2, B<-D:1
    fn codep_fixture() -> MonolithGraph {
        let classes = ["A", "B", "C", "D"].map(ClassNode::new).to_vec();
        let edges = [("B", "A", 5), ("C", "A", 3), ("D", "A", 1), ("C", "B", 2), ("D", "B", 1)]
            .map(|(a, b, f)| RawEdge::new(a, b, f));
        MonolithGraph::build(classes, edges).unwrap().0
    }

    #[test]
    fn inout_rows() {
        let m = structural_inout(&codep_fixture());
        assert_eq!(m.row(0), [9.0, 0.0]);
        assert_eq!(m.row(2), [0.0, 5.0]);
        let (lonely, _) = MonolithGraph::build(vec![ClassNode::new("X")], []).unwrap();
        assert_eq!(structural_inout(&lonely).row(0), [0.0, 0.0]);
    }

    #[test]
    fn freq_matrix() {
        let m = structural_freq(&codep_fixture());
        assert_eq!(m.get(0, 1), 5.0);
        assert_eq!(m.get(1, 0), 5.0);
        assert_eq!(m.get(0, 0), 0.0);
        let (g, _) = MonolithGraph::build(vec![ClassNode::new("X"), ClassNode::new("Y")], []).unwrap();
        assert!(structural_freq(&g).iter_rows().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn codependent_values() {
        let g = codep_fixture();
        let calls = g.call_matrix();
        assert_eq!(codependent_one_sided(&calls, 0, 1), 4);
        assert_eq!(codependent_one_sided(&calls, 1, 0), 3);
        let m = structural_codep(&g);
        assert_eq!(m.get(0, 1), 7.0);
        assert_eq!(m.get(1, 0), 7.0);
        // C and D share no caller
        assert_eq!(m.get(2, 3), 0.0);
        assert!(m.is_symmetric(0.0));
    }

    #[test]
    fn combine_normalizes_blocks() {
        let s = Matrix::from_rows(vec![vec![3.0, 4.0], vec![0.0, 0.0]]);
        let t = Matrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
        let fm = combine(&s, &t, Configuration::DEFAULT).unwrap();
        assert_eq!(fm.row(0), [0.6, 0.8, 1.0, 0.0]);
        assert_eq!(fm.zero_rows(), vec![1]);
        assert_eq!(fm.block_split, 2);
    }

    #[test]
    fn combine_rejects_row_mismatch() {
        let s = Matrix::zeros(2, 2);
        let t = Matrix::zeros(3, 1);
        assert!(matches!(combine(&s, &t, Configuration::DEFAULT), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn configuration_six_layout() {
        let g = codep_fixture();
        let bags: Vec<TermBag> = ["acct", "acct", "trade", "quot"]
            .iter()
            .map(|t| [(*t, 1u64)].into_iter().collect())
            .collect();
        let fm = encode(&g, &bags, Configuration::new(6).unwrap()).unwrap();
        assert_eq!(fm.len(), 4);
        assert_eq!(fm.block_split, 4);
        assert_eq!(fm.labels.len(), fm.rows.cols());
    }

    #[test]
    fn configuration_ids() {
        assert!(Configuration::new(0).is_err());
        assert!(Configuration::new(7).is_err());
        let c = Configuration::new(3).unwrap();
        assert_eq!(c.structural(), StructuralEncoding::CallFrequency);
        assert_eq!(c.semantic(), SemanticEncoding::BagOfWords);
        assert_eq!(Configuration::all().count(), 6);
    }
}
