//! Decomposition quality metrics: structural modularity (SM), inter-call
//! percentage (ICP), interface number (IFN) and non-extreme distribution
//! (NED).

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::MonolithGraph;

/// Size range of a non-extreme microservice, inclusive.
pub const NON_EXTREME_RANGE: (usize, usize) = (5, 20);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Microservice {
    pub name: String,
    pub classes: Vec<String>,
}

/// Named, pairwise disjoint, non-empty sets of class ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decomposition {
    pub microservices: Vec<Microservice>,
}

impl Decomposition {
    /// Names groups `ms-1`, `ms-2`, ... after sorting them by their smallest
    /// class index. Empty groups are dropped.
    pub fn from_groups(graph: &MonolithGraph, groups: Vec<Vec<usize>>) -> Self {
        let mut groups: Vec<Vec<usize>> = groups
            .into_iter()
            .filter(|g| !g.is_empty())
            .map(|mut g| {
                g.sort_unstable();
                g.dedup();
                g
            })
            .collect();
        groups.sort();
        Decomposition {
            microservices: groups
                .into_iter()
                .enumerate()
                .map(|(i, g)| Microservice {
                    name: format!("ms-{}", i + 1),
                    classes: g.into_iter().map(|c| graph.class(c).id.clone()).collect(),
                })
                .collect(),
        }
    }

    pub fn from_named(groups: impl IntoIterator<Item = (String, Vec<String>)>) -> Self {
        Decomposition {
            microservices: groups
                .into_iter()
                .map(|(name, classes)| Microservice { name, classes })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.microservices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.microservices.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.microservices.iter().map(|m| m.classes.len()).collect()
    }

    /// Checks the set invariants without a graph: every set non-empty and
    /// no id listed twice.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for m in &self.microservices {
            if m.classes.is_empty() {
                return Err(Error::InvalidDecomposition(format!("`{}` is empty", m.name)));
            }
            for c in &m.classes {
                if !seen.insert(c.as_str()) {
                    return Err(Error::InvalidDecomposition(format!(
                        "class `{c}` appears more than once"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Resolves ids against the graph: a partition label per class
    /// (`None` for uncovered classes).
    pub fn labels(&self, graph: &MonolithGraph) -> Result<Vec<Option<usize>>> {
        self.validate()?;
        let mut labels = vec![None; graph.len()];
        for (k, m) in self.microservices.iter().enumerate() {
            for c in &m.classes {
                let i = graph.index_of(c).ok_or_else(|| Error::UnknownClass(c.clone()))?;
                labels[i] = Some(k);
            }
        }
        Ok(labels)
    }

    /// True when every graph class is in exactly one microservice.
    pub fn is_partition_of(&self, graph: &MonolithGraph) -> bool {
        self.labels(graph)
            .map(|l| l.iter().all(Option::is_some))
            .unwrap_or(false)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("decompositions always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let d: Decomposition =
            serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
        d.validate()?;
        Ok(d)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json();
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Intra- and inter-partition call volumes derived once per evaluation.
struct CallTally {
    sizes: Vec<usize>,
    /// `intra[k]`: calls between classes of partition `k`.
    intra: Vec<u64>,
    /// `inter[a][b]`, `a < b`: calls between partitions, both directions.
    inter: Vec<Vec<u64>>,
    /// Classes of each partition called from another partition.
    interfaces: Vec<usize>,
}

impl CallTally {
    fn new(decomp: &Decomposition, graph: &MonolithGraph) -> Result<Self> {
        let labels = decomp.labels(graph)?;
        let m = decomp.len();
        let mut intra = vec![0u64; m];
        let mut inter = vec![vec![0u64; m]; m];
        let mut is_interface = vec![false; graph.len()];
        for e in graph.edges() {
            let (Some(a), Some(b)) = (labels[e.caller], labels[e.callee]) else {
                continue;
            };
            if a == b {
                intra[a] += e.frequency;
            } else {
                inter[a.min(b)][a.max(b)] += e.frequency;
                is_interface[e.callee] = true;
            }
        }
        let mut interfaces = vec![0usize; m];
        for (c, &flag) in is_interface.iter().enumerate() {
            if flag {
                interfaces[labels[c].expect("interface classes are covered")] += 1;
            }
        }
        Ok(CallTally {
            sizes: decomp.sizes(),
            intra,
            inter,
            interfaces,
        })
    }

    fn scoh(&self) -> Vec<f64> {
        self.intra
            .iter()
            .zip(&self.sizes)
            .map(|(&mu, &m)| mu as f64 / (m * m) as f64)
            .collect()
    }

    fn inter_total(&self) -> u64 {
        self.inter.iter().flatten().sum()
    }

    fn intra_total(&self) -> u64 {
        self.intra.iter().sum()
    }
}

fn non_empty(decomp: &Decomposition) -> Result<()> {
    if decomp.is_empty() {
        return Err(Error::InvalidDecomposition("no microservices".into()));
    }
    Ok(())
}

fn sm_from(t: &CallTally) -> f64 {
    let m = t.sizes.len();
    let scoh = t.scoh();
    let cohesion = scoh.iter().sum::<f64>() / m as f64;
    if m == 1 {
        return cohesion;
    }
    let mut coupling = 0.0;
    for a in 0..m {
        for b in a + 1..m {
            coupling += t.inter[a][b] as f64 / (2 * t.sizes[a] * t.sizes[b]) as f64;
        }
    }
    let pairs = (m * (m - 1)) as f64 / 2.0;
    cohesion - coupling / pairs
}

/// Mean cohesion `mu_i / m_i^2` minus mean pairwise coupling
/// `gamma_ij / (2 m_i m_j)`. A single partition has no coupling term.
pub fn structural_modularity(decomp: &Decomposition, graph: &MonolithGraph) -> Result<f64> {
    non_empty(decomp)?;
    Ok(sm_from(&CallTally::new(decomp, graph)?))
}

/// Inter-partition call volume over all call volume between covered classes.
pub fn inter_call_percentage(decomp: &Decomposition, graph: &MonolithGraph) -> Result<f64> {
    let t = CallTally::new(decomp, graph)?;
    Ok(icp_from(&t))
}

fn icp_from(t: &CallTally) -> f64 {
    let inter = t.inter_total();
    let total = inter + t.intra_total();
    if total == 0 {
        0.0
    } else {
        inter as f64 / total as f64
    }
}

/// Mean number of classes per microservice invoked from another microservice.
pub fn interface_number(decomp: &Decomposition, graph: &MonolithGraph) -> Result<f64> {
    non_empty(decomp)?;
    let t = CallTally::new(decomp, graph)?;
    Ok(mean_usize(&t.interfaces))
}

fn mean_usize(v: &[usize]) -> f64 {
    v.iter().sum::<usize>() as f64 / v.len() as f64
}

/// Fraction of microservices whose size falls outside [5, 20].
pub fn non_extreme_distribution(decomp: &Decomposition) -> Result<f64> {
    non_empty(decomp)?;
    let (lo, hi) = NON_EXTREME_RANGE;
    let ok = decomp.sizes().iter().filter(|&&s| (lo..=hi).contains(&s)).count();
    Ok(1.0 - ok as f64 / decomp.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub sm: f64,
    pub icp: f64,
    pub ifn: f64,
    pub ned: f64,
    pub microservice_count: usize,
    pub largest_size: usize,
    pub scoh: Vec<f64>,
    pub ifn_per_microservice: Vec<usize>,
    /// Graph classes that no microservice contains.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub uncovered: Vec<String>,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "sm,icp,ifn,ned,count,largest";

    pub fn csv_fields(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.sm, self.icp, self.ifn, self.ned, self.microservice_count, self.largest_size
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

/// All four metrics plus counts in one pass.
pub fn summarize(decomp: &Decomposition, graph: &MonolithGraph) -> Result<MetricsReport> {
    non_empty(decomp)?;
    let labels = decomp.labels(graph)?;
    let t = CallTally::new(decomp, graph)?;
    let uncovered: Vec<String> = labels
        .iter()
        .enumerate()
        .filter(|(_, l)| l.is_none())
        .map(|(i, _)| graph.class(i).id.clone())
        .collect();
    if !uncovered.is_empty() {
        log::warn!("{} class(es) are not covered by the decomposition", uncovered.len());
    }
    Ok(MetricsReport {
        sm: sm_from(&t),
        icp: icp_from(&t),
        ifn: mean_usize(&t.interfaces),
        ned: non_extreme_distribution(decomp)?,
        microservice_count: decomp.len(),
        largest_size: decomp.sizes().into_iter().max().unwrap_or(0),
        scoh: t.scoh(),
        ifn_per_microservice: t.interfaces.clone(),
        uncovered,
    })
}
