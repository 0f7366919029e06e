use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassNode, LoadSummary, MonolithGraph, RawEdge};
use crate::error::{Error, Result};
use crate::lexicon::TermBag;

/// On-disk shape of the canonical graph document.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub classes: Vec<ClassRecord>,
    #[serde(default)]
    pub edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub terms: TermBag,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub caller: String,
    pub callee: String,
    pub frequency: i64,
}

impl GraphDocument {
    pub fn into_graph(self) -> Result<(MonolithGraph, LoadSummary)> {
        let classes = self
            .classes
            .into_iter()
            .map(|c| ClassNode {
                name: c.name.unwrap_or_else(|| c.id.clone()),
                id: c.id,
                terms: c.terms,
            })
            .collect();
        let mut edges = Vec::with_capacity(self.edges.len());
        for e in self.edges {
            if e.frequency < 1 {
                return Err(Error::Malformed(format!(
                    "edge {} -> {} has frequency {}",
                    e.caller, e.callee, e.frequency
                )));
            }
            edges.push(RawEdge::new(e.caller, e.callee, e.frequency as u64));
        }
        MonolithGraph::build(classes, edges)
    }

    pub fn from_graph(graph: &MonolithGraph) -> Self {
        GraphDocument {
            classes: graph
                .classes()
                .iter()
                .map(|c| ClassRecord {
                    id: c.id.clone(),
                    name: (c.name != c.id).then(|| c.name.clone()),
                    terms: c.terms.clone(),
                })
                .collect(),
            edges: graph
                .raw_edges()
                .into_iter()
                .map(|e| EdgeRecord {
                    caller: e.caller,
                    callee: e.callee,
                    frequency: e.frequency as i64,
                })
                .collect(),
        }
    }
}

pub fn graph_from_json(text: &str) -> Result<(MonolithGraph, LoadSummary)> {
    let doc: GraphDocument =
        serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
    doc.into_graph()
}

pub fn graph_to_json(graph: &MonolithGraph) -> String {
    serde_json::to_string_pretty(&GraphDocument::from_graph(graph))
        .expect("graph documents always serialize")
}

/// Reads and validates a canonical graph document.
pub fn load_graph(path: &Path) -> Result<(MonolithGraph, LoadSummary)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    graph_from_json(&text)
}

pub fn save_graph(graph: &MonolithGraph, path: &Path) -> Result<()> {
    let mut text = graph_to_json(graph);
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
