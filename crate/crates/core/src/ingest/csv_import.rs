use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{ClassNode, LoadSummary, MonolithGraph, RawEdge};
use crate::error::{Error, Result};
use crate::lexicon::TermBag;

/// Inputs for [`import_dependency_csv`].
#[derive(Debug, Clone, Default)]
pub struct CsvImport {
    /// `caller,callee,count` export.
    pub dependencies: PathBuf,
    /// One class id per line (`#` comments). When absent the classes are
    /// the CSV endpoints in order of first appearance.
    pub class_list: Option<PathBuf>,
    /// JSON object mapping class id to `{token: count}`.
    pub terms: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
struct Row {
    caller: String,
    callee: String,
    count: i64,
}

pub fn import_dependency_csv(opts: &CsvImport) -> Result<(MonolithGraph, LoadSummary)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(&opts.dependencies)
        .map_err(|e| csv_error(&opts.dependencies, e))?;

    let mut edges = Vec::new();
    let mut seen_order = Vec::new();
    let mut seen = HashSet::new();
    for (line, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| csv_error(&opts.dependencies, e))?;
        if row.count < 1 {
            return Err(Error::Malformed(format!(
                "row {}: count must be positive, got {}",
                line + 2,
                row.count
            )));
        }
        for id in [&row.caller, &row.callee] {
            if seen.insert(id.clone()) {
                seen_order.push(id.clone());
            }
        }
        edges.push(RawEdge::new(row.caller, row.callee, row.count as u64));
    }

    let ids = match &opts.class_list {
        Some(path) => read_class_list(path)?,
        None => seen_order,
    };
    let mut terms = match &opts.terms {
        Some(path) => read_terms(path)?,
        None => BTreeMap::new(),
    };
    let classes = ids
        .into_iter()
        .map(|id| {
            let bag = terms.remove(&id).unwrap_or_default();
            ClassNode::new(id).with_terms(bag)
        })
        .collect();
    if !terms.is_empty() {
        log::warn!("{} term bag(s) refer to unknown classes", terms.len());
    }
    MonolithGraph::build(classes, edges)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        },
        _ => Error::Malformed(format!("{}: {e}", path.display())),
    }
}

fn read_class_list(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

fn read_terms(path: &Path) -> Result<BTreeMap<String, TermBag>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))
}
