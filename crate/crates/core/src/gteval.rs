//! Comparison of an extracted decomposition against a reference one.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Decomposition;

/// The reference decomposition; same file format as [`Decomposition`].
pub type GroundTruth = Decomposition;

/// Best-overlap truth microservice for `members`: the argmax of
/// `|members ∩ truth_j| / |members|`, ties to the smaller index.
pub fn corr(members: &[String], truth: &GroundTruth) -> Result<(usize, f64)> {
    if members.is_empty() {
        return Err(Error::InvalidDecomposition("extracted microservice is empty".into()));
    }
    if truth.is_empty() {
        return Err(Error::InvalidDecomposition("ground truth is empty".into()));
    }
    let mine: HashSet<&str> = members.iter().map(String::as_str).collect();
    let mut best = (0usize, 0usize);
    for (j, t) in truth.microservices.iter().enumerate() {
        let common = t.classes.iter().filter(|c| mine.contains(c.as_str())).count();
        if common > best.1 {
            best = (j, common);
        }
    }
    Ok((best.0, best.1 as f64 / mine.len() as f64))
}

fn overlaps(extracted: &Decomposition, truth: &GroundTruth) -> Result<Vec<(usize, f64)>> {
    if extracted.is_empty() {
        return Err(Error::InvalidDecomposition("extracted decomposition is empty".into()));
    }
    extracted
        .microservices
        .iter()
        .map(|m| corr(&m.classes, truth))
        .collect()
}

/// Mean overlap ratio with each microservice's best truth match.
pub fn precision(extracted: &Decomposition, truth: &GroundTruth) -> Result<f64> {
    let o = overlaps(extracted, truth)?;
    Ok(o.iter().map(|&(_, r)| r).sum::<f64>() / o.len() as f64)
}

/// Fraction of extracted microservices whose overlap ratio reaches `threshold`.
pub fn success_rate(extracted: &Decomposition, truth: &GroundTruth, threshold: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidParams(format!("threshold must be in [0, 1], got {threshold}")));
    }
    let o = overlaps(extracted, truth)?;
    Ok(sr_from(&o, threshold))
}

fn sr_from(o: &[(usize, f64)], threshold: f64) -> f64 {
    o.iter().filter(|&&(_, r)| r >= threshold).count() as f64 / o.len() as f64
}

/// `SR@k` uses the threshold `k / 10`.
pub fn sr_at(extracted: &Decomposition, truth: &GroundTruth, k: u32) -> Result<f64> {
    if !(1..=10).contains(&k) {
        return Err(Error::InvalidParams(format!("SR@k needs k in 1..=10, got {k}")));
    }
    success_rate(extracted, truth, k as f64 / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub extracted: String,
    pub truth: String,
    pub overlap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthReport {
    pub precision: f64,
    /// `SR@k` for k = 1..=10.
    pub sr: BTreeMap<u32, f64>,
    pub matches: Vec<MatchRecord>,
}

impl GroundTruthReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

pub fn evaluate(extracted: &Decomposition, truth: &GroundTruth) -> Result<GroundTruthReport> {
    let o = overlaps(extracted, truth)?;
    let precision = o.iter().map(|&(_, r)| r).sum::<f64>() / o.len() as f64;
    let sr = (1..=10).map(|k| (k, sr_from(&o, k as f64 / 10.0))).collect();
    let matches = extracted
        .microservices
        .iter()
        .zip(&o)
        .map(|(m, &(j, r))| MatchRecord {
            extracted: m.name.clone(),
            truth: truth.microservices[j].name.clone(),
            overlap: r,
        })
        .collect();
    Ok(GroundTruthReport {
        precision,
        sr,
        matches,
    })
}
