//! Inputs shared by the benchmarks.

use monodecomp_core::harness::class_bags;
use monodecomp_core::{encode, synth, Configuration, FeatureMatrix, MonolithGraph, StopList, TermBag};

/// A random graph of `n` classes with its normalized bags and default features.
pub fn prepared(n: usize, seed: u64) -> (MonolithGraph, Vec<TermBag>, FeatureMatrix) {
    let graph = synth::random_monolith(n, seed);
    let bags = class_bags(&graph, &StopList::default());
    let features = encode::encode(&graph, &bags, Configuration::DEFAULT).expect("synthetic graphs encode");
    (graph, bags, features)
}
