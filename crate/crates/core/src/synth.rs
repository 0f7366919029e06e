//! Seeded synthetic monoliths for tests and benchmarks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{ClassNode, MonolithGraph, RawEdge};
use crate::lexicon::TermBag;
use crate::metrics::Decomposition;

const LETTERS: &[u8] = b"bcdfghjklmnpqrstvwz";

/// A letters-only token ending in `x`, which the stemmer leaves alone.
fn token(a: usize, b: usize) -> String {
    let l = |i: usize| LETTERS[i % LETTERS.len()] as char;
    format!("{}a{}o{}x", l(a), l(b), l(a / LETTERS.len() + b / LETTERS.len()))
}

/// `groups` groups of `per_group` classes. Each group is a call clique with
/// frequency 2 on every ordered pair and a private three-word vocabulary
/// shared by all its classes. Groups share no calls and no words.
///
/// Returns the graph and the planted decomposition.
pub fn planted_monolith(groups: usize, per_group: usize) -> (MonolithGraph, Decomposition) {
    let mut classes = Vec::new();
    let mut edges = Vec::new();
    let mut truth = Vec::new();
    for g in 0..groups {
        let ids: Vec<String> = (0..per_group).map(|k| format!("planted.g{g}.C{k}")).collect();
        for id in &ids {
            let bag: TermBag = (0..3).map(|w| (token(g, w), 2u64)).collect();
            classes.push(ClassNode::new(id.clone()).with_terms(bag));
        }
        for a in &ids {
            for b in &ids {
                if a != b {
                    edges.push(RawEdge::new(a.clone(), b.clone(), 2));
                }
            }
        }
        truth.push((format!("group-{g}"), ids));
    }
    let (graph, _) = MonolithGraph::build(classes, edges).expect("planted graph is valid");
    (graph, Decomposition::from_named(truth))
}

/// `n` classes with about three outgoing calls each and two to five words
/// drawn from a shared pool of `n / 2 + 4` words.
pub fn random_monolith(n: usize, seed: u64) -> MonolithGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool: Vec<String> = (0..n / 2 + 4).map(|i| token(i, i * 7 + 3)).collect();
    let ids: Vec<String> = (0..n).map(|i| format!("random.C{i}")).collect();
    let classes = ids
        .iter()
        .map(|id| {
            let k = rng.gen_range(2..=5);
            let bag: TermBag = pool
                .choose_multiple(&mut rng, k)
                .map(|w| (w.clone(), rng.gen_range(1..4u64)))
                .collect();
            ClassNode::new(id.clone()).with_terms(bag)
        })
        .collect();
    let mut edges = Vec::new();
    if n > 1 {
        for (i, id) in ids.iter().enumerate() {
            for _ in 0..3 {
                let j = rng.gen_range(0..n);
                if j != i {
                    edges.push(RawEdge::new(id.clone(), ids[j].clone(), rng.gen_range(1..10)));
                }
            }
        }
    }
    let (graph, _) = MonolithGraph::build(classes, edges).expect("random graph is valid");
    graph
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::{normalize_raw, StopList};

    #[test]
    fn planted_shape() {
        let (g, truth) = planted_monolith(3, 4);
        assert_eq!(g.len(), 12);
        assert_eq!(g.edges().len(), 3 * 12);
        assert_eq!(truth.sizes(), vec![4, 4, 4]);
        assert!(truth.is_partition_of(&g));
    }

    #[test]
    fn tokens_survive_normalization() {
        let stop = StopList::default();
        let (g, _) = planted_monolith(3, 2);
        for c in g.classes() {
            assert_eq!(normalize_raw(&c.terms, &stop), c.terms);
        }
        let mut all: Vec<String> = (0..40).flat_map(|a| (0..3).map(move |b| token(a, b))).collect();
        let n = all.len();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), n);
    }

    #[test]
    fn random_is_seeded() {
        assert_eq!(random_monolith(30, 4), random_monolith(30, 4));
        assert_eq!(random_monolith(118, 1).len(), 118);
    }
}
