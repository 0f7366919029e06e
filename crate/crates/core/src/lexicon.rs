//! Class vocabulary: identifier splitting, stop words, stemming, and the
//! bag-of-words / TF-IDF representations built on top of them.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

const DEFAULT_STOP_WORDS: &str = include_str!("../data/stopwords.txt");

/// Term counts for one document. Keys are kept sorted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TermBag(BTreeMap<String, u64>);

impl TermBag {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `count` occurrences of `term`. Zero counts are ignored.
    pub fn add(&mut self, term: impl Into<String>, count: u64) {
        if count > 0 {
            *self.0.entry(term.into()).or_insert(0) += count;
        }
    }

    pub fn get(&self, term: &str) -> u64 {
        self.0.get(term).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.0.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    /// Adds every count of `other` into `self`.
    pub fn merge(&mut self, other: &TermBag) {
        for (term, count) in other.iter() {
            self.add(term, count);
        }
    }
}

impl<S: Into<String>> FromIterator<(S, u64)> for TermBag {
    fn from_iter<I: IntoIterator<Item = (S, u64)>>(iter: I) -> Self {
        let mut bag = TermBag::new();
        for (term, count) in iter {
            bag.add(term, count);
        }
        bag
    }
}

/// Lowercase words removed before stemming.
#[derive(Debug, Clone)]
pub struct StopList {
    words: HashSet<String>,
}

impl Default for StopList {
    fn default() -> Self {
        Self::parse(DEFAULT_STOP_WORDS)
    }
}

impl StopList {
    pub fn empty() -> Self {
        StopList {
            words: HashSet::new(),
        }
    }

    /// One word per line; `#` starts a comment.
    pub fn parse(text: &str) -> Self {
        let mut list = Self::empty();
        list.extend_from_text(text);
        list
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn extend_from_text(&mut self, text: &str) {
        for line in text.lines() {
            let word = line.split('#').next().unwrap_or("").trim();
            if !word.is_empty() {
                self.words.insert(word.to_lowercase());
            }
        }
    }

    pub fn insert(&mut self, word: &str) {
        self.words.insert(word.to_lowercase());
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Splits an identifier into lowercase word tokens.
///
/// Underscores, digits and any other non-letter characters separate tokens.
/// Inside a run of letters a lower-to-upper transition starts a new token,
/// and a run of capitals stays together except for its last capital when
/// that one is followed by a lowercase letter (`SLSBBean` -> `slsb`, `bean`).
pub fn split_identifier(raw: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut run: Vec<char> = Vec::new();
    for c in raw.chars() {
        if c.is_alphabetic() {
            run.push(c);
        } else {
            split_letter_run(&run, &mut tokens);
            run.clear();
        }
    }
    split_letter_run(&run, &mut tokens);
    tokens
}

fn split_letter_run(run: &[char], out: &mut Vec<String>) {
    if run.is_empty() {
        return;
    }
    let mut start = 0;
    for i in 1..run.len() {
        let prev = run[i - 1];
        let cur = run[i];
        let boundary = (!prev.is_uppercase() && cur.is_uppercase())
            || (prev.is_uppercase()
                && cur.is_uppercase()
                && run.get(i + 1).is_some_and(|n| n.is_lowercase()));
        if boundary {
            out.push(run[start..i].iter().collect::<String>().to_lowercase());
            start = i;
        }
    }
    out.push(run[start..].iter().collect::<String>().to_lowercase());
}

/// Removes stop words and short tokens, stems the rest, and counts them.
///
/// The stop list is applied both before and after stemming so that no
/// stemmed form that happens to be a stop word survives.
pub fn normalize<S: AsRef<str>>(tokens: &[S], stop_list: &StopList) -> TermBag {
    let mut bag = TermBag::new();
    for token in tokens {
        if let Some(term) = normalize_token(token.as_ref(), stop_list) {
            bag.add(term, 1);
        }
    }
    bag
}

fn normalize_token(token: &str, stop_list: &StopList) -> Option<String> {
    let lower = token.to_lowercase();
    if lower.chars().count() < 2
        || lower.chars().all(|c| c.is_ascii_digit())
        || stop_list.contains(&lower)
    {
        return None;
    }
    let stemmed = porter_stemmer::stem(&lower);
    if stemmed.chars().count() < 2 || stop_list.contains(&stemmed) {
        return None;
    }
    Some(stemmed)
}

/// Turns raw `(identifier-or-word, count)` pairs into a normalized bag.
pub fn normalize_raw(raw: &TermBag, stop_list: &StopList) -> TermBag {
    let mut bag = TermBag::new();
    for (word, count) in raw.iter() {
        for token in split_identifier(word) {
            if let Some(term) = normalize_token(&token, stop_list) {
                bag.add(term, count);
            }
        }
    }
    bag
}

/// Column layout and document frequencies of a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    doc_freq: Vec<usize>,
    documents: usize,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn column(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn doc_freq(&self, term: &str) -> Option<usize> {
        self.column(term).map(|c| self.doc_freq[c])
    }

    /// Number of documents the vocabulary was built from.
    pub fn documents(&self) -> usize {
        self.documents
    }

    /// `ln(D / df)` for a column.
    pub fn idf(&self, column: usize) -> f64 {
        (self.documents as f64 / self.doc_freq[column] as f64).ln()
    }

    /// Raw-count vector of a bag over this vocabulary. Unknown terms are skipped.
    pub fn bow_vector(&self, bag: &TermBag) -> Vec<f64> {
        let mut row = vec![0.0; self.len()];
        let mut unknown = 0usize;
        for (term, count) in bag.iter() {
            match self.column(term) {
                Some(c) => row[c] = count as f64,
                None => unknown += 1,
            }
        }
        if unknown > 0 {
            log::warn!("{unknown} term(s) outside the vocabulary ignored");
        }
        row
    }

    /// TF-IDF vector of a bag using this corpus' document frequencies.
    pub fn tfidf_vector(&self, bag: &TermBag) -> Vec<f64> {
        let mut row = self.bow_vector(bag);
        for (c, w) in row.iter_mut().enumerate() {
            if *w != 0.0 {
                *w *= self.idf(c);
            }
        }
        row
    }
}

/// Builds the sorted vocabulary of a corpus.
pub fn build_vocabulary(bags: &[TermBag]) -> Result<Vocabulary> {
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for bag in bags {
        for term in bag.terms() {
            *df.entry(term).or_insert(0) += 1;
        }
    }
    if df.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let terms: Vec<String> = df.keys().map(|t| t.to_string()).collect();
    let index = terms
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();
    Ok(Vocabulary {
        terms,
        index,
        doc_freq: df.into_values().collect(),
        documents: bags.len(),
    })
}

/// Raw term frequencies, one row per bag.
pub fn bow_matrix(bags: &[TermBag], vocab: &Vocabulary) -> Matrix {
    Matrix::from_rows_with_cols(bags.iter().map(|b| vocab.bow_vector(b)).collect(), vocab.len())
}

/// `tf * ln(D / df)` weights, one row per bag.
///
/// `bags` must be the corpus the vocabulary was built from.
pub fn tfidf_matrix(bags: &[TermBag], vocab: &Vocabulary) -> Result<Matrix> {
    if bags.len() != vocab.documents() {
        return Err(Error::DimensionMismatch(format!(
            "{} documents given, vocabulary built from {}",
            bags.len(),
            vocab.documents()
        )));
    }
    Ok(Matrix::from_rows_with_cols(
        bags.iter().map(|b| vocab.tfidf_vector(b)).collect(),
        vocab.len(),
    ))
}
