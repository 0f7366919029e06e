//! Heuristic extraction of classes, calls and vocabulary from Java-like
//! sources.
//!
//! This is a lexical scan, not a parser. Comments and string literals are
//! blanked first; top-level `class`/`interface`/`enum`/`record`
//! declarations become classes; calls are recognised from three shapes:
//! `new Type(..)`, `Type.member(..)` and `var.member(..)` where `var` was
//! declared with a scanned type inside the same class. Targets are
//! resolved by simple name only. A simple name shared by several classes
//! is ambiguous; such calls produce no edge and are reported.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use rayon::prelude::*;
use regex::Regex;

use super::{ClassNode, LoadSummary, MonolithGraph, RawEdge};
use crate::error::{Error, Result};
use crate::lexicon::TermBag;

#[derive(Debug, Clone)]
pub struct ScanOptions {
    /// File extensions to scan, without the dot.
    pub extensions: Vec<String>,
    /// Fail on unreadable files instead of skipping them.
    pub strict: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            extensions: vec!["java".to_string()],
            strict: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmbiguousCall {
    pub caller: String,
    pub simple_name: String,
    pub candidates: Vec<String>,
    pub occurrences: u64,
}

#[derive(Debug, Clone, Default)]
pub struct ScanReport {
    pub files_scanned: usize,
    pub skipped: Vec<(PathBuf, String)>,
    pub ambiguous: Vec<AmbiguousCall>,
    /// Fully qualified names declared more than once; only the first is kept.
    pub duplicates: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ScanOutcome {
    pub graph: MonolithGraph,
    pub summary: LoadSummary,
    pub report: ScanReport,
}

/// One top-level declaration found in a file.
#[derive(Debug)]
struct DeclaredClass {
    fqn: String,
    simple: String,
    terms: TermBag,
    /// Simple-name call targets with occurrence counts.
    targets: BTreeMap<String, u64>,
}

const KEYWORDS: &[&str] = &[
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
    "continue", "default", "do", "double", "else", "enum", "extends", "final", "finally", "float",
    "for", "goto", "if", "implements", "import", "instanceof", "int", "interface", "long",
    "native", "new", "package", "private", "protected", "public", "return", "short", "static",
    "strictfp", "super", "switch", "synchronized", "this", "throw", "throws", "transient", "try",
    "void", "volatile", "while", "true", "false", "null", "var", "record", "yield", "sealed",
    "permits",
];

fn re(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).expect("valid regex"))
}

fn package_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r"\bpackage\s+([\w$.]+)\s*;")
}

fn decl_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r"\b(?:class|interface|enum|record)\s+([A-Za-z_$][\w$]*)")
}

fn ident_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r"[A-Za-z_$][\w$]*")
}

fn word_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r"[A-Za-z][A-Za-z0-9_]*")
}

fn ctor_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r"\bnew\s+(?:[\w$]+\s*\.\s*)*([A-Za-z_$][\w$]*)\s*(?:<[^;{}()]*>)?\s*\(")
}

fn static_call_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r"\b([A-Z][\w$]*)\s*\.\s*[A-Za-z_$][\w$]*\s*\(")
}

fn member_call_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r"\b([a-z_$][\w$]*)\s*\.\s*[A-Za-z_$][\w$]*\s*\(")
}

fn var_decl_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(
        &R,
        r"\b([A-Z][\w$]*)\s*(?:<[^;{}()]*?>)?\s*(?:\[\s*\]\s*)*\s+([a-z_$][\w$]*)\s*[=;,):]",
    )
}

/// Scans every matching file under `root` (sorted by path).
pub fn scan_sources(root: &Path, options: &ScanOptions) -> Result<ScanOutcome> {
    if !root.exists() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "source root does not exist"),
        ));
    }
    let mut paths: Vec<PathBuf> = walkdir::WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .filter(|p| {
            p.extension()
                .and_then(|x| x.to_str())
                .is_some_and(|x| options.extensions.iter().any(|want| want == x))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::NoSources(root.to_path_buf()));
    }

    let per_file: Vec<(PathBuf, std::io::Result<String>)> = paths
        .into_par_iter()
        .map(|p| {
            let text = std::fs::read_to_string(&p);
            (p, text)
        })
        .collect();

    let mut report = ScanReport::default();
    let mut declared: Vec<DeclaredClass> = Vec::new();
    for (path, text) in per_file {
        match text {
            Ok(text) => {
                report.files_scanned += 1;
                declared.extend(scan_file(&text));
            }
            Err(e) if options.strict => return Err(Error::io(path, e)),
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                report.skipped.push((path, e.to_string()));
            }
        }
    }

    let mut seen = HashMap::new();
    declared.retain(|c| {
        if seen.insert(c.fqn.clone(), ()).is_some() {
            report.duplicates.push(c.fqn.clone());
            false
        } else {
            true
        }
    });

    let mut by_simple: HashMap<&str, Vec<&str>> = HashMap::new();
    for c in &declared {
        by_simple.entry(&c.simple).or_default().push(&c.fqn);
    }

    let mut edges = Vec::new();
    for c in &declared {
        for (target, &count) in &c.targets {
            match by_simple.get(target.as_str()).map(Vec::as_slice) {
                None | Some([]) => {}
                Some([only]) => {
                    if *only != c.fqn {
                        edges.push(RawEdge::new(c.fqn.clone(), *only, count));
                    }
                }
                Some(many) => {
                    log::warn!(
                        "{}: call to `{target}` is ambiguous among {} classes",
                        c.fqn,
                        many.len()
                    );
                    report.ambiguous.push(AmbiguousCall {
                        caller: c.fqn.clone(),
                        simple_name: target.clone(),
                        candidates: many.iter().map(|s| s.to_string()).collect(),
                        occurrences: count,
                    });
                }
            }
        }
    }

    let classes = declared
        .into_iter()
        .map(|c| ClassNode {
            id: c.fqn.clone(),
            name: c.fqn,
            terms: c.terms,
        })
        .collect();
    let (graph, summary) = MonolithGraph::build(classes, edges)?;
    Ok(ScanOutcome {
        graph,
        summary,
        report,
    })
}

struct Blanked {
    code: String,
    comments: Vec<(usize, usize)>,
}

/// Replaces comments and string/char literals with spaces, keeping byte
/// offsets and newlines. Comment spans are returned separately.
fn blank_comments_and_strings(src: &str) -> Blanked {
    let bytes = src.as_bytes();
    let mut out = bytes.to_vec();
    let mut comments = Vec::new();
    let mut i = 0;
    let blank = |out: &mut Vec<u8>, from: usize, to: usize| {
        for b in &mut out[from..to] {
            if *b != b'\n' {
                *b = b' ';
            }
        }
    };
    while i < bytes.len() {
        let rest = &bytes[i..];
        if rest.starts_with(b"//") {
            let end = rest.iter().position(|&b| b == b'\n').map_or(bytes.len(), |p| i + p);
            comments.push((i + 2, end));
            blank(&mut out, i, end);
            i = end;
        } else if rest.starts_with(b"/*") {
            let end = find(bytes, i + 2, b"*/").map_or(bytes.len(), |p| p + 2);
            comments.push((i + 2, end.saturating_sub(2).max(i + 2)));
            blank(&mut out, i, end);
            i = end;
        } else if rest.starts_with(b"\"\"\"") {
            let end = find(bytes, i + 3, b"\"\"\"").map_or(bytes.len(), |p| p + 3);
            blank(&mut out, i, end);
            i = end;
        } else if bytes[i] == b'"' || bytes[i] == b'\'' {
            let quote = bytes[i];
            let mut j = i + 1;
            while j < bytes.len() && bytes[j] != quote && bytes[j] != b'\n' {
                if bytes[j] == b'\\' {
                    j += 1;
                }
                j += 1;
            }
            let end = (j + 1).min(bytes.len());
            blank(&mut out, i, end);
            i = end;
        } else {
            i += 1;
        }
    }
    Blanked {
        // only ASCII bytes were overwritten, and always whole literals or
        // comments, so the buffer is still UTF-8
        code: String::from_utf8(out).unwrap_or_else(|e| String::from_utf8_lossy(e.as_bytes()).into()),
        comments,
    }
}

fn find(haystack: &[u8], from: usize, needle: &[u8]) -> Option<usize> {
    haystack
        .get(from..)?
        .windows(needle.len())
        .position(|w| w == needle)
        .map(|p| p + from)
}

/// Index one past the brace matching the `{` at `open`, or EOF.
fn matching_brace(code: &[u8], open: usize) -> usize {
    let mut depth = 0usize;
    for (k, &b) in code.iter().enumerate().skip(open) {
        match b {
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return k + 1;
                }
            }
            _ => {}
        }
    }
    code.len()
}

fn scan_file(src: &str) -> Vec<DeclaredClass> {
    let Blanked { code, comments } = blank_comments_and_strings(src);
    let bytes = code.as_bytes();
    let package = package_re()
        .captures(&code)
        .map(|c| c[1].to_string());

    let mut depth_at = Vec::with_capacity(bytes.len() + 1);
    let mut depth = 0i64;
    for &b in bytes {
        depth_at.push(depth);
        match b {
            b'{' => depth += 1,
            b'}' => depth -= 1,
            _ => {}
        }
    }
    depth_at.push(depth);

    let mut out = Vec::new();
    let mut consumed = 0;
    for caps in decl_re().captures_iter(&code) {
        let whole = caps.get(0).unwrap();
        if whole.start() < consumed || depth_at[whole.start()] != 0 {
            continue;
        }
        let Some(open) = bytes[whole.end()..].iter().position(|&b| b == b'{') else {
            continue;
        };
        let open = whole.end() + open;
        let close = matching_brace(bytes, open);
        consumed = close;

        let simple = caps[1].to_string();
        let fqn = match &package {
            Some(p) => format!("{p}.{simple}"),
            None => simple.clone(),
        };

        let mut terms = TermBag::new();
        for m in ident_re().find_iter(&code[whole.start()..close]) {
            if !KEYWORDS.contains(&m.as_str()) {
                terms.add(m.as_str(), 1);
            }
        }
        for &(from, to) in &comments {
            if from >= whole.start() && to <= close {
                for m in word_re().find_iter(&src[from..to]) {
                    terms.add(m.as_str(), 1);
                }
            }
        }

        let body = &code[open..close];
        out.push(DeclaredClass {
            targets: call_targets(body),
            fqn,
            simple,
            terms,
        });
    }
    out
}

fn call_targets(body: &str) -> BTreeMap<String, u64> {
    let mut targets: BTreeMap<String, u64> = BTreeMap::new();
    for c in ctor_re().captures_iter(body) {
        *targets.entry(c[1].to_string()).or_insert(0) += 1;
    }
    for c in static_call_re().captures_iter(body) {
        *targets.entry(c[1].to_string()).or_insert(0) += 1;
    }
    let vars: HashMap<String, String> = var_decl_re()
        .captures_iter(body)
        .map(|c| (c[2].to_string(), c[1].to_string()))
        .collect();
    for c in member_call_re().captures_iter(body) {
        if let Some(ty) = vars.get(&c[1]) {
            *targets.entry(ty.clone()).or_insert(0) += 1;
        }
    }
    targets
}
