//! Second-level mapping: a reference ontology, lexical suggestions that
//! relate the generated vocabulary to it, and the rewrite of a mapping
//! document once a reviewed alignment exists.

mod ontology;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use ontology::{load_ontology, OntologyModel, PropertyKind};

use crate::mapping::{MappingDocument, TermKind};
use crate::rdf::{Iri, RdfError};

/// The reference ontology shipped with the demo.
pub const HELPDESK_ONTOLOGY: &str = include_str!("helpdesk.ttl");

#[derive(Debug, Error)]
pub enum AlignError {
    #[error(transparent)]
    Turtle(#[from] RdfError),
    #[error("subclass cycle through {0}")]
    Cycle(String),
    #[error("alignment line {line}: {message}")]
    BadLine { line: usize, message: String },
    #[error("source term {0} aligned more than once")]
    DuplicateSource(Iri),
    #[error("confidence {0} outside [0, 1]")]
    Confidence(f64),
    #[error("target {0} is not declared in the ontology")]
    UnknownTarget(Iri),
    #[error("{term} is a {expected} but {target} is not")]
    KindMismatch { term: Iri, target: Iri, expected: &'static str },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    Manual,
    Lexical,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Manual => "manual",
            Origin::Lexical => "lexical",
        })
    }
}

impl FromStr for Origin {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "manual" => Ok(Origin::Manual),
            "lexical" => Ok(Origin::Lexical),
            other => Err(format!("unknown origin {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Correspondence {
    pub source: Iri,
    pub target: Iri,
    pub confidence: f64,
    pub origin: Origin,
}

/// Correspondences from generated terms to ontology terms; each source
/// appears at most once.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Alignment {
    correspondences: Vec<Correspondence>,
}

impl Alignment {
    pub fn new(correspondences: Vec<Correspondence>) -> Result<Self, AlignError> {
        let mut seen = BTreeSet::new();
        for c in &correspondences {
            if !(0.0..=1.0).contains(&c.confidence) {
                return Err(AlignError::Confidence(c.confidence));
            }
            if !seen.insert(&c.source) {
                return Err(AlignError::DuplicateSource(c.source.clone()));
            }
        }
        Ok(Self { correspondences })
    }

    pub fn correspondences(&self) -> &[Correspondence] {
        &self.correspondences
    }

    pub fn is_empty(&self) -> bool {
        self.correspondences.is_empty()
    }

    pub fn len(&self) -> usize {
        self.correspondences.len()
    }

    pub fn target_of(&self, source: &Iri) -> Option<&Iri> {
        self.correspondences.iter().find(|c| &c.source == source).map(|c| &c.target)
    }
}

fn expand(term: &str, prefixes: &BTreeMap<String, String>) -> Result<Iri, String> {
    if let Some(inner) = term.strip_prefix('<').and_then(|t| t.strip_suffix('>')) {
        return Iri::new(inner).map_err(|e| e.to_string());
    }
    if let Some((label, local)) = term.split_once(':') {
        if let Some(ns) = prefixes.get(label) {
            return Iri::new(format!("{ns}{local}")).map_err(|e| e.to_string());
        }
    }
    Iri::new(term).map_err(|e| e.to_string())
}

/// Parses `source<TAB>target<TAB>confidence<TAB>origin` lines. Blank lines
/// and `#` comments are skipped; terms may be `prefix:local` CURIEs over
/// `prefixes`.
pub fn parse_alignment(text: &str, prefixes: &BTreeMap<String, String>) -> Result<Alignment, AlignError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let bad = |message: String| AlignError::BadLine { line: i + 1, message };
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        let [source, target, confidence, origin] = fields[..] else {
            return Err(bad(format!("expected 4 tab-separated fields, found {}", fields.len())));
        };
        out.push(Correspondence {
            source: expand(source, prefixes).map_err(bad)?,
            target: expand(target, prefixes).map_err(bad)?,
            confidence: confidence.parse().map_err(|_| bad(format!("bad confidence {confidence:?}")))?,
            origin: origin.parse().map_err(bad)?,
        });
    }
    Alignment::new(out)
}

pub fn write_alignment(a: &Alignment) -> String {
    let mut out = String::from("# source\ttarget\tconfidence\torigin\n");
    for c in &a.correspondences {
        out.push_str(&format!("{}\t{}\t{}\t{}\n", c.source, c.target, c.confidence, c.origin));
    }
    out
}

#[derive(Clone, Debug)]
pub struct SuggestOptions {
    pub threshold: f64,
    /// Table-name prefixes removed before tokenizing.
    pub strip_prefixes: Vec<String>,
}

impl Default for SuggestOptions {
    fn default() -> Self {
        Self { threshold: 0.5, strip_prefixes: vec!["ost_".into(), "glpi_".into()] }
    }
}

/// Lower-cased tokens of a local name, split on underscores, hyphens and
/// case changes.
pub fn tokens(name: &str, strip: &[String]) -> BTreeSet<String> {
    let mut name = name;
    for p in strip {
        if let Some(rest) = name.strip_prefix(p.as_str()) {
            name = rest;
            break;
        }
    }
    let mut out = BTreeSet::new();
    for part in name.split(['_', '-', ' ']) {
        let chars: Vec<char> = part.chars().collect();
        let mut cur = String::new();
        for (i, &c) in chars.iter().enumerate() {
            let prev = i.checked_sub(1).map(|j| chars[j]);
            let next = chars.get(i + 1).copied();
            let boundary = match prev {
                Some(p) if c.is_uppercase() => {
                    p.is_lowercase() || p.is_ascii_digit() || next.is_some_and(char::is_lowercase)
                }
                Some(p) => c.is_ascii_digit() != p.is_ascii_digit(),
                None => false,
            };
            if boundary && !cur.is_empty() {
                out.insert(std::mem::take(&mut cur).to_lowercase());
            }
            cur.push(c);
        }
        if !cur.is_empty() {
            out.insert(cur.to_lowercase());
        }
    }
    out
}

pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Best ontology term per source term by token overlap. Classes only
/// match classes and properties only properties.
pub fn suggest_alignment(terms: &[(Iri, TermKind)], onto: &OntologyModel, opts: &SuggestOptions) -> Alignment {
    let classes: Vec<(&Iri, BTreeSet<String>)> =
        onto.classes.iter().map(|c| (c, tokens(c.local_name(), &[]))).collect();
    let properties: Vec<(&Iri, BTreeSet<String>)> =
        onto.properties.keys().map(|p| (p, tokens(p.local_name(), &[]))).collect();
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (term, kind) in terms {
        if !seen.insert(term) {
            continue;
        }
        let src = tokens(term.local_name(), &opts.strip_prefixes);
        let pool = match kind {
            TermKind::Class => &classes,
            TermKind::Property => &properties,
        };
        let best = pool
            .iter()
            .map(|(iri, toks)| (jaccard(&src, toks), *iri))
            .filter(|(s, _)| *s >= opts.threshold && *s > 0.0)
            .max_by(|(sa, ia), (sb, ib)| sa.total_cmp(sb).then_with(|| ib.cmp(ia)));
        if let Some((score, target)) = best {
            out.push(Correspondence {
                source: term.clone(),
                target: target.clone(),
                confidence: score,
                origin: Origin::Lexical,
            });
        }
    }
    Alignment { correspondences: out }
}

/// Replaces class and property IRIs of `doc` per `a` and declares the
/// ontology prefixes the new IRIs use. Sources absent from the document
/// are ignored.
pub fn apply_alignment(
    doc: &MappingDocument,
    a: &Alignment,
    onto: &OntologyModel,
) -> Result<MappingDocument, AlignError> {
    let mut out = doc.clone();
    for c in &a.correspondences {
        if !onto.is_class(&c.target) && !onto.is_property(&c.target) {
            return Err(AlignError::UnknownTarget(c.target.clone()));
        }
    }
    let lookup = |source: &Iri, class: bool| -> Result<Option<&Iri>, AlignError> {
        let Some(target) = a.target_of(source) else {
            return Ok(None);
        };
        let ok = if class { onto.is_class(target) } else { onto.is_property(target) };
        if !ok {
            return Err(AlignError::KindMismatch {
                term: source.clone(),
                target: target.clone(),
                expected: if class { "class" } else { "property" },
            });
        }
        Ok(Some(target))
    };
    let mut used = Vec::new();
    for cm in &mut out.class_maps {
        if let Some(t) = lookup(&cm.class_iri, true)? {
            cm.class_iri = t.clone();
            used.push(t.clone());
        }
        for b in &mut cm.bridges {
            if let Some(t) = lookup(&b.property, false)? {
                b.property = t.clone();
                used.push(t.clone());
            }
        }
    }
    for t in &used {
        if let Some((label, ns)) = onto.prefix_for(t) {
            if !crate::mapping::STANDARD_PREFIXES.iter().any(|(l, _)| *l == label) {
                out.extra_prefixes.insert(label.to_owned(), ns.to_owned());
            }
        }
    }
    Ok(out)
}
