//! RDF data model shared by every other module: terms, triples, graphs and
//! solution sequences, plus the Turtle subset and SPARQL results JSON codecs.

mod results;
mod turtle;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub use results::{read_results_json, write_results_json};
pub(crate) use turtle::{compact_iri, resolve_relative as turtle_resolve, write_term};
pub use turtle::{parse_turtle, serialize_turtle};

use thiserror::Error;

/// Well-known namespaces and IRIs.
pub mod vocab {
    pub const RDF: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
    pub const RDFS: &str = "http://www.w3.org/2000/01/rdf-schema#";
    pub const XSD: &str = "http://www.w3.org/2001/XMLSchema#";
    pub const OWL: &str = "http://www.w3.org/2002/07/owl#";
    pub const D2RQ: &str = "http://www.wiwiss.fu-berlin.de/suhl/bizer/D2RQ/0.1#";
    pub const JDBC: &str = "http://d2rq.org/terms/jdbc/";
    pub const HDO: &str = "http://www.samos.gr/ontologies/helpdeskOnto.owl#";

    pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
    pub const RDF_LANG_STRING: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#langString";
    pub const XSD_STRING: &str = "http://www.w3.org/2001/XMLSchema#string";
    pub const XSD_INTEGER: &str = "http://www.w3.org/2001/XMLSchema#integer";
    pub const XSD_DECIMAL: &str = "http://www.w3.org/2001/XMLSchema#decimal";
    pub const XSD_DOUBLE: &str = "http://www.w3.org/2001/XMLSchema#double";
    pub const XSD_BOOLEAN: &str = "http://www.w3.org/2001/XMLSchema#boolean";
    pub const XSD_DATE_TIME: &str = "http://www.w3.org/2001/XMLSchema#dateTime";
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RdfError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("undeclared prefix '{prefix}' at line {line}, column {column}")]
    UndeclaredPrefix { prefix: String, line: usize, column: usize },
    #[error("relative IRI <{0}> with no base")]
    RelativeIri(String),
    #[error("invalid IRI <{0}>")]
    InvalidIri(String),
    #[error("invalid term: {0}")]
    InvalidTerm(String),
    #[error("malformed results document: {0}")]
    Results(String),
}

/// An absolute IRI.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Iri(String);

impl Iri {
    pub fn new(value: impl Into<String>) -> Result<Self, RdfError> {
        let value = value.into();
        if has_scheme(&value) && !value.chars().any(|c| c.is_whitespace() || c == '<' || c == '>' || c == '"') {
            Ok(Self(value))
        } else {
            Err(RdfError::InvalidIri(value))
        }
    }

    /// For compile-time constants that are known to be absolute.
    pub fn from_static(value: &'static str) -> Self {
        debug_assert!(has_scheme(value));
        Self(value.to_owned())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }

    /// Part after the last `#` or `/`.
    pub fn local_name(&self) -> &str {
        let s = self.0.as_str();
        match s.rfind(['#', '/']) {
            Some(i) => &s[i + 1..],
            None => s,
        }
    }
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub(crate) fn has_scheme(s: &str) -> bool {
    let mut chars = s.char_indices();
    match chars.next() {
        Some((_, c)) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    for (_, c) in chars {
        if c == ':' {
            return true;
        }
        if !(c.is_ascii_alphanumeric() || c == '+' || c == '-' || c == '.') {
            return false;
        }
    }
    false
}

/// Literal with verbatim lexical form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    lexical: String,
    datatype: Iri,
    language: Option<String>,
}

impl Literal {
    /// Plain `xsd:string` literal.
    pub fn simple(lexical: impl Into<String>) -> Self {
        Self { lexical: lexical.into(), datatype: Iri::from_static(vocab::XSD_STRING), language: None }
    }

    pub fn typed(lexical: impl Into<String>, datatype: Iri) -> Self {
        Self { lexical: lexical.into(), datatype, language: None }
    }

    pub fn lang(lexical: impl Into<String>, tag: impl Into<String>) -> Result<Self, RdfError> {
        let tag = tag.into();
        if !valid_lang_tag(&tag) {
            return Err(RdfError::InvalidTerm(format!("bad language tag '{tag}'")));
        }
        Ok(Self { lexical: lexical.into(), datatype: Iri::from_static(vocab::RDF_LANG_STRING), language: Some(tag) })
    }

    pub fn integer(value: i64) -> Self {
        Self::typed(value.to_string(), Iri::from_static(vocab::XSD_INTEGER))
    }

    pub fn lexical(&self) -> &str {
        &self.lexical
    }

    pub fn datatype(&self) -> &Iri {
        &self.datatype
    }

    pub fn language(&self) -> Option<&str> {
        self.language.as_deref()
    }

    pub fn is_simple(&self) -> bool {
        self.language.is_none() && self.datatype.as_str() == vocab::XSD_STRING
    }
}

pub(crate) fn valid_lang_tag(tag: &str) -> bool {
    let mut parts = tag.split('-');
    let first = parts.next().unwrap_or("");
    !first.is_empty()
        && first.chars().all(|c| c.is_ascii_alphabetic())
        && parts.all(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_alphanumeric()))
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RdfTerm {
    Iri(Iri),
    BlankNode(String),
    Literal(Literal),
}

impl RdfTerm {
    pub fn iri(value: impl Into<String>) -> Result<Self, RdfError> {
        Iri::new(value).map(RdfTerm::Iri)
    }

    pub fn as_iri(&self) -> Option<&Iri> {
        match self {
            RdfTerm::Iri(i) => Some(i),
            _ => None,
        }
    }

    pub fn as_literal(&self) -> Option<&Literal> {
        match self {
            RdfTerm::Literal(l) => Some(l),
            _ => None,
        }
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, RdfTerm::Literal(_))
    }

    /// IRI string, literal lexical form or blank node label.
    pub fn string_value(&self) -> &str {
        match self {
            RdfTerm::Iri(i) => i.as_str(),
            RdfTerm::BlankNode(b) => b,
            RdfTerm::Literal(l) => l.lexical(),
        }
    }
}

impl From<Iri> for RdfTerm {
    fn from(value: Iri) -> Self {
        RdfTerm::Iri(value)
    }
}

impl From<Literal> for RdfTerm {
    fn from(value: Literal) -> Self {
        RdfTerm::Literal(value)
    }
}

/// N-Triples style rendering.
impl fmt::Display for RdfTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RdfTerm::Iri(i) => write!(f, "<{i}>"),
            RdfTerm::BlankNode(b) => write!(f, "_:{b}"),
            RdfTerm::Literal(l) => {
                write!(f, "\"{}\"", escape_string(l.lexical()))?;
                if let Some(tag) = l.language() {
                    write!(f, "@{tag}")
                } else if l.datatype().as_str() != vocab::XSD_STRING {
                    write!(f, "^^<{}>", l.datatype())
                } else {
                    Ok(())
                }
            }
        }
    }
}

pub(crate) fn escape_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 || c == '\u{7f}' => out.push_str(&format!("\\u{:04X}", c as u32)),
            c => out.push(c),
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    subject: RdfTerm,
    predicate: Iri,
    object: RdfTerm,
}

impl Triple {
    pub fn new(subject: RdfTerm, predicate: Iri, object: RdfTerm) -> Result<Self, RdfError> {
        if subject.is_literal() {
            return Err(RdfError::InvalidTerm("literal in subject position".into()));
        }
        Ok(Self { subject, predicate, object })
    }

    pub fn subject(&self) -> &RdfTerm {
        &self.subject
    }

    pub fn predicate(&self) -> &Iri {
        &self.predicate
    }

    pub fn object(&self) -> &RdfTerm {
        &self.object
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} <{}> {} .", self.subject, self.predicate, self.object)
    }
}

/// Set of triples plus a prefix map.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Graph {
    triples: BTreeSet<Triple>,
    prefixes: BTreeMap<String, String>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false when the triple was already present.
    pub fn insert(&mut self, triple: Triple) -> bool {
        self.triples.insert(triple)
    }

    pub fn add_prefix(&mut self, label: impl Into<String>, namespace: impl Into<String>) {
        self.prefixes.insert(label.into(), namespace.into());
    }

    pub fn prefixes(&self) -> &BTreeMap<String, String> {
        &self.prefixes
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.triples.contains(triple)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    pub fn subjects(&self) -> BTreeSet<&RdfTerm> {
        self.triples.iter().map(|t| &t.subject).collect()
    }

    pub fn with_subject<'g, 's>(&'g self, subject: &'s RdfTerm) -> impl Iterator<Item = &'g Triple> + use<'g, 's> {
        self.triples.iter().filter(move |t| &t.subject == subject)
    }

    pub fn extend(&mut self, other: Graph) {
        self.triples.extend(other.triples);
        for (k, v) in other.prefixes {
            self.prefixes.entry(k).or_insert(v);
        }
    }
}

impl FromIterator<Triple> for Graph {
    fn from_iter<I: IntoIterator<Item = Triple>>(iter: I) -> Self {
        Self { triples: iter.into_iter().collect(), prefixes: BTreeMap::new() }
    }
}

/// Partial map from variable name (without `?`) to term.
pub type Solution = BTreeMap<String, RdfTerm>;

/// Ordered bag of solutions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SolutionSequence {
    pub variables: Vec<String>,
    pub rows: Vec<Solution>,
}

impl SolutionSequence {
    pub fn new(variables: Vec<String>, rows: Vec<Solution>) -> Self {
        Self { variables, rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows as a sorted list, for multiset comparison.
    pub fn multiset(&self) -> Vec<Solution> {
        let mut rows = self.rows.clone();
        rows.sort();
        rows
    }

    /// Multiset equality of rows, ignoring row order and the variable list.
    pub fn bag_eq(&self, other: &SolutionSequence) -> bool {
        self.rows.len() == other.rows.len() && self.multiset() == other.multiset()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iri_requires_scheme() {
        assert!(Iri::new("http://x/y").is_ok());
        assert!(Iri::new("urn:a").is_ok());
        assert!(Iri::new("vocab/x").is_err());
        assert!(Iri::new("").is_err());
        assert!(Iri::new("1http://x").is_err());
    }

    #[test]
    fn local_name_splits_on_hash_and_slash() {
        assert_eq!(Iri::from_static("http://a/b#Ticket").local_name(), "Ticket");
        assert_eq!(Iri::from_static("http://a/vocab/ost_ticket").local_name(), "ost_ticket");
    }

    #[test]
    fn language_only_on_lang_string() {
        let l = Literal::lang("hi", "en-GB").unwrap();
        assert_eq!(l.datatype().as_str(), vocab::RDF_LANG_STRING);
        assert!(Literal::lang("hi", "").is_err());
        assert!(Literal::simple("x").language().is_none());
    }

    #[test]
    fn literal_subject_rejected() {
        let err = Triple::new(
            RdfTerm::Literal(Literal::simple("x")),
            Iri::from_static(vocab::RDF_TYPE),
            RdfTerm::Literal(Literal::simple("y")),
        );
        assert!(err.is_err());
    }

    #[test]
    fn graph_has_set_semantics() {
        let t = Triple::new(
            RdfTerm::iri("http://a/s").unwrap(),
            Iri::from_static(vocab::RDF_TYPE),
            RdfTerm::iri("http://a/C").unwrap(),
        )
        .unwrap();
        let mut g = Graph::new();
        assert!(g.insert(t.clone()));
        assert!(!g.insert(t));
        assert_eq!(g.len(), 1);
    }

    #[test]
    fn display_escapes() {
        let t = RdfTerm::Literal(Literal::simple("\"No Video\" error\n"));
        assert_eq!(t.to_string(), "\"\\\"No Video\\\" error\\n\"");
        let n = RdfTerm::Literal(Literal::integer(1149));
        assert_eq!(n.to_string(), format!("\"1149\"^^<{}>", vocab::XSD_INTEGER));
    }
}
