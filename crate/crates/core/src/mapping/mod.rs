//! The declarative table-to-RDF mapping: document model, the 1st-level
//! generator and the Turtle form.
//!
//! Relative IRIs in a mapping file resolve against the base IRI of the
//! server that loads it, so the same file can be served on any port.
//! Subject IRIs are `<base>resource/<expanded uriPattern>`.

mod generate;
mod syntax;

use std::collections::BTreeMap;
use std::fmt;

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use regex::Regex;
use thiserror::Error;

pub use generate::{generate_mapping, GenerateOptions};
pub use syntax::{parse_mapping, serialize_mapping, STANDARD_PREFIXES};

use crate::rdf::{Iri, RdfError, RdfTerm};
use crate::relational::{ConnectionSpec, RelationalCatalog};

/// Masks written in place of credentials.
pub const MASKED_USER: &str = "XXXXXXXX";
pub const MASKED_PASSWORD: &str = "XXXXX";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MappingError {
    #[error(transparent)]
    Turtle(#[from] RdfError),
    #[error("mapping has no d2rq:Database block")]
    MissingDatabase,
    #[error("{subject} lacks {property}")]
    MissingProperty { subject: String, property: String },
    #[error("bad uriPattern '{0}'")]
    BadPattern(String),
    #[error("bad column reference '{0}'")]
    BadColumn(String),
    #[error("bridge {bridge} refers to unknown ClassMap {target}")]
    DanglingJoin { bridge: String, target: String },
    #[error("bridge {bridge} belongs to unknown ClassMap {target}")]
    UnknownClassMap { bridge: String, target: String },
    #[error("mapping does not match the database: {0}")]
    Catalog(String),
}

/// `table.column`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QualifiedColumn {
    pub table: String,
    pub column: String,
}

impl QualifiedColumn {
    pub fn new(table: impl Into<String>, column: impl Into<String>) -> Self {
        Self { table: table.into(), column: column.into() }
    }

    pub fn parse(s: &str) -> Result<Self, MappingError> {
        match s.trim().split_once('.') {
            Some((t, c)) if !t.is_empty() && !c.is_empty() && !c.contains('.') => Ok(Self::new(t, c)),
            _ => Err(MappingError::BadColumn(s.to_owned())),
        }
    }
}

impl fmt::Display for QualifiedColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.table, self.column)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum PatternPart {
    Literal(String),
    Column(QualifiedColumn),
}

/// Characters left as-is when a value is substituted into a URI.
const VALUE_SET: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'.').remove(b'_').remove(b'~');

/// A `d2rq:uriPattern` such as `ost_ticket/@@ost_ticket.ticket_id@@`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct UriPattern {
    parts: Vec<PatternPart>,
}

impl UriPattern {
    pub fn parse(s: &str) -> Result<Self, MappingError> {
        let mut parts = Vec::new();
        let mut rest = s;
        while let Some(start) = rest.find("@@") {
            if start > 0 {
                parts.push(PatternPart::Literal(rest[..start].to_owned()));
            }
            let after = &rest[start + 2..];
            let end = after.find("@@").ok_or_else(|| MappingError::BadPattern(s.to_owned()))?;
            let col = QualifiedColumn::parse(&after[..end]).map_err(|_| MappingError::BadPattern(s.to_owned()))?;
            parts.push(PatternPart::Column(col));
            rest = &after[end + 2..];
        }
        if !rest.is_empty() {
            parts.push(PatternPart::Literal(rest.to_owned()));
        }
        let p = Self { parts };
        if p.columns().is_empty() {
            return Err(MappingError::BadPattern(s.to_owned()));
        }
        Ok(p)
    }

    pub fn from_columns(prefix: &str, cols: &[QualifiedColumn]) -> Self {
        let mut parts = vec![PatternPart::Literal(prefix.to_owned())];
        for (i, c) in cols.iter().enumerate() {
            if i > 0 {
                parts.push(PatternPart::Literal("/".into()));
            }
            parts.push(PatternPart::Column(c.clone()));
        }
        Self { parts }
    }

    pub fn parts(&self) -> &[PatternPart] {
        &self.parts
    }

    pub fn columns(&self) -> Vec<&QualifiedColumn> {
        self.parts
            .iter()
            .filter_map(|p| match p {
                PatternPart::Column(c) => Some(c),
                PatternPart::Literal(_) => None,
            })
            .collect()
    }

    /// The literal skeleton, identical for two patterns exactly when they
    /// differ only in which columns fill the holes.
    pub fn shape(&self) -> Vec<Option<&str>> {
        self.parts
            .iter()
            .map(|p| match p {
                PatternPart::Literal(l) => Some(l.as_str()),
                PatternPart::Column(_) => None,
            })
            .collect()
    }

    /// Leading literal text.
    pub fn literal_prefix(&self) -> &str {
        match self.parts.first() {
            Some(PatternPart::Literal(l)) => l,
            _ => "",
        }
    }

    /// Substitutes percent-encoded values, one per column in order.
    pub fn expand<S: AsRef<str>>(&self, values: &[S]) -> String {
        let mut out = String::new();
        let mut vals = values.iter();
        for p in &self.parts {
            match p {
                PatternPart::Literal(l) => out.push_str(l),
                PatternPart::Column(_) => {
                    if let Some(v) = vals.next() {
                        out.extend(utf8_percent_encode(v.as_ref(), VALUE_SET));
                    }
                }
            }
        }
        out
    }

    /// Inverse of [`expand`](Self::expand): the decoded column values that
    /// produce exactly `s`, if any.
    pub fn extract(&self, s: &str) -> Option<Vec<String>> {
        let mut re = String::from("^");
        for p in &self.parts {
            match p {
                PatternPart::Literal(l) => re.push_str(&regex::escape(l)),
                PatternPart::Column(_) => re.push_str("([A-Za-z0-9._~%-]*?)"),
            }
        }
        re.push('$');
        let caps = Regex::new(&re).ok()?.captures(s)?;
        let values: Option<Vec<String>> = caps
            .iter()
            .skip(1)
            .map(|m| percent_decode_str(m?.as_str()).decode_utf8().ok().map(|c| c.into_owned()))
            .collect();
        let values = values?;
        (self.expand(&values) == s).then_some(values)
    }
}

impl fmt::Display for UriPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.parts {
            match p {
                PatternPart::Literal(l) => f.write_str(l)?,
                PatternPart::Column(c) => write!(f, "@@{c}@@")?,
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatabaseBlock {
    /// Map name, `database` in generated files.
    pub name: String,
    pub driver: String,
    pub connection: ConnectionSpec,
    pub annotations: Vec<(Iri, RdfTerm)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BridgeSource {
    Column(QualifiedColumn),
    /// Object IRI of `target` taken from the row where every `(local,
    /// remote)` pair is equal.
    UriJoin {
        target: String,
        on: Vec<(QualifiedColumn, QualifiedColumn)>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PropertyBridge {
    pub name: String,
    pub property: Iri,
    pub source: BridgeSource,
    pub datatype: Option<Iri>,
    pub label: Option<String>,
    pub annotations: Vec<(Iri, RdfTerm)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassMap {
    pub name: String,
    pub table: String,
    pub uri_pattern: UriPattern,
    pub class_iri: Iri,
    pub label: Option<String>,
    pub bridges: Vec<PropertyBridge>,
    pub annotations: Vec<(Iri, RdfTerm)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MappingDocument {
    /// Server base IRI, ending in `/`.
    pub base: String,
    /// Prefixes beyond the standard block, e.g. `hdo`.
    pub extra_prefixes: BTreeMap<String, String>,
    pub database: DatabaseBlock,
    pub class_maps: Vec<ClassMap>,
}

impl MappingDocument {
    pub fn class_map(&self, name: &str) -> Option<&ClassMap> {
        self.class_maps.iter().find(|c| c.name == name)
    }

    /// `<base>vocab/`.
    pub fn vocab_namespace(&self) -> String {
        format!("{}vocab/", self.base)
    }

    pub fn resource_prefix(&self) -> String {
        format!("{}resource/", self.base)
    }

    /// Subject IRI of a row of `cm` given its pattern values.
    pub fn resource_iri<S: AsRef<str>>(&self, cm: &ClassMap, values: &[S]) -> String {
        let rel = cm.uri_pattern.expand(values);
        if crate::rdf::has_scheme(cm.uri_pattern.literal_prefix()) {
            rel
        } else {
            format!("{}{rel}", self.resource_prefix())
        }
    }

    /// Pattern values if `iri` is a subject IRI that `cm` can produce.
    pub fn match_resource(&self, cm: &ClassMap, iri: &str) -> Option<Vec<String>> {
        let rel = if crate::rdf::has_scheme(cm.uri_pattern.literal_prefix()) {
            iri
        } else {
            iri.strip_prefix(&self.resource_prefix())?
        };
        cm.uri_pattern.extract(rel)
    }

    /// Checks every table and column against a live catalog.
    pub fn validate(&self, catalog: &RelationalCatalog) -> Result<(), MappingError> {
        let check = |c: &QualifiedColumn| -> Result<(), MappingError> {
            let ok = catalog.table(&c.table).is_some_and(|t| t.column(&c.column).is_some());
            if ok {
                Ok(())
            } else {
                Err(MappingError::Catalog(format!("column {c} does not exist")))
            }
        };
        for cm in &self.class_maps {
            if catalog.table(&cm.table).is_none() {
                return Err(MappingError::Catalog(format!("table {} does not exist", cm.table)));
            }
            for c in cm.uri_pattern.columns() {
                check(c)?;
            }
            for b in &cm.bridges {
                match &b.source {
                    BridgeSource::Column(c) => check(c)?,
                    BridgeSource::UriJoin { on, .. } => {
                        for (l, r) in on {
                            check(l)?;
                            check(r)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Vocabulary terms used as classes and as properties.
    pub fn terms(&self) -> Vec<(Iri, TermKind)> {
        let mut out: Vec<(Iri, TermKind)> = Vec::new();
        for cm in &self.class_maps {
            out.push((cm.class_iri.clone(), TermKind::Class));
            for b in &cm.bridges {
                out.push((b.property.clone(), TermKind::Property));
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TermKind {
    Class,
    Property,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_round_trip() {
        let p = UriPattern::parse("ost_ticket/@@ost_ticket.ticket_id@@").unwrap();
        assert_eq!(p.to_string(), "ost_ticket/@@ost_ticket.ticket_id@@");
        assert_eq!(p.columns(), vec![&QualifiedColumn::new("ost_ticket", "ticket_id")]);
        assert_eq!(p.expand(&["1149"]), "ost_ticket/1149");
        assert_eq!(p.extract("ost_ticket/1149"), Some(vec!["1149".to_owned()]));
        assert_eq!(p.extract("glpi_tickets/1149"), None);
    }

    #[test]
    fn single_at_is_rejected() {
        assert!(UriPattern::parse("ost_ticket/@@ost_ticket.ticket_id@").is_err());
        assert!(UriPattern::parse("no_columns").is_err());
    }

    #[test]
    fn values_are_percent_encoded_injectively() {
        let p = UriPattern::parse("t/@@t.a@@/@@t.b@@").unwrap();
        let x = p.expand(&["a/b", "c"]);
        let y = p.expand(&["a", "b/c"]);
        assert_ne!(x, y);
        assert_eq!(x, "t/a%2Fb/c");
        assert_eq!(p.extract(&x), Some(vec!["a/b".to_owned(), "c".to_owned()]));
        assert_eq!(p.extract(&p.expand(&["ö x", ""])), Some(vec!["ö x".to_owned(), String::new()]));
    }
}
