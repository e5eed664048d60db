//! Helpdesk demo: two heterogeneous ticketing stores, the reference
//! ontology, reviewed alignments, query files and the scalability harness.

pub mod bench;
mod fixtures;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

pub use fixtures::{
    build_fixtures, generate, DemoLayout, FixtureData, FixtureSpec, Variant, GLPI_ALIGNMENT, GOLDEN_QUERIES,
    NO_VIDEO_QUERY, OSTICKET_ALIGNMENT, SOLUTIONS_QUERY,
};

use crate::align::{apply_alignment, load_ontology, parse_alignment, AlignError};
use crate::mapping::{generate_mapping, GenerateOptions, MappingDocument};
use crate::relational::{introspect, ConnectionSpec, StoreError};

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("fixture store: {0}")]
    Sqlite(#[from] rusqlite::Error),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error("{0}")]
    Other(String),
}

/// `sqlite:` locator for a fixture store.
pub fn dsn(path: &Path) -> String {
    format!("sqlite:{}", path.display())
}

/// Generated mapping for one fixture store, served under `base`.
pub fn generated_mapping(db: &Path, base: &str, mask: &[String]) -> Result<MappingDocument, DemoError> {
    let conn = ConnectionSpec::new(dsn(db));
    let catalog = introspect(&conn)?;
    let opts = GenerateOptions { base: base.to_owned(), exclude_columns: mask.to_vec(), ..GenerateOptions::default() };
    Ok(generate_mapping(&catalog, &conn, &opts))
}

/// Prefixes an alignment file for `doc` may use.
pub fn alignment_prefixes(
    doc: &MappingDocument,
    ontology_prefixes: &BTreeMap<String, String>,
) -> BTreeMap<String, String> {
    let mut p = ontology_prefixes.clone();
    p.insert("vocab".into(), doc.vocab_namespace());
    p
}

/// Generated mapping rewritten with the demo alignment for `variant`.
pub fn aligned_mapping(
    layout: &DemoLayout,
    variant: Variant,
    base: &str,
    mask: &[String],
) -> Result<MappingDocument, DemoError> {
    let doc = generated_mapping(layout.db(variant), base, mask)?;
    let onto = load_ontology(&fs::read_to_string(&layout.ontology)?)?;
    let text = fs::read_to_string(layout.alignment(variant))?;
    let a = parse_alignment(&text, &alignment_prefixes(&doc, &onto.prefixes))?;
    Ok(apply_alignment(&doc, &a, &onto)?)
}

/// Predefined queries offered by the gateway, as JSON.
pub fn examples_manifest() -> serde_json::Value {
    serde_json::json!([
        {
            "name": "No Video tickets",
            "description": "Tickets from any site about the \"No Video\" problem",
            "mode": "mediated",
            "query": NO_VIDEO_QUERY,
        },
        {
            "name": "No Video solutions",
            "description": "Solutions from any site for tickets about the \"No Video\" problem",
            "mode": "mediated",
            "query": SOLUTIONS_QUERY,
        },
        {
            "name": "Ticket ids",
            "description": "First ticket ids per site (authored example)",
            "mode": "mediated",
            "query": GOLDEN_QUERIES[2].1,
        },
        {
            "name": "Classes in use",
            "description": "Distinct classes per site (authored example)",
            "mode": "mediated",
            "query": GOLDEN_QUERIES[4].1,
        },
    ])
}
