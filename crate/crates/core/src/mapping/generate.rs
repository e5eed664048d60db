use std::collections::BTreeMap;

use super::{
    BridgeSource, ClassMap, DatabaseBlock, MappingDocument, PropertyBridge, QualifiedColumn, UriPattern,
    MASKED_PASSWORD, MASKED_USER,
};
use crate::rdf::{vocab, Iri};
use crate::relational::{ConnectionSpec, RelationalCatalog, Table, TypeClass};

#[derive(Clone, Debug)]
pub struct GenerateOptions {
    /// Server base IRI the document resolves against.
    pub base: String,
    /// Namespace for generated classes and properties; `<base>vocab/` when
    /// unset.
    pub vocab_namespace: Option<String>,
    /// Write fixed masks instead of the real username and password.
    pub mask_credentials: bool,
    /// `table.column` entries that get no property bridge.
    pub exclude_columns: Vec<String>,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self {
            base: "http://localhost:2020/".into(),
            vocab_namespace: None,
            mask_credentials: true,
            exclude_columns: Vec::new(),
        }
    }
}

/// XSD datatype for a declared column type; `None` means plain string.
pub(crate) fn xsd_for(sql_type: &str) -> Option<Iri> {
    let dt = match TypeClass::of(sql_type) {
        TypeClass::Integer => vocab::XSD_INTEGER,
        TypeClass::Decimal => vocab::XSD_DECIMAL,
        TypeClass::Boolean => vocab::XSD_BOOLEAN,
        TypeClass::DateTime => vocab::XSD_DATE_TIME,
        TypeClass::Text => return None,
    };
    Some(Iri::from_static(dt))
}

fn local(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' }).collect()
}

fn term(ns: &str, name: &str) -> Iri {
    // the namespace is absolute, so the IRI is too
    Iri::new(format!("{ns}{}", local(name))).unwrap_or_else(|_| Iri::from_static(vocab::RDFS))
}

fn class_map(t: &Table, ns: &str, excluded: &[String]) -> ClassMap {
    let key: Vec<&str> = if t.primary_key.is_empty() {
        t.columns.iter().map(|c| c.name.as_str()).collect()
    } else {
        t.primary_key.iter().map(String::as_str).collect()
    };
    let key_cols: Vec<QualifiedColumn> = key.iter().map(|c| QualifiedColumn::new(&t.name, *c)).collect();
    let mut bridges = Vec::new();
    for c in &t.columns {
        let qc = QualifiedColumn::new(&t.name, &c.name);
        if t.is_fk_column(&c.name) || excluded.contains(&qc.to_string()) {
            continue;
        }
        let name = format!("{}_{}", t.name, c.name);
        bridges.push(PropertyBridge {
            name: local(&name),
            property: term(ns, &name),
            source: BridgeSource::Column(qc),
            datatype: xsd_for(&c.sql_type),
            label: Some(format!("{} {}", t.name, c.name)),
            annotations: Vec::new(),
        });
    }
    for fk in &t.foreign_keys {
        let name = format!("{}_{}", t.name, fk.columns.join("_"));
        let mut on: Vec<_> = fk
            .columns
            .iter()
            .zip(&fk.referenced_columns)
            .map(|(l, r)| (QualifiedColumn::new(&t.name, l), QualifiedColumn::new(&fk.referenced_table, r)))
            .collect();
        on.sort();
        bridges.push(PropertyBridge {
            name: format!("{}__ref", local(&name)),
            property: term(ns, &name),
            source: BridgeSource::UriJoin { target: local(&fk.referenced_table), on },
            datatype: None,
            label: Some(format!("{} {}", t.name, fk.columns.join(" "))),
            annotations: Vec::new(),
        });
    }
    bridges.sort_by(|a, b| a.name.cmp(&b.name));
    ClassMap {
        name: local(&t.name),
        table: t.name.clone(),
        uri_pattern: UriPattern::from_columns(&format!("{}/", t.name), &key_cols),
        class_iri: term(ns, &t.name),
        label: Some(t.name.clone()),
        bridges,
        annotations: Vec::new(),
    }
}

/// One ClassMap per table, one bridge per non-FK column and one per
/// foreign key, all in the generated vocabulary.
pub fn generate_mapping(catalog: &RelationalCatalog, conn: &ConnectionSpec, opts: &GenerateOptions) -> MappingDocument {
    let ns = opts.vocab_namespace.clone().unwrap_or_else(|| format!("{}vocab/", opts.base));
    let mut connection = ConnectionSpec {
        locator: conn.locator.clone(),
        username: conn.username.clone(),
        password: conn.password.clone(),
        properties: BTreeMap::from([
            ("autoReconnect".to_owned(), "true".to_owned()),
            ("zeroDateTimeBehavior".to_owned(), "convertToNull".to_owned()),
        ]),
    };
    if opts.mask_credentials {
        connection.username = MASKED_USER.into();
        connection.password = MASKED_PASSWORD.into();
    }
    let mut class_maps: Vec<ClassMap> =
        catalog.tables.iter().map(|t| class_map(t, &ns, &opts.exclude_columns)).collect();
    class_maps.sort_by(|a, b| a.name.cmp(&b.name));
    MappingDocument {
        base: opts.base.clone(),
        extra_prefixes: BTreeMap::new(),
        database: DatabaseBlock {
            name: "database".into(),
            driver: conn.driver_class().into(),
            connection,
            annotations: Vec::new(),
        },
        class_maps,
    }
}
