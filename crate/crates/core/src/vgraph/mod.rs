//! Virtual RDF view over a relational store: SPARQL basic graph patterns
//! are rewritten into SQL at query time, so answers always reflect the
//! current rows.

mod reference;
mod translate;

use std::collections::{HashMap, HashSet};

use thiserror::Error;

pub use reference::GraphSource;
pub use translate::{translate_bgp, Constructor, TranslationUnit, MAX_COMBINATIONS};

use crate::mapping::{BridgeSource, ClassMap, MappingDocument, MappingError};
use crate::par::{self, Execution};
use crate::rdf::{vocab, Graph, Iri, RdfTerm, Solution, SolutionSequence, Triple};
use crate::relational::{
    Cell, ColumnRef, ConnectionSpec, RelationalCatalog, SelectColumn, SqlSelect, Store, StoreError, StoreOptions,
    TableRef,
};
use crate::sparql::{evaluate_algebra, AlgebraExpr, Expr, PatternSource, ServiceTarget, TermPattern, TriplePattern};

#[derive(Debug, Error)]
pub enum VirtualError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

/// A mapping bound to a live store.
pub struct VirtualGraph {
    doc: MappingDocument,
    catalog: RelationalCatalog,
    store: Store,
    execution: Execution,
}

impl VirtualGraph {
    /// Opens the store named by the mapping's database block and checks
    /// the mapping against its schema.
    pub fn open(doc: MappingDocument, opts: StoreOptions) -> Result<Self, VirtualError> {
        let store = Store::open(&doc.database.connection, opts)?;
        Self::with_store(doc, store)
    }

    pub fn with_store(doc: MappingDocument, store: Store) -> Result<Self, VirtualError> {
        let catalog = store.introspect()?;
        doc.validate(&catalog)?;
        Ok(Self { doc, catalog, store, execution: Execution::default() })
    }

    /// How translation units and ClassMap scans are spread over threads.
    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn document(&self) -> &MappingDocument {
        &self.doc
    }

    pub fn catalog(&self) -> &RelationalCatalog {
        &self.catalog
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn evaluate(&self, algebra: &AlgebraExpr) -> Result<SolutionSequence, VirtualError> {
        evaluate_algebra(self, algebra, false)
    }

    /// Every triple the mapping defines, built from independent full-table
    /// scans with joins done in memory.
    pub fn materialize(&self) -> Result<Graph, VirtualError> {
        let parts = par::map(self.execution, &self.doc.class_maps, |cm| {
            let mut g = Graph::new();
            self.materialize_class_map(cm, &mut g).map(|_| g)
        });
        let mut g = Graph::new();
        for part in parts {
            g.extend(part?);
        }
        Ok(g)
    }

    fn scan(&self, table: &str, columns: &[String]) -> Result<Vec<Vec<Cell>>, VirtualError> {
        let q = SqlSelect {
            columns: columns
                .iter()
                .enumerate()
                .map(|(i, c)| SelectColumn { column: ColumnRef::new("t0", c), alias: format!("c{i}") })
                .collect(),
            from: vec![TableRef { table: table.to_owned(), alias: "t0".into() }],
            ..SqlSelect::default()
        };
        Ok(self.store.execute(&q)?.rows)
    }

    fn subject(&self, cm: &ClassMap, row: &[Cell], n: usize) -> Option<RdfTerm> {
        let values: Option<Vec<String>> = row[..n].iter().map(Cell::lexical).collect();
        RdfTerm::iri(self.doc.resource_iri(cm, &values?)).ok()
    }

    fn materialize_class_map(&self, cm: &ClassMap, g: &mut Graph) -> Result<(), VirtualError> {
        let key: Vec<String> = cm.uri_pattern.columns().iter().map(|c| c.column.clone()).collect();
        let mut cols = key.clone();
        let at = |c: &str, cols: &mut Vec<String>| match cols.iter().position(|x| x == c) {
            Some(i) => i,
            None => {
                cols.push(c.to_owned());
                cols.len() - 1
            }
        };
        let mut positions = Vec::new();
        for b in &cm.bridges {
            positions.push(match &b.source {
                BridgeSource::Column(c) => vec![at(&c.column, &mut cols)],
                BridgeSource::UriJoin { on, .. } => on.iter().map(|(l, _)| at(&l.column, &mut cols)).collect(),
            });
        }
        let rows = self.scan(&cm.table, &cols)?;
        let rdf_type = Iri::from_static(vocab::RDF_TYPE);

        // remote side of every join: key tuple -> target subjects
        let mut targets: Vec<Option<HashMap<Vec<String>, Vec<RdfTerm>>>> = Vec::new();
        for b in &cm.bridges {
            let BridgeSource::UriJoin { target, on } = &b.source else {
                targets.push(None);
                continue;
            };
            let Some(tcm) = self.doc.class_map(target) else {
                targets.push(None);
                continue;
            };
            let tkey: Vec<String> = tcm.uri_pattern.columns().iter().map(|c| c.column.clone()).collect();
            let n = tkey.len();
            let mut tcols = tkey;
            tcols.extend(on.iter().map(|(_, r)| r.column.clone()));
            let mut index: HashMap<Vec<String>, Vec<RdfTerm>> = HashMap::new();
            for r in self.scan(&tcm.table, &tcols)? {
                let Some(s) = self.subject(tcm, &r, n) else {
                    continue;
                };
                let k: Option<Vec<String>> = r[n..].iter().map(Cell::lexical).collect();
                if let Some(k) = k {
                    index.entry(k).or_default().push(s);
                }
            }
            targets.push(Some(index));
        }

        for row in &rows {
            let Some(s) = self.subject(cm, row, key.len()) else {
                continue;
            };
            g.insert(
                Triple::new(s.clone(), rdf_type.clone(), RdfTerm::Iri(cm.class_iri.clone())).expect("iri subject"),
            );
            for ((b, pos), target) in cm.bridges.iter().zip(&positions).zip(&targets) {
                match target {
                    None => {
                        if let Some(l) = translate::literal(&row[pos[0]], b.datatype.as_ref()) {
                            g.insert(
                                Triple::new(s.clone(), b.property.clone(), RdfTerm::Literal(l)).expect("iri subject"),
                            );
                        }
                    }
                    Some(index) => {
                        let k: Option<Vec<String>> = pos.iter().map(|i| row[*i].lexical()).collect();
                        for o in k.and_then(|k| index.get(&k)).into_iter().flatten() {
                            g.insert(Triple::new(s.clone(), b.property.clone(), o.clone()).expect("iri subject"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Triples about `iri`, plus those pointing at it when `incoming` is
    /// set. `None` when no ClassMap can produce the IRI; an empty graph
    /// when one can but no row backs it.
    pub fn describe(&self, iri: &Iri, incoming: bool) -> Result<Option<Graph>, VirtualError> {
        if !self.doc.class_maps.iter().any(|cm| self.doc.match_resource(cm, iri.as_str()).is_some()) {
            return Ok(None);
        }
        let me = TermPattern::Term(RdfTerm::Iri(iri.clone()));
        let var = |v: &str| TermPattern::Var(v.into());
        let mut g = Graph::new();
        let out = TriplePattern::new(me.clone(), var("p"), var("o")).map_err(VirtualError::Unsupported)?;
        for sol in self.match_bgp(&[out], &[])? {
            if let (Some(RdfTerm::Iri(p)), Some(o)) = (sol.get("p"), sol.get("o")) {
                g.insert(Triple::new(RdfTerm::Iri(iri.clone()), p.clone(), o.clone()).expect("iri subject"));
            }
        }
        if incoming && !g.is_empty() {
            let inc = TriplePattern::new(var("s"), var("p"), me).map_err(VirtualError::Unsupported)?;
            for sol in self.match_bgp(&[inc], &[])? {
                if let (Some(s), Some(RdfTerm::Iri(p))) = (sol.get("s"), sol.get("p")) {
                    if let Ok(t) = Triple::new(s.clone(), p.clone(), RdfTerm::Iri(iri.clone())) {
                        g.insert(t);
                    }
                }
            }
        }
        Ok(Some(g))
    }

    /// Subject IRIs of every mapped row, ClassMap by ClassMap.
    pub fn subjects(&self) -> Result<Vec<Iri>, VirtualError> {
        let mut out = Vec::new();
        for cm in &self.doc.class_maps {
            let key: Vec<String> = cm.uri_pattern.columns().iter().map(|c| c.column.clone()).collect();
            for row in self.scan(&cm.table, &key)? {
                if let Some(RdfTerm::Iri(i)) = self.subject(cm, &row, key.len()) {
                    out.push(i);
                }
            }
        }
        Ok(out)
    }
}

impl PatternSource for VirtualGraph {
    type Error = VirtualError;

    /// Rows of each translation unit are checked against the full pattern
    /// in memory; SQL only narrows. Duplicate solutions collapse, since the
    /// virtual graph is a set of triples.
    fn match_bgp(&self, patterns: &[TriplePattern], filters: &[&Expr]) -> Result<Vec<Solution>, VirtualError> {
        if patterns.is_empty() {
            return Ok(vec![Solution::new()]);
        }
        let units = translate::translate_with(patterns, filters, &self.doc, &self.catalog, None)?;
        let results = par::map(self.execution, &units, |u| self.store.execute(&u.sql));
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (unit, rows) in units.iter().zip(results) {
            for row in rows?.rows {
                if let Some(sol) = unit.solution(&self.doc, &row) {
                    if seen.insert(sol.clone()) {
                        out.push(sol);
                    }
                }
            }
        }
        Ok(out)
    }

    fn service(&self, _: &ServiceTarget, _: &AlgebraExpr, _: bool) -> Result<Vec<Solution>, VirtualError> {
        Err(VirtualError::Unsupported("SERVICE in local evaluation".into()))
    }
}

/// Evaluates `algebra` over the virtual graph of `doc`, connecting with
/// `conn`.
pub fn evaluate(
    algebra: &AlgebraExpr,
    doc: &MappingDocument,
    conn: &ConnectionSpec,
) -> Result<SolutionSequence, VirtualError> {
    let mut doc = doc.clone();
    doc.database.connection = conn.clone();
    VirtualGraph::open(doc, StoreOptions::default())?.evaluate(algebra)
}

pub fn materialize(doc: &MappingDocument, conn: &ConnectionSpec) -> Result<Graph, VirtualError> {
    let mut doc = doc.clone();
    doc.database.connection = conn.clone();
    VirtualGraph::open(doc, StoreOptions::default())?.materialize()
}

pub fn describe(iri: &Iri, doc: &MappingDocument, conn: &ConnectionSpec) -> Result<Option<Graph>, VirtualError> {
    let mut doc = doc.clone();
    doc.database.connection = conn.clone();
    VirtualGraph::open(doc, StoreOptions::default())?.describe(iri, true)
}
