use std::collections::{BTreeMap, BTreeSet};

use super::AlignError;
use crate::rdf::{parse_turtle, serialize_turtle, vocab, Graph, Iri, Literal, RdfTerm, Triple};

const OWL_CLASS: &str = "http://www.w3.org/2002/07/owl#Class";
const OWL_ONTOLOGY: &str = "http://www.w3.org/2002/07/owl#Ontology";
const OWL_OBJECT_PROPERTY: &str = "http://www.w3.org/2002/07/owl#ObjectProperty";
const OWL_DATATYPE_PROPERTY: &str = "http://www.w3.org/2002/07/owl#DatatypeProperty";
const RDFS_CLASS: &str = "http://www.w3.org/2000/01/rdf-schema#Class";
const RDF_PROPERTY: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#Property";
const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";
const RDFS_COMMENT: &str = "http://www.w3.org/2000/01/rdf-schema#comment";
const RDFS_SUBCLASS: &str = "http://www.w3.org/2000/01/rdf-schema#subClassOf";
const RDFS_SUBPROPERTY: &str = "http://www.w3.org/2000/01/rdf-schema#subPropertyOf";
const RDFS_DOMAIN: &str = "http://www.w3.org/2000/01/rdf-schema#domain";
const RDFS_RANGE: &str = "http://www.w3.org/2000/01/rdf-schema#range";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PropertyKind {
    Object,
    Datatype,
    Plain,
}

impl PropertyKind {
    fn type_iri(self) -> &'static str {
        match self {
            PropertyKind::Object => OWL_OBJECT_PROPERTY,
            PropertyKind::Datatype => OWL_DATATYPE_PROPERTY,
            PropertyKind::Plain => RDF_PROPERTY,
        }
    }
}

/// Classes, properties and their RDFS/OWL-lite axioms.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OntologyModel {
    pub prefixes: BTreeMap<String, String>,
    /// The `owl:Ontology` header IRI, if any.
    pub ontology: Option<Iri>,
    pub classes: BTreeSet<Iri>,
    pub properties: BTreeMap<Iri, PropertyKind>,
    pub labels: BTreeMap<Iri, String>,
    pub comments: BTreeMap<Iri, String>,
    pub sub_class_of: BTreeSet<(Iri, Iri)>,
    pub sub_property_of: BTreeSet<(Iri, Iri)>,
    pub domains: BTreeSet<(Iri, Iri)>,
    pub ranges: BTreeSet<(Iri, Iri)>,
    /// Triples that were not understood, as N-Triples lines.
    pub warnings: Vec<String>,
}

impl OntologyModel {
    pub fn is_class(&self, iri: &Iri) -> bool {
        self.classes.contains(iri)
    }

    pub fn is_property(&self, iri: &Iri) -> bool {
        self.properties.contains_key(iri)
    }

    pub fn superclasses(&self, class: &Iri) -> Vec<&Iri> {
        self.sub_class_of.iter().filter(|(c, _)| c == class).map(|(_, s)| s).collect()
    }

    /// Superclasses that the model references but does not declare.
    pub fn external_superclasses(&self) -> BTreeSet<&Iri> {
        self.sub_class_of.iter().map(|(_, s)| s).filter(|s| !self.classes.contains(*s)).collect()
    }

    /// Prefix label whose namespace covers `iri`, longest namespace first.
    pub fn prefix_for(&self, iri: &Iri) -> Option<(&str, &str)> {
        self.prefixes
            .iter()
            .filter(|(_, ns)| !ns.is_empty() && iri.as_str().starts_with(ns.as_str()))
            .max_by_key(|(_, ns)| ns.len())
            .map(|(l, ns)| (l.as_str(), ns.as_str()))
    }

    fn check_acyclic(&self) -> Result<(), AlignError> {
        let mut edges: BTreeMap<&Iri, Vec<&Iri>> = BTreeMap::new();
        for (c, s) in &self.sub_class_of {
            edges.entry(c).or_default().push(s);
        }
        // 0 unvisited, 1 on stack, 2 done
        let mut state: BTreeMap<&Iri, u8> = BTreeMap::new();
        fn visit<'a>(
            n: &'a Iri,
            edges: &BTreeMap<&'a Iri, Vec<&'a Iri>>,
            state: &mut BTreeMap<&'a Iri, u8>,
        ) -> Result<(), AlignError> {
            match state.get(n) {
                Some(1) => return Err(AlignError::Cycle(n.to_string())),
                Some(2) => return Ok(()),
                _ => {}
            }
            state.insert(n, 1);
            for m in edges.get(n).into_iter().flatten() {
                visit(m, edges, state)?;
            }
            state.insert(n, 2);
            Ok(())
        }
        for n in edges.keys() {
            visit(n, &edges, &mut state)?;
        }
        Ok(())
    }

    pub fn to_graph(&self) -> Graph {
        let mut g = Graph::new();
        for (l, ns) in &self.prefixes {
            g.add_prefix(l, ns);
        }
        let ty = Iri::from_static(vocab::RDF_TYPE);
        let mut add = |s: &Iri, p: &str, o: RdfTerm| {
            g.insert(Triple::new(RdfTerm::Iri(s.clone()), Iri::new(p).expect("absolute"), o).expect("iri subject"));
        };
        let iri = |s: &str| RdfTerm::Iri(Iri::new(s).expect("absolute"));
        if let Some(o) = &self.ontology {
            add(o, vocab::RDF_TYPE, iri(OWL_ONTOLOGY));
        }
        for c in &self.classes {
            add(c, ty.as_str(), iri(OWL_CLASS));
        }
        for (p, k) in &self.properties {
            add(p, ty.as_str(), iri(k.type_iri()));
        }
        for (t, l) in &self.labels {
            add(t, RDFS_LABEL, RdfTerm::Literal(Literal::simple(l.clone())));
        }
        for (t, l) in &self.comments {
            add(t, RDFS_COMMENT, RdfTerm::Literal(Literal::simple(l.clone())));
        }
        for (set, p) in [
            (&self.sub_class_of, RDFS_SUBCLASS),
            (&self.sub_property_of, RDFS_SUBPROPERTY),
            (&self.domains, RDFS_DOMAIN),
            (&self.ranges, RDFS_RANGE),
        ] {
            for (a, b) in set {
                add(a, p, RdfTerm::Iri(b.clone()));
            }
        }
        g
    }

    pub fn serialize(&self) -> String {
        serialize_turtle(&self.to_graph())
    }
}

/// Reads an RDFS/OWL-lite ontology from Turtle. Blank nodes and
/// constructs beyond declarations, labels, hierarchy and domain/range are
/// skipped and listed in `warnings`.
pub fn load_ontology(text: &str) -> Result<OntologyModel, AlignError> {
    let g = parse_turtle(text, None)?;
    let mut m = OntologyModel { prefixes: g.prefixes().clone(), ..OntologyModel::default() };
    for t in g.iter() {
        let RdfTerm::Iri(s) = t.subject() else {
            m.warnings.push(format!("ignored: {t}"));
            continue;
        };
        let obj_iri = t.object().as_iri();
        let obj_lit = t.object().as_literal();
        match (t.predicate().as_str(), obj_iri.map(Iri::as_str), obj_lit) {
            (vocab::RDF_TYPE, Some(OWL_CLASS | RDFS_CLASS), _) => {
                m.classes.insert(s.clone());
            }
            (vocab::RDF_TYPE, Some(OWL_ONTOLOGY), _) => m.ontology = Some(s.clone()),
            (vocab::RDF_TYPE, Some(k @ (OWL_OBJECT_PROPERTY | OWL_DATATYPE_PROPERTY | RDF_PROPERTY)), _) => {
                let kind = match k {
                    OWL_OBJECT_PROPERTY => PropertyKind::Object,
                    OWL_DATATYPE_PROPERTY => PropertyKind::Datatype,
                    _ => PropertyKind::Plain,
                };
                let e = m.properties.entry(s.clone()).or_insert(kind);
                // the more specific OWL kind wins over rdf:Property
                if *e == PropertyKind::Plain {
                    *e = kind;
                }
            }
            (RDFS_LABEL, _, Some(l)) => {
                m.labels.insert(s.clone(), l.lexical().to_owned());
            }
            (RDFS_COMMENT, _, Some(l)) => {
                m.comments.insert(s.clone(), l.lexical().to_owned());
            }
            (RDFS_SUBCLASS, Some(_), _) => {
                m.sub_class_of.insert((s.clone(), obj_iri.cloned().expect("iri")));
            }
            (RDFS_SUBPROPERTY, Some(_), _) => {
                m.sub_property_of.insert((s.clone(), obj_iri.cloned().expect("iri")));
            }
            (RDFS_DOMAIN, Some(_), _) => {
                m.domains.insert((s.clone(), obj_iri.cloned().expect("iri")));
            }
            (RDFS_RANGE, Some(_), _) => {
                m.ranges.insert((s.clone(), obj_iri.cloned().expect("iri")));
            }
            _ => m.warnings.push(format!("ignored: {t}")),
        }
    }
    m.check_acyclic()?;
    Ok(m)
}
