//! Relational databases exposed as virtual, read-only RDF graphs: mapping
//! generation, ontology alignment, SPARQL-to-SQL evaluation, per-site SPARQL
//! endpoints and a federation gateway that unifies results from many sites.

pub mod align;
pub mod demo;
pub mod endpoint;
pub mod federate;
pub mod mapping;
pub mod par;
pub mod rdf;
pub mod relational;
pub mod sparql;
pub mod vgraph;
