use std::collections::BTreeMap;
use std::fmt::Write;

use super::{
    BridgeSource, ClassMap, DatabaseBlock, MappingDocument, MappingError, PropertyBridge, QualifiedColumn, UriPattern,
    MASKED_PASSWORD, MASKED_USER,
};
use crate::rdf::{compact_iri, escape_string, parse_turtle, vocab, write_term, Graph, Iri, RdfTerm};
use crate::relational::ConnectionSpec;

/// Prefix labels and (possibly relative) namespaces of the fixed block at
/// the top of every mapping file, in output order.
pub const STANDARD_PREFIXES: [(&str, &str); 8] = [
    ("map", "#"),
    ("db", ""),
    ("vocab", "vocab/"),
    ("rdf", vocab::RDF),
    ("rdfs", vocab::RDFS),
    ("xsd", vocab::XSD),
    ("d2rq", vocab::D2RQ),
    ("jdbc", vocab::JDBC),
];

fn d2rq(local: &str) -> String {
    format!("{}{local}", vocab::D2RQ)
}

fn absolute(base: &str, ns: &str) -> String {
    if crate::rdf::has_scheme(ns) {
        ns.to_owned()
    } else {
        format!("{base}{ns}")
    }
}

struct Reader<'a> {
    graph: &'a Graph,
    map_ns: String,
}

impl<'a> Reader<'a> {
    fn values<'g>(&self, s: &'g RdfTerm, p: &'g str) -> impl Iterator<Item = &'a RdfTerm> + 'g
    where
        'a: 'g,
    {
        self.graph.with_subject(s).filter(move |t| t.predicate().as_str() == p).map(|t| t.object())
    }

    fn one(&self, s: &RdfTerm, p: &str) -> Option<&'a RdfTerm> {
        self.values(s, p).next()
    }

    fn text(&self, s: &RdfTerm, p: &str) -> Option<String> {
        self.one(s, p).map(|o| o.string_value().to_owned())
    }

    fn required(&self, s: &RdfTerm, p: &str) -> Result<&'a RdfTerm, MappingError> {
        self.one(s, p).ok_or_else(|| MappingError::MissingProperty { subject: s.to_string(), property: p.to_owned() })
    }

    fn typed(&self, class: &str) -> Vec<&'a RdfTerm> {
        let mut out: Vec<&RdfTerm> = self
            .graph
            .iter()
            .filter(|t| {
                t.predicate().as_str() == vocab::RDF_TYPE && t.object().as_iri().is_some_and(|i| i.as_str() == class)
            })
            .map(|t| t.subject())
            .collect();
        out.dedup();
        out
    }

    fn name(&self, term: &RdfTerm) -> String {
        let s = term.string_value();
        s.strip_prefix(&self.map_ns).unwrap_or(s).to_owned()
    }

    fn annotations(&self, s: &RdfTerm, known: &[&str]) -> Vec<(Iri, RdfTerm)> {
        self.graph
            .with_subject(s)
            .filter(|t| t.predicate().as_str() != vocab::RDF_TYPE && !known.contains(&t.predicate().as_str()))
            .map(|t| (t.predicate().clone(), t.object().clone()))
            .collect()
    }
}

fn parse_join(s: &str) -> Result<(QualifiedColumn, QualifiedColumn), MappingError> {
    for sep in ["=>", "<=", "="] {
        if let Some((l, r)) = s.split_once(sep) {
            let (l, r) = (QualifiedColumn::parse(l)?, QualifiedColumn::parse(r)?);
            return Ok(if sep == "<=" { (r, l) } else { (l, r) });
        }
    }
    Err(MappingError::BadColumn(s.to_owned()))
}

/// Reads a mapping file whose relative IRIs resolve against `base`.
pub fn parse_mapping(text: &str, base: &str) -> Result<MappingDocument, MappingError> {
    let graph = parse_turtle(text, Some(base))?;
    let map_ns = graph.prefixes().get("map").cloned().unwrap_or_else(|| format!("{base}#"));
    let r = Reader { graph: &graph, map_ns };

    let db_known = [d2rq("jdbcDriver"), d2rq("jdbcDSN"), d2rq("username"), d2rq("password")];
    let db_subject = *r.typed(&d2rq("Database")).first().ok_or(MappingError::MissingDatabase)?;
    let mut properties = BTreeMap::new();
    let mut db_annotations = Vec::new();
    for (p, o) in r.annotations(db_subject, &db_known.iter().map(String::as_str).collect::<Vec<_>>()) {
        match p.as_str().strip_prefix(vocab::JDBC) {
            Some(local) => {
                properties.insert(local.to_owned(), o.string_value().to_owned());
            }
            None => db_annotations.push((p, o)),
        }
    }
    let database = DatabaseBlock {
        name: r.name(db_subject),
        driver: r.text(db_subject, &db_known[0]).unwrap_or_default(),
        connection: ConnectionSpec {
            locator: r.required(db_subject, &db_known[1])?.string_value().to_owned(),
            username: r.text(db_subject, &db_known[2]).unwrap_or_default(),
            password: r.text(db_subject, &db_known[3]).unwrap_or_default(),
            properties,
        },
        annotations: db_annotations,
    };

    let cm_known = [d2rq("dataStorage"), d2rq("uriPattern"), d2rq("class"), d2rq("classDefinitionLabel")];
    let cm_known_refs: Vec<&str> = cm_known.iter().map(String::as_str).collect();
    let mut class_maps = Vec::new();
    for s in r.typed(&d2rq("ClassMap")) {
        let raw = r.required(s, &cm_known[1])?.string_value();
        let uri_pattern = UriPattern::parse(raw)?;
        let cols = uri_pattern.columns();
        let table = cols[0].table.clone();
        if cols.iter().any(|c| c.table != table) {
            return Err(MappingError::BadPattern(raw.to_owned()));
        }
        let class_iri = r
            .required(s, &cm_known[2])?
            .as_iri()
            .cloned()
            .ok_or_else(|| MappingError::MissingProperty { subject: s.to_string(), property: cm_known[2].clone() })?;
        class_maps.push(ClassMap {
            name: r.name(s),
            table,
            uri_pattern,
            class_iri,
            label: r.text(s, &cm_known[3]),
            bridges: Vec::new(),
            annotations: r.annotations(s, &cm_known_refs),
        });
    }
    class_maps.sort_by(|a, b| a.name.cmp(&b.name));

    let pb_known = [
        d2rq("belongsToClassMap"),
        d2rq("property"),
        d2rq("column"),
        d2rq("refersToClassMap"),
        d2rq("join"),
        d2rq("datatype"),
        d2rq("propertyDefinitionLabel"),
    ];
    let pb_known_refs: Vec<&str> = pb_known.iter().map(String::as_str).collect();
    for s in r.typed(&d2rq("PropertyBridge")) {
        let name = r.name(s);
        let owner = r.name(r.required(s, &pb_known[0])?);
        let property = r
            .required(s, &pb_known[1])?
            .as_iri()
            .cloned()
            .ok_or_else(|| MappingError::MissingProperty { subject: s.to_string(), property: pb_known[1].clone() })?;
        let Some(cm_index) = class_maps.iter().position(|c| c.name == owner) else {
            return Err(MappingError::UnknownClassMap { bridge: name, target: owner });
        };
        let source = if let Some(target) = r.one(s, &pb_known[3]) {
            let target = r.name(target);
            let Some(target_cm) = class_maps.iter().find(|c| c.name == target) else {
                return Err(MappingError::DanglingJoin { bridge: name, target });
            };
            let mut on = Vec::new();
            for j in r.values(s, &pb_known[4]) {
                let (a, b) = parse_join(j.string_value())?;
                let own = &class_maps[cm_index].table;
                on.push(if a.table == *own { (a, b) } else { (b, a) });
            }
            if on.is_empty() || on.iter().any(|(_, b)| b.table != target_cm.table) {
                return Err(MappingError::MissingProperty { subject: s.to_string(), property: pb_known[4].clone() });
            }
            on.sort();
            BridgeSource::UriJoin { target, on }
        } else {
            let col = r.required(s, &pb_known[2])?.string_value();
            BridgeSource::Column(QualifiedColumn::parse(col)?)
        };
        let bridge = PropertyBridge {
            name,
            property,
            source,
            datatype: r.one(s, &pb_known[5]).and_then(|d| d.as_iri().cloned()),
            label: r.text(s, &pb_known[6]),
            annotations: r.annotations(s, &pb_known_refs),
        };
        class_maps[cm_index].bridges.push(bridge);
    }
    for cm in &mut class_maps {
        cm.bridges.sort_by(|a, b| a.name.cmp(&b.name));
    }

    let extra_prefixes = graph
        .prefixes()
        .iter()
        .filter(|(k, _)| !STANDARD_PREFIXES.iter().any(|(l, _)| l == k))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    Ok(MappingDocument { base: base.to_owned(), extra_prefixes, database, class_maps })
}

struct Writer<'a> {
    out: String,
    prefixes: BTreeMap<String, String>,
    map_ns: &'a str,
}

impl Writer<'_> {
    fn name(&self, n: &str) -> String {
        if crate::rdf::has_scheme(n) {
            compact_iri(n, &self.prefixes)
        } else {
            let full = format!("{}{n}", self.map_ns);
            compact_iri(&full, &self.prefixes)
        }
    }

    fn iri(&self, i: &Iri) -> String {
        compact_iri(i.as_str(), &self.prefixes)
    }

    fn open(&mut self, name: &str, class: &str) {
        let n = self.name(name);
        let _ = writeln!(self.out, "{n} a d2rq:{class};");
    }

    fn line(&mut self, p: &str, o: &str) {
        let _ = writeln!(self.out, "  {p} {o};");
    }

    fn string(&mut self, p: &str, s: &str) {
        let o = format!("\"{}\"", escape_string(s));
        self.line(p, &o);
    }

    fn annotations(&mut self, a: &[(Iri, RdfTerm)]) {
        for (p, o) in a {
            let p = self.iri(p);
            let o = write_term(o, &self.prefixes);
            self.line(&p, &o);
        }
    }

    fn close(&mut self) {
        self.out.push_str("  .\n\n");
    }
}

/// Canonical Turtle: the fixed prefix block, extra prefixes, the database
/// block, then each ClassMap followed by its bridges, all sorted by name.
pub fn serialize_mapping(doc: &MappingDocument) -> String {
    let mut prefixes: BTreeMap<String, String> =
        STANDARD_PREFIXES.iter().map(|(l, ns)| (l.to_string(), absolute(&doc.base, ns))).collect();
    prefixes.extend(doc.extra_prefixes.clone());
    let map_ns = format!("{}#", doc.base);
    let mut w = Writer { out: String::new(), prefixes, map_ns: &map_ns };
    for (label, ns) in STANDARD_PREFIXES {
        let _ = writeln!(w.out, "@prefix {label}: <{ns}> .");
    }
    w.out.push('\n');
    if !doc.extra_prefixes.is_empty() {
        for (label, ns) in &doc.extra_prefixes {
            let _ = writeln!(w.out, "@prefix {label}: <{ns}> .");
        }
        w.out.push('\n');
    }

    let db = &doc.database;
    w.open(&db.name, "Database");
    w.string("d2rq:jdbcDriver", &db.driver);
    w.string("d2rq:jdbcDSN", &db.connection.locator);
    // credentials are never written out in clear
    if !db.connection.username.is_empty() {
        w.string("d2rq:username", MASKED_USER);
    }
    if !db.connection.password.is_empty() {
        w.string("d2rq:password", MASKED_PASSWORD);
    }
    for (k, v) in &db.connection.properties {
        w.string(&format!("jdbc:{k}"), v);
    }
    w.annotations(&db.annotations);
    w.close();

    let db_ref = w.name(&db.name);
    for cm in &doc.class_maps {
        let _ = writeln!(w.out, "# Table {}", cm.table);
        w.open(&cm.name, "ClassMap");
        w.line("d2rq:dataStorage", &db_ref);
        w.string("d2rq:uriPattern", &cm.uri_pattern.to_string());
        let class = w.iri(&cm.class_iri);
        w.line("d2rq:class", &class);
        if let Some(l) = &cm.label {
            w.string("d2rq:classDefinitionLabel", l);
        }
        w.annotations(&cm.annotations);
        w.close();
        let owner = w.name(&cm.name);
        for b in &cm.bridges {
            w.open(&b.name, "PropertyBridge");
            w.line("d2rq:belongsToClassMap", &owner);
            let p = w.iri(&b.property);
            w.line("d2rq:property", &p);
            if let Some(l) = &b.label {
                w.string("d2rq:propertyDefinitionLabel", l);
            }
            match &b.source {
                BridgeSource::Column(c) => w.string("d2rq:column", &c.to_string()),
                BridgeSource::UriJoin { target, on } => {
                    let t = w.name(target);
                    w.line("d2rq:refersToClassMap", &t);
                    for (l, r) in on {
                        w.string("d2rq:join", &format!("{l} => {r}"));
                    }
                }
            }
            if let Some(dt) = &b.datatype {
                let d = w.iri(dt);
                w.line("d2rq:datatype", &d);
            }
            w.annotations(&b.annotations);
            w.close();
        }
    }
    w.out.truncate(w.out.trim_end().len());
    w.out.push('\n');
    w.out
}
