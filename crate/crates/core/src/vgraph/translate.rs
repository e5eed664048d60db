use std::collections::BTreeMap;

use super::VirtualError;
use crate::mapping::{BridgeSource, ClassMap, MappingDocument, PatternPart, PropertyBridge, UriPattern};
use crate::rdf::{vocab, Iri, Literal, RdfTerm};
use crate::relational::{
    ColumnRef, CompareOp, Condition, RelationalCatalog, SelectColumn, SqlSelect, SqlValue, TableRef, TypeClass,
};
use crate::sparql::{Expr, TermPattern, TriplePattern};

/// Combinations beyond this make translation fail instead of flooding the
/// store with queries.
pub const MAX_COMBINATIONS: usize = 4096;

/// How one term of a solution is built from a result row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Constructor {
    /// Subject IRI of a ClassMap; indexes of the projected pattern columns.
    UriFromPattern {
        class_map: String,
        columns: Vec<usize>,
    },
    LiteralFromColumn {
        column: usize,
        datatype: Option<Iri>,
    },
    ConstantTerm(RdfTerm),
}

/// One SQL query plus the recipe that turns its rows into solutions.
#[derive(Clone, Debug)]
pub struct TranslationUnit {
    pub sql: SqlSelect,
    /// Constructor of each variable, from its first occurrence.
    pub recipe: BTreeMap<String, Constructor>,
    /// Every pattern position with its constructor; rows are kept only when
    /// all of them agree.
    pub checks: Vec<(TermPattern, Constructor)>,
}

impl TranslationUnit {
    /// Solution for one row, or `None` when the row does not match every
    /// pattern exactly.
    pub fn solution(&self, doc: &MappingDocument, row: &[crate::relational::Cell]) -> Option<crate::rdf::Solution> {
        let mut sol = crate::rdf::Solution::new();
        for (pattern, c) in &self.checks {
            let term = build(doc, c, row)?;
            match pattern {
                TermPattern::Term(t) => {
                    if *t != term {
                        return None;
                    }
                }
                TermPattern::Var(v) => match sol.get(v) {
                    Some(existing) if *existing != term => return None,
                    Some(_) => {}
                    None => {
                        sol.insert(v.clone(), term);
                    }
                },
            }
        }
        Some(sol)
    }
}

/// Literal for a cell under a bridge datatype.
pub(crate) fn literal(cell: &crate::relational::Cell, datatype: Option<&Iri>) -> Option<Literal> {
    let lex = cell.lexical()?;
    Some(match datatype {
        Some(dt) => Literal::typed(lex, dt.clone()),
        None => Literal::simple(lex),
    })
}

fn build(doc: &MappingDocument, c: &Constructor, row: &[crate::relational::Cell]) -> Option<RdfTerm> {
    match c {
        Constructor::ConstantTerm(t) => Some(t.clone()),
        Constructor::LiteralFromColumn { column, datatype } => {
            literal(&row[*column], datatype.as_ref()).map(RdfTerm::Literal)
        }
        Constructor::UriFromPattern { class_map, columns } => {
            let cm = doc.class_map(class_map)?;
            let values: Option<Vec<String>> = columns.iter().map(|i| row[*i].lexical()).collect();
            RdfTerm::iri(doc.resource_iri(cm, &values?)).ok()
        }
    }
}

/// Term source while SQL is being assembled: columns still carry aliases.
#[derive(Clone, Debug)]
enum Source<'d> {
    Uri { cm: &'d ClassMap, cols: Vec<ColumnRef> },
    Lit { col: ColumnRef, datatype: Option<Iri>, class: TypeClass },
    Const(RdfTerm),
}

#[derive(Clone, Copy)]
enum Candidate<'d> {
    Type(&'d ClassMap),
    Bridge(&'d ClassMap, &'d PropertyBridge),
}

struct Ctx<'d> {
    doc: &'d MappingDocument,
    catalog: &'d RelationalCatalog,
}

impl<'d> Ctx<'d> {
    fn class(&self, table: &str, column: &str) -> TypeClass {
        self.catalog.table(table).and_then(|t| t.column(column)).map_or(TypeClass::Text, |c| TypeClass::of(&c.sql_type))
    }

    fn target(&self, b: &PropertyBridge) -> Option<&'d ClassMap> {
        match &b.source {
            BridgeSource::UriJoin { target, .. } => self.doc.class_map(target),
            BridgeSource::Column(_) => None,
        }
    }

    /// Candidates for one pattern, pre-filtered by its constants.
    fn candidates(&self, p: &TriplePattern) -> Vec<Candidate<'d>> {
        let subject_ok = |cm: &ClassMap| match &p.subject {
            TermPattern::Var(_) => true,
            TermPattern::Term(RdfTerm::Iri(i)) => self.doc.match_resource(cm, i.as_str()).is_some(),
            TermPattern::Term(_) => false,
        };
        let mut out = Vec::new();
        let pred = p.predicate.term().and_then(RdfTerm::as_iri).map(Iri::as_str);
        for cm in &self.doc.class_maps {
            if !subject_ok(cm) {
                continue;
            }
            if pred.is_none() || pred == Some(vocab::RDF_TYPE) {
                let class_ok = match &p.object {
                    TermPattern::Var(_) => true,
                    TermPattern::Term(t) => t.as_iri() == Some(&cm.class_iri),
                };
                if class_ok {
                    out.push(Candidate::Type(cm));
                }
            }
            for b in &cm.bridges {
                if pred.is_some_and(|x| x != b.property.as_str()) {
                    continue;
                }
                let object_ok = match (&p.object, &b.source) {
                    (TermPattern::Var(_), _) => true,
                    (TermPattern::Term(RdfTerm::Literal(l)), BridgeSource::Column(_)) => match &b.datatype {
                        Some(dt) => l.language().is_none() && l.datatype() == dt,
                        None => l.is_simple(),
                    },
                    (TermPattern::Term(RdfTerm::Iri(i)), BridgeSource::UriJoin { .. }) => {
                        self.target(b).is_some_and(|t| self.doc.match_resource(t, i.as_str()).is_some())
                    }
                    _ => false,
                };
                if object_ok {
                    out.push(Candidate::Bridge(cm, b));
                }
            }
        }
        out
    }
}

/// Partial SQL for a prefix of the patterns.
#[derive(Clone, Default)]
struct Plan<'d> {
    from: Vec<TableRef>,
    joins: Vec<(ColumnRef, ColumnRef)>,
    conditions: Vec<Condition>,
    vars: BTreeMap<String, Source<'d>>,
    checks: Vec<(TermPattern, Source<'d>)>,
}

fn pushable(class: TypeClass) -> bool {
    matches!(class, TypeClass::Integer | TypeClass::Text)
}

/// True when column values can be recovered from an expanded pattern
/// unambiguously: every separator between two holes contains a character
/// that percent-encoding never emits.
fn unambiguous(p: &UriPattern) -> bool {
    let parts = p.parts();
    parts.iter().enumerate().all(|(i, part)| match part {
        PatternPart::Literal(l) if i > 0 && i + 1 < parts.len() => {
            l.chars().any(|c| !(c.is_ascii_alphanumeric() || "-._~%".contains(c)))
        }
        _ => true,
    })
}

fn sql_value(class: TypeClass, lexical: &str) -> Option<SqlValue> {
    match class {
        TypeClass::Integer => lexical.parse().ok().map(SqlValue::Integer),
        TypeClass::Text => Some(SqlValue::Text(lexical.to_owned())),
        _ => None,
    }
}

impl<'d> Plan<'d> {
    fn alias(&mut self, table: &str) -> String {
        let alias = format!("t{}", self.from.len());
        self.from.push(TableRef { table: table.to_owned(), alias: alias.clone() });
        alias
    }

    fn uri(&mut self, cm: &'d ClassMap, alias: &str) -> Source<'d> {
        let cols: Vec<ColumnRef> = cm.uri_pattern.columns().iter().map(|c| ColumnRef::new(alias, &c.column)).collect();
        for c in &cols {
            let cond = Condition::IsNotNull(c.clone());
            if !self.conditions.contains(&cond) {
                self.conditions.push(cond);
            }
        }
        Source::Uri { cm, cols }
    }

    /// Alias to reuse for the subject of `cm` when the subject variable is
    /// already built from the same pattern over a row-identifying key.
    fn reusable_alias(&self, ctx: &Ctx<'d>, subject: &TermPattern, cm: &ClassMap) -> Option<String> {
        let v = subject.var()?;
        let Some(Source::Uri { cm: other, cols }) = self.vars.get(v) else {
            return None;
        };
        if other.table != cm.table || other.uri_pattern != cm.uri_pattern {
            return None;
        }
        let table = ctx.catalog.table(&cm.table)?;
        let names: Vec<&str> = cols.iter().map(|c| c.column.as_str()).collect();
        table.is_identified_by(&names).then(|| cols[0].alias.clone())
    }

    /// Narrows the SQL so that `src` can equal the constant `t`; `false`
    /// when it never can.
    fn constrain_const(&mut self, ctx: &Ctx<'d>, src: &Source<'d>, t: &RdfTerm) -> bool {
        match src {
            Source::Const(k) => k == t,
            Source::Uri { cm, cols } => {
                let Some(iri) = t.as_iri() else { return false };
                let Some(values) = ctx.doc.match_resource(cm, iri.as_str()) else {
                    return false;
                };
                if unambiguous(&cm.uri_pattern) {
                    for (col, v) in cols.iter().zip(values) {
                        let class = ctx.class(&cm.table, &col.column);
                        if let Some(val) = sql_value(class, &v) {
                            self.conditions.push(Condition::Compare(col.clone(), CompareOp::Eq, val));
                        }
                    }
                }
                true
            }
            Source::Lit { col, datatype, class } => {
                let Some(l) = t.as_literal() else {
                    return false;
                };
                let dt_ok = match datatype {
                    Some(dt) => l.language().is_none() && l.datatype() == dt,
                    None => l.is_simple(),
                };
                if !dt_ok {
                    return false;
                }
                if let Some(val) = sql_value(*class, l.lexical()) {
                    self.conditions.push(Condition::Compare(col.clone(), CompareOp::Eq, val));
                }
                true
            }
        }
    }

    /// Narrows the SQL so that two sources can build the same term.
    fn constrain_pair(&mut self, ctx: &Ctx<'d>, a: &Source<'d>, b: &Source<'d>) -> bool {
        match (a, b) {
            (Source::Const(k), other) | (other, Source::Const(k)) => self.constrain_const(ctx, other, k),
            (Source::Uri { cm: ca, cols: xa }, Source::Uri { cm: cb, cols: xb }) => {
                if ca.uri_pattern.shape() == cb.uri_pattern.shape() {
                    if unambiguous(&ca.uri_pattern) {
                        for (x, y) in xa.iter().zip(xb) {
                            let (cx, cy) = (ctx.class(&ca.table, &x.column), ctx.class(&cb.table, &y.column));
                            if x != y && cx == cy && pushable(cx) {
                                self.conditions.push(Condition::ColumnsEqual(x.clone(), y.clone()));
                            }
                        }
                    }
                    true
                } else {
                    let abs_a = crate::rdf::has_scheme(ca.uri_pattern.literal_prefix());
                    let abs_b = crate::rdf::has_scheme(cb.uri_pattern.literal_prefix());
                    let (pa, pb) = (ca.uri_pattern.literal_prefix(), cb.uri_pattern.literal_prefix());
                    abs_a != abs_b || pa.starts_with(pb) || pb.starts_with(pa)
                }
            }
            (Source::Lit { col: x, datatype: da, class: cx }, Source::Lit { col: y, datatype: db, class: cy }) => {
                if da != db {
                    return false;
                }
                if x != y && cx == cy && pushable(*cx) {
                    self.conditions.push(Condition::ColumnsEqual(x.clone(), y.clone()));
                }
                true
            }
            _ => false,
        }
    }

    fn unify(&mut self, ctx: &Ctx<'d>, pattern: &TermPattern, src: Source<'d>) -> bool {
        let ok = match pattern {
            TermPattern::Term(t) => self.constrain_const(ctx, &src, t),
            TermPattern::Var(v) => match self.vars.get(v).cloned() {
                Some(prev) => self.constrain_pair(ctx, &prev, &src),
                None => {
                    self.vars.insert(v.clone(), src.clone());
                    true
                }
            },
        };
        self.checks.push((pattern.clone(), src));
        ok
    }

    fn add(&mut self, ctx: &Ctx<'d>, p: &TriplePattern, cand: Candidate<'d>) -> bool {
        let cm = match cand {
            Candidate::Type(cm) | Candidate::Bridge(cm, _) => cm,
        };
        let alias = match self.reusable_alias(ctx, &p.subject, cm) {
            Some(a) => a,
            None => self.alias(&cm.table),
        };
        let subject = self.uri(cm, &alias);
        if !self.unify(ctx, &p.subject, subject) {
            return false;
        }
        let (predicate, object) = match cand {
            Candidate::Type(cm) => (
                Source::Const(RdfTerm::Iri(Iri::from_static(vocab::RDF_TYPE))),
                Source::Const(RdfTerm::Iri(cm.class_iri.clone())),
            ),
            Candidate::Bridge(cm, b) => {
                let object = match &b.source {
                    BridgeSource::Column(c) => {
                        let col = ColumnRef::new(&alias, &c.column);
                        self.conditions.push(Condition::IsNotNull(col.clone()));
                        Source::Lit { col, datatype: b.datatype.clone(), class: ctx.class(&cm.table, &c.column) }
                    }
                    BridgeSource::UriJoin { on, .. } => {
                        let Some(target) = ctx.target(b) else {
                            return false;
                        };
                        let remote = self.alias(&target.table);
                        for (l, r) in on {
                            self.joins.push((ColumnRef::new(&alias, &l.column), ColumnRef::new(&remote, &r.column)));
                        }
                        self.uri(target, &remote)
                    }
                };
                (Source::Const(RdfTerm::Iri(b.property.clone())), object)
            }
        };
        self.unify(ctx, &p.predicate, predicate) && self.unify(ctx, &p.object, object)
    }

    fn finish(self, filters: &[&Expr], max_rows: Option<u64>) -> TranslationUnit {
        let mut columns: Vec<ColumnRef> = Vec::new();
        let mut index = |c: &ColumnRef| -> usize {
            match columns.iter().position(|x| x == c) {
                Some(i) => i,
                None => {
                    columns.push(c.clone());
                    columns.len() - 1
                }
            }
        };
        let mut convert = |s: &Source<'_>| -> Constructor {
            match s {
                Source::Const(t) => Constructor::ConstantTerm(t.clone()),
                Source::Lit { col, datatype, .. } => {
                    Constructor::LiteralFromColumn { column: index(col), datatype: datatype.clone() }
                }
                Source::Uri { cm, cols } => Constructor::UriFromPattern {
                    class_map: cm.name.clone(),
                    columns: cols.iter().map(&mut index).collect(),
                },
            }
        };
        let checks: Vec<(TermPattern, Constructor)> =
            self.checks.iter().map(|(p, s)| (p.clone(), convert(s))).collect();
        let mut recipe = BTreeMap::new();
        for (p, c) in &checks {
            if let TermPattern::Var(v) = p {
                recipe.entry(v.clone()).or_insert_with(|| c.clone());
            }
        }
        let mut conditions = self.conditions;
        for f in filters {
            if let Some(cond) = like_pushdown(f, &self.vars) {
                conditions.push(cond);
            }
        }
        let sql = SqlSelect {
            distinct: false,
            columns: columns
                .into_iter()
                .enumerate()
                .map(|(i, column)| SelectColumn { column, alias: format!("c{i}") })
                .collect(),
            from: self.from,
            joins: self.joins,
            conditions,
            limit: max_rows,
            offset: None,
        };
        TranslationUnit { sql, recipe, checks }
    }
}

/// `regex(?v, "text")` over a plain-string column becomes a `LIKE`
/// superset (LIKE ignores ASCII case), so it only ever narrows.
fn like_pushdown(e: &Expr, vars: &BTreeMap<String, Source<'_>>) -> Option<Condition> {
    let Expr::Regex { text, pattern, .. } = e else {
        return None;
    };
    let Expr::Var(v) = &**text else { return None };
    let Some(Source::Lit { col, datatype: None, .. }) = vars.get(v) else {
        return None;
    };
    let literal_only = !pattern.is_empty()
        && pattern.chars().all(|c| c.is_ascii() && !c.is_ascii_control() && !"\\.^$|?*+()[]{}".contains(c));
    if !literal_only {
        return None;
    }
    let mut like = String::from("%");
    for c in pattern.chars() {
        if matches!(c, '%' | '_' | '\\') {
            like.push('\\');
        }
        like.push(c);
    }
    like.push('%');
    Some(Condition::Like(col.clone(), like))
}

/// SQL units whose combined rows cover every match of `bgp`. Each unit
/// fixes one ClassMap or PropertyBridge per pattern; combinations that can
/// never agree on shared variables or constants are dropped.
pub fn translate_bgp(
    bgp: &[TriplePattern],
    doc: &MappingDocument,
    catalog: &RelationalCatalog,
) -> Result<Vec<TranslationUnit>, VirtualError> {
    translate_with(bgp, &[], doc, catalog, None)
}

pub(crate) fn translate_with(
    bgp: &[TriplePattern],
    filters: &[&Expr],
    doc: &MappingDocument,
    catalog: &RelationalCatalog,
    max_rows: Option<u64>,
) -> Result<Vec<TranslationUnit>, VirtualError> {
    let ctx = Ctx { doc, catalog };
    let candidates: Vec<Vec<Candidate<'_>>> = bgp.iter().map(|p| ctx.candidates(p)).collect();
    if candidates.iter().any(Vec::is_empty) {
        return Ok(Vec::new());
    }
    let combos = candidates.iter().try_fold(1usize, |acc, c| acc.checked_mul(c.len()));
    if combos.is_none_or(|n| n > MAX_COMBINATIONS) {
        let unbound = bgp.iter().any(|p| p.predicate.var().is_some());
        return Err(VirtualError::Unsupported(if unbound {
            "unbound predicate".into()
        } else {
            "too many candidate combinations".into()
        }));
    }
    let mut units = Vec::new();
    let mut stack = vec![(0usize, Plan::default())];
    // depth-first, reversed pushes keep candidate order in the output
    while let Some((i, plan)) = stack.pop() {
        if i == bgp.len() {
            units.push(plan.finish(filters, max_rows));
            continue;
        }
        for cand in candidates[i].iter().rev() {
            let mut next = plan.clone();
            if next.add(&ctx, &bgp[i], *cand) {
                stack.push((i + 1, next));
            }
        }
    }
    Ok(units)
}
