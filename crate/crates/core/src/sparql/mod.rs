//! The SPARQL subset evaluated locally and sent to remote sites:
//! SELECT with basic graph patterns, FILTER, UNION, SERVICE, DISTINCT and
//! LIMIT/OFFSET, plus constant `BIND` used to tag mediated results with
//! their site.
//!
//! The prefixes `rdf:`, `rdfs:`, `xsd:`, `owl:` and `hdo:` are predeclared.

mod eval;
mod expr;
mod parser;
mod render;

use std::fmt;

pub use eval::{evaluate_algebra, join_solutions, PatternSource};
pub use expr::{effective_filter, ExprContext};
pub use parser::parse_query;
pub use render::render_query;

use crate::rdf::{Iri, RdfTerm};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unsupported feature: {feature} (line {line}, column {column})")]
    Unsupported { feature: String, line: usize, column: usize },
}

impl QueryError {
    /// (line, column) of the offending token.
    pub fn position(&self) -> (usize, usize) {
        match self {
            QueryError::Syntax { line, column, .. } | QueryError::Unsupported { line, column, .. } => (*line, *column),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TermPattern {
    Term(RdfTerm),
    Var(String),
}

impl TermPattern {
    pub fn var(&self) -> Option<&str> {
        match self {
            TermPattern::Var(v) => Some(v),
            TermPattern::Term(_) => None,
        }
    }

    pub fn term(&self) -> Option<&RdfTerm> {
        match self {
            TermPattern::Term(t) => Some(t),
            TermPattern::Var(_) => None,
        }
    }
}

impl fmt::Display for TermPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TermPattern::Term(t) => write!(f, "{t}"),
            TermPattern::Var(v) => write!(f, "?{v}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TriplePattern {
    pub subject: TermPattern,
    pub predicate: TermPattern,
    pub object: TermPattern,
}

impl TriplePattern {
    /// Fails when the subject is a literal or the predicate is neither an
    /// IRI nor a variable.
    pub fn new(subject: TermPattern, predicate: TermPattern, object: TermPattern) -> Result<Self, String> {
        if matches!(subject, TermPattern::Term(RdfTerm::Literal(_))) {
            return Err("literal in subject position".into());
        }
        if matches!(predicate, TermPattern::Term(RdfTerm::Literal(_)) | TermPattern::Term(RdfTerm::BlankNode(_))) {
            return Err("predicate must be an IRI or a variable".into());
        }
        Ok(Self { subject, predicate, object })
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        [&self.subject, &self.predicate, &self.object].into_iter().filter_map(TermPattern::var)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CompareOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "!=",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Compare(CompareOp, Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    /// Flags are `""` or `"i"`.
    Regex {
        text: Box<Expr>,
        pattern: String,
        flags: String,
    },
    Str(Box<Expr>),
    Bound(String),
    Const(RdfTerm),
    Var(String),
}

impl Expr {
    /// Top-level `&&` operands.
    pub fn conjuncts(&self) -> Vec<&Expr> {
        match self {
            Expr::And(a, b) => {
                let mut v = a.conjuncts();
                v.extend(b.conjuncts());
                v
            }
            other => vec![other],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ServiceTarget {
    Iri(Iri),
    Var(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AlgebraExpr {
    Bgp(Vec<TriplePattern>),
    Filter(Expr, Box<AlgebraExpr>),
    Join(Box<AlgebraExpr>, Box<AlgebraExpr>),
    Union(Box<AlgebraExpr>, Box<AlgebraExpr>),
    Service {
        endpoint: ServiceTarget,
        body: Box<AlgebraExpr>,
        silent: bool,
    },
    /// Binds `var` to a constant on every solution of `inner`.
    Extend {
        var: String,
        value: RdfTerm,
        inner: Box<AlgebraExpr>,
    },
    Project(Vec<String>, Box<AlgebraExpr>),
    Distinct(Box<AlgebraExpr>),
    Slice {
        limit: Option<u64>,
        offset: u64,
        inner: Box<AlgebraExpr>,
    },
}

impl AlgebraExpr {
    pub fn join(a: AlgebraExpr, b: AlgebraExpr) -> Self {
        AlgebraExpr::Join(Box::new(a), Box::new(b))
    }

    pub fn union(a: AlgebraExpr, b: AlgebraExpr) -> Self {
        AlgebraExpr::Union(Box::new(a), Box::new(b))
    }

    /// Variables that can be bound by this pattern, in first-appearance order.
    pub fn in_scope_variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        let push = |v: &str, out: &mut Vec<String>| {
            if !out.iter().any(|x| x == v) {
                out.push(v.to_owned());
            }
        };
        match self {
            AlgebraExpr::Bgp(ps) => {
                for p in ps {
                    for v in p.variables() {
                        push(v, out);
                    }
                }
            }
            AlgebraExpr::Filter(_, a) | AlgebraExpr::Distinct(a) => a.collect_vars(out),
            AlgebraExpr::Slice { inner, .. } => inner.collect_vars(out),
            AlgebraExpr::Join(a, b) | AlgebraExpr::Union(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            AlgebraExpr::Service { body, .. } => body.collect_vars(out),
            AlgebraExpr::Extend { var, inner, .. } => {
                inner.collect_vars(out);
                push(var, out);
            }
            AlgebraExpr::Project(vars, _) => {
                for v in vars {
                    push(v, out);
                }
            }
        }
    }

    /// Number of Service nodes in the tree.
    pub fn service_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |a| {
            if matches!(a, AlgebraExpr::Service { .. }) {
                n += 1;
            }
        });
        n
    }

    /// Pre-order traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a AlgebraExpr)) {
        f(self);
        match self {
            AlgebraExpr::Bgp(_) => {}
            AlgebraExpr::Filter(_, a)
            | AlgebraExpr::Distinct(a)
            | AlgebraExpr::Project(_, a)
            | AlgebraExpr::Slice { inner: a, .. }
            | AlgebraExpr::Extend { inner: a, .. }
            | AlgebraExpr::Service { body: a, .. } => a.visit(f),
            AlgebraExpr::Join(a, b) | AlgebraExpr::Union(a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }

    /// Strips the Slice / Distinct / Project wrappers of a SELECT.
    pub fn split_modifiers(&self) -> (QueryModifiers, &AlgebraExpr) {
        let mut m = QueryModifiers::default();
        let mut cur = self;
        if let AlgebraExpr::Slice { limit, offset, inner } = cur {
            m.limit = *limit;
            m.offset = *offset;
            cur = inner;
        }
        if let AlgebraExpr::Distinct(inner) = cur {
            m.distinct = true;
            cur = inner;
        }
        if let AlgebraExpr::Project(vars, inner) = cur {
            m.projection = Some(vars.clone());
            cur = inner;
        }
        (m, cur)
    }
}

/// Solution modifiers of a SELECT query.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct QueryModifiers {
    pub projection: Option<Vec<String>>,
    pub distinct: bool,
    pub limit: Option<u64>,
    pub offset: u64,
}

impl QueryModifiers {
    /// Re-wraps `pattern` in these modifiers.
    pub fn wrap(&self, pattern: AlgebraExpr) -> AlgebraExpr {
        let mut a = match &self.projection {
            Some(vars) => AlgebraExpr::Project(vars.clone(), Box::new(pattern)),
            None => pattern,
        };
        if self.distinct {
            a = AlgebraExpr::Distinct(Box::new(a));
        }
        if self.limit.is_some() || self.offset > 0 {
            a = AlgebraExpr::Slice { limit: self.limit, offset: self.offset, inner: Box::new(a) };
        }
        a
    }
}
