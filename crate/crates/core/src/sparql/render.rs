use super::{AlgebraExpr, Expr, ServiceTarget, TriplePattern};
use crate::rdf::escape_string;

/// Renders a SELECT algebra tree as query text. IRIs are always written in
/// full, so the output needs no prologue.
pub fn render_query(a: &AlgebraExpr) -> String {
    let (m, pattern) = a.split_modifiers();
    let mut out = String::from("SELECT ");
    if m.distinct {
        out.push_str("DISTINCT ");
    }
    match &m.projection {
        Some(vars) if !vars.is_empty() => {
            for v in vars {
                out.push('?');
                out.push_str(v);
                out.push(' ');
            }
        }
        _ => out.push_str("* "),
    }
    out.push_str("WHERE ");
    out.push_str(&group(pattern));
    if let Some(l) = m.limit {
        out.push_str(&format!(" LIMIT {l}"));
    }
    if m.offset > 0 {
        out.push_str(&format!(" OFFSET {}", m.offset));
    }
    out
}

fn group(a: &AlgebraExpr) -> String {
    let inner = elements(a);
    if inner.is_empty() {
        "{ }".to_owned()
    } else {
        format!("{{ {inner} }}")
    }
}

fn triple(p: &TriplePattern) -> String {
    format!("{} {} {} .", p.subject, p.predicate, p.object)
}

/// Group content that parses back to exactly `a`.
fn elements(a: &AlgebraExpr) -> String {
    match a {
        AlgebraExpr::Bgp(ps) => ps.iter().map(triple).collect::<Vec<_>>().join(" "),
        AlgebraExpr::Join(l, r) => format!("{} {}", join_prefix(l), group(r)),
        AlgebraExpr::Union(l, r) => format!("{} UNION {}", union_chain(l), group(r)),
        AlgebraExpr::Service { endpoint, body, silent } => {
            let target = match endpoint {
                ServiceTarget::Iri(i) => format!("<{i}>"),
                ServiceTarget::Var(v) => format!("?{v}"),
            };
            format!("SERVICE {}{target} {}", if *silent { "SILENT " } else { "" }, group(body))
        }
        AlgebraExpr::Filter(e, inner) => {
            let body = match **inner {
                AlgebraExpr::Filter(..) => group(inner),
                _ => elements(inner),
            };
            format!("{body} FILTER({})", expr(e)).trim_start().to_owned()
        }
        AlgebraExpr::Extend { var, value, inner } => {
            let body = match **inner {
                AlgebraExpr::Filter(..) => group(inner),
                _ => elements(inner),
            };
            format!("{body} BIND({value} AS ?{var})").trim_start().to_owned()
        }
        // solution modifiers only appear at the top of a SELECT
        AlgebraExpr::Project(..) | AlgebraExpr::Distinct(_) | AlgebraExpr::Slice { .. } => {
            format!("{{ {} }}", render_query(a))
        }
    }
}

fn join_prefix(a: &AlgebraExpr) -> String {
    match a {
        AlgebraExpr::Join(l, r) => format!("{} {}", join_prefix(l), group(r)),
        other => group(other),
    }
}

fn union_chain(a: &AlgebraExpr) -> String {
    match a {
        AlgebraExpr::Union(l, r) => format!("{} UNION {}", union_chain(l), group(r)),
        other => group(other),
    }
}

fn expr(e: &Expr) -> String {
    match e {
        Expr::Compare(op, a, b) => format!("({} {} {})", expr(a), op.symbol(), expr(b)),
        Expr::And(a, b) => format!("({} && {})", expr(a), expr(b)),
        Expr::Or(a, b) => format!("({} || {})", expr(a), expr(b)),
        Expr::Not(a) => format!("(!{})", expr(a)),
        Expr::Regex { text, pattern, flags } => {
            if flags.is_empty() {
                format!("regex({}, \"{}\")", expr(text), escape_string(pattern))
            } else {
                format!("regex({}, \"{}\", \"{}\")", expr(text), escape_string(pattern), escape_string(flags))
            }
        }
        Expr::Str(a) => format!("str({})", expr(a)),
        Expr::Bound(v) => format!("bound(?{v})"),
        Expr::Const(t) => t.to_string(),
        Expr::Var(v) => format!("?{v}"),
    }
}
