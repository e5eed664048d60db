use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::HashMap;

use chrono::NaiveDateTime;
use regex::Regex;

use super::{CompareOp, Expr};
use crate::rdf::{vocab, Iri, Literal, RdfTerm, Solution};

/// Per-filter state: compiled regular expressions.
#[derive(Default)]
pub struct ExprContext {
    regexes: RefCell<HashMap<(String, String), Option<Regex>>>,
}

enum Value {
    Term(RdfTerm),
    Bool(bool),
}

/// Filter outcome for one solution; evaluation errors count as false.
pub fn effective_filter(e: &Expr, row: &Solution, ctx: &ExprContext) -> bool {
    eval_bool(e, row, ctx).unwrap_or(false)
}

fn eval_bool(e: &Expr, row: &Solution, ctx: &ExprContext) -> Option<bool> {
    match e {
        Expr::And(a, b) => match (eval_bool(a, row, ctx), eval_bool(b, row, ctx)) {
            (Some(false), _) | (_, Some(false)) => Some(false),
            (Some(true), Some(true)) => Some(true),
            _ => None,
        },
        Expr::Or(a, b) => match (eval_bool(a, row, ctx), eval_bool(b, row, ctx)) {
            (Some(true), _) | (_, Some(true)) => Some(true),
            (Some(false), Some(false)) => Some(false),
            _ => None,
        },
        Expr::Not(a) => eval_bool(a, row, ctx).map(|b| !b),
        other => ebv(eval(other, row, ctx)?),
    }
}

fn eval(e: &Expr, row: &Solution, ctx: &ExprContext) -> Option<Value> {
    Some(match e {
        Expr::Var(v) => Value::Term(row.get(v)?.clone()),
        Expr::Const(t) => Value::Term(t.clone()),
        Expr::Bound(v) => Value::Bool(row.contains_key(v)),
        Expr::Str(a) => match eval(a, row, ctx)? {
            Value::Term(RdfTerm::Iri(i)) => Value::Term(RdfTerm::Literal(Literal::simple(i.as_str()))),
            Value::Term(RdfTerm::Literal(l)) => Value::Term(RdfTerm::Literal(Literal::simple(l.lexical()))),
            Value::Bool(b) => Value::Term(RdfTerm::Literal(Literal::simple(b.to_string()))),
            Value::Term(RdfTerm::BlankNode(_)) => return None,
        },
        Expr::Regex { text, pattern, flags } => {
            let Value::Term(RdfTerm::Literal(l)) = eval(text, row, ctx)? else {
                return None;
            };
            if !(l.is_simple() || l.language().is_some()) {
                return None;
            }
            let mut cache = ctx.regexes.borrow_mut();
            let re = cache
                .entry((pattern.clone(), flags.clone()))
                .or_insert_with(|| {
                    let src = if flags.contains('i') { format!("(?i){pattern}") } else { pattern.clone() };
                    Regex::new(&src).ok()
                })
                .as_ref()?;
            Value::Bool(re.is_match(l.lexical()))
        }
        Expr::Compare(op, a, b) => {
            let a = eval(a, row, ctx)?;
            let b = eval(b, row, ctx)?;
            Value::Bool(compare(*op, &as_term(a), &as_term(b))?)
        }
        Expr::And(..) | Expr::Or(..) | Expr::Not(_) => Value::Bool(eval_bool(e, row, ctx)?),
    })
}

fn as_term(v: Value) -> RdfTerm {
    match v {
        Value::Term(t) => t,
        Value::Bool(b) => RdfTerm::Literal(Literal::typed(b.to_string(), Iri::from_static(vocab::XSD_BOOLEAN))),
    }
}

fn ebv(v: Value) -> Option<bool> {
    match v {
        Value::Bool(b) => Some(b),
        Value::Term(RdfTerm::Literal(l)) => match l.datatype().as_str() {
            vocab::XSD_BOOLEAN => parse_bool(l.lexical()),
            _ if l.is_simple() || l.language().is_some() => Some(!l.lexical().is_empty()),
            _ => numeric(&l).map(|n| n != 0.0 && !n.is_nan()),
        },
        Value::Term(_) => None,
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" | "1" => Some(true),
        "false" | "0" => Some(false),
        _ => None,
    }
}

const NUMERIC_TYPES: &[&str] = &[
    "integer",
    "decimal",
    "double",
    "float",
    "long",
    "int",
    "short",
    "byte",
    "nonNegativeInteger",
    "nonPositiveInteger",
    "positiveInteger",
    "negativeInteger",
    "unsignedLong",
    "unsignedInt",
    "unsignedShort",
    "unsignedByte",
];

fn is_numeric(l: &Literal) -> bool {
    l.datatype().as_str().strip_prefix(vocab::XSD).is_some_and(|local| NUMERIC_TYPES.contains(&local))
}

fn numeric(l: &Literal) -> Option<f64> {
    if is_numeric(l) {
        l.lexical().trim().parse::<f64>().ok()
    } else {
        None
    }
}

fn date_time(l: &Literal) -> Option<NaiveDateTime> {
    if l.datatype().as_str() != vocab::XSD_DATE_TIME {
        return None;
    }
    let s = l.lexical().trim();
    let s = s.strip_suffix('Z').unwrap_or(s);
    NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f").ok()
}

fn is_stringy(l: &Literal) -> bool {
    l.is_simple()
}

/// Ordering of two literals with a shared comparable value space.
fn literal_order(a: &Literal, b: &Literal) -> Option<Ordering> {
    if is_numeric(a) && is_numeric(b) {
        // exact for integers that fit
        if let (Ok(x), Ok(y)) = (a.lexical().trim().parse::<i128>(), b.lexical().trim().parse::<i128>()) {
            return Some(x.cmp(&y));
        }
        return numeric(a)?.partial_cmp(&numeric(b)?);
    }
    if a.datatype().as_str() == vocab::XSD_DATE_TIME && b.datatype().as_str() == vocab::XSD_DATE_TIME {
        return Some(date_time(a)?.cmp(&date_time(b)?));
    }
    if is_stringy(a) && is_stringy(b) {
        return Some(a.lexical().cmp(b.lexical()));
    }
    if a.language().is_some() && a.language() == b.language() {
        return Some(a.lexical().cmp(b.lexical()));
    }
    if a.datatype().as_str() == vocab::XSD_BOOLEAN && b.datatype().as_str() == vocab::XSD_BOOLEAN {
        return Some(parse_bool(a.lexical())?.cmp(&parse_bool(b.lexical())?));
    }
    None
}

fn compare(op: CompareOp, a: &RdfTerm, b: &RdfTerm) -> Option<bool> {
    let ord = match (a, b) {
        (RdfTerm::Literal(x), RdfTerm::Literal(y)) => match literal_order(x, y) {
            Some(o) => o,
            None => {
                // different value spaces: only identical terms are known equal
                return match op {
                    CompareOp::Eq if x == y => Some(true),
                    CompareOp::Ne if x == y => Some(false),
                    _ => None,
                };
            }
        },
        _ => {
            return match op {
                CompareOp::Eq => Some(a == b),
                CompareOp::Ne => Some(a != b),
                _ => None,
            }
        }
    };
    Some(match op {
        CompareOp::Eq => ord == Ordering::Equal,
        CompareOp::Ne => ord != Ordering::Equal,
        CompareOp::Lt => ord == Ordering::Less,
        CompareOp::Le => ord != Ordering::Greater,
        CompareOp::Gt => ord == Ordering::Greater,
        CompareOp::Ge => ord != Ordering::Less,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lit(s: &str, dt: &'static str) -> Expr {
        Expr::Const(RdfTerm::Literal(Literal::typed(s, Iri::from_static(dt))))
    }

    fn cmp(op: CompareOp, a: Expr, b: Expr) -> Expr {
        Expr::Compare(op, Box::new(a), Box::new(b))
    }

    fn check(e: &Expr) -> bool {
        effective_filter(e, &Solution::new(), &ExprContext::default())
    }

    #[test]
    fn numeric_comparison_is_by_value() {
        assert!(check(&cmp(CompareOp::Lt, lit("9", vocab::XSD_INTEGER), lit("10", vocab::XSD_INTEGER))));
        assert!(check(&cmp(CompareOp::Eq, lit("01", vocab::XSD_INTEGER), lit("1.0", vocab::XSD_DECIMAL))));
    }

    #[test]
    fn datetime_comparison() {
        assert!(check(&cmp(
            CompareOp::Lt,
            lit("2013-04-05T09:38:14", vocab::XSD_DATE_TIME),
            lit("2013-04-05T09:38:59", vocab::XSD_DATE_TIME)
        )));
    }

    #[test]
    fn incomparable_types_are_errors() {
        let e = cmp(CompareOp::Lt, lit("1", vocab::XSD_INTEGER), Expr::Const(RdfTerm::Literal(Literal::simple("a"))));
        assert!(!check(&e));
        assert!(!check(&Expr::Not(Box::new(e.clone()))));
        // error || true is true
        assert!(check(&Expr::Or(Box::new(e), Box::new(lit("true", vocab::XSD_BOOLEAN)))));
    }

    #[test]
    fn regex_on_strings_only() {
        let mut row = Solution::new();
        row.insert("t".into(), RdfTerm::Literal(Literal::simple("\"No Video\" error")));
        row.insert("n".into(), RdfTerm::Literal(Literal::integer(5)));
        let ctx = ExprContext::default();
        let re = |v: &str, p: &str, f: &str| Expr::Regex {
            text: Box::new(Expr::Var(v.into())),
            pattern: p.into(),
            flags: f.into(),
        };
        assert!(effective_filter(&re("t", "No Video", ""), &row, &ctx));
        assert!(!effective_filter(&re("t", "no video", ""), &row, &ctx));
        assert!(effective_filter(&re("t", "no video", "i"), &row, &ctx));
        assert!(!effective_filter(&re("n", "5", ""), &row, &ctx));
        assert!(effective_filter(
            &Expr::Regex {
                text: Box::new(Expr::Str(Box::new(Expr::Var("n".into())))),
                pattern: "5".into(),
                flags: String::new()
            },
            &row,
            &ctx
        ));
        assert!(!effective_filter(&re("missing", ".*", ""), &row, &ctx));
    }

    #[test]
    fn bound_and_iri_equality() {
        let mut row = Solution::new();
        row.insert("s".into(), RdfTerm::iri("http://a/1").unwrap());
        let ctx = ExprContext::default();
        assert!(effective_filter(&Expr::Bound("s".into()), &row, &ctx));
        assert!(!effective_filter(&Expr::Bound("x".into()), &row, &ctx));
        let eq = cmp(CompareOp::Eq, Expr::Var("s".into()), Expr::Const(RdfTerm::iri("http://a/1").unwrap()));
        assert!(effective_filter(&eq, &row, &ctx));
        let lt = cmp(CompareOp::Lt, Expr::Var("s".into()), Expr::Const(RdfTerm::iri("http://a/2").unwrap()));
        assert!(!effective_filter(&lt, &row, &ctx));
    }
}
