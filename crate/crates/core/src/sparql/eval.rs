use std::collections::{HashMap, HashSet};

use super::{effective_filter, AlgebraExpr, Expr, ExprContext, ServiceTarget, TriplePattern};
use crate::rdf::{RdfTerm, Solution, SolutionSequence};

/// Where basic graph patterns and SERVICE leaves get their solutions.
pub trait PatternSource {
    type Error;

    /// Solutions of a basic graph pattern. `filters` are the conjuncts of
    /// FILTERs directly above it; a source may use them to narrow its scan
    /// but the evaluator still applies them afterwards.
    fn match_bgp(&self, patterns: &[TriplePattern], filters: &[&Expr]) -> Result<Vec<Solution>, Self::Error>;

    fn service(&self, endpoint: &ServiceTarget, body: &AlgebraExpr, silent: bool)
        -> Result<Vec<Solution>, Self::Error>;
}

/// Evaluates `algebra` against `source`. With `canonical_order`, the
/// projected rows are stably sorted by the first projected variable.
pub fn evaluate_algebra<S: PatternSource>(
    source: &S,
    algebra: &AlgebraExpr,
    canonical_order: bool,
) -> Result<SolutionSequence, S::Error> {
    let rows = Evaluator { source, canonical_order }.eval(algebra, &[])?;
    let variables = match algebra.split_modifiers().0.projection {
        Some(vars) => vars,
        None => algebra.in_scope_variables(),
    };
    Ok(SolutionSequence::new(variables, rows))
}

struct Evaluator<'a, S> {
    source: &'a S,
    canonical_order: bool,
}

impl<S: PatternSource> Evaluator<'_, S> {
    fn eval(&self, a: &AlgebraExpr, filters: &[&Expr]) -> Result<Vec<Solution>, S::Error> {
        Ok(match a {
            AlgebraExpr::Bgp(ps) => self.source.match_bgp(ps, filters)?,
            AlgebraExpr::Filter(e, inner) => {
                let mut pushed: Vec<&Expr> = filters.to_vec();
                pushed.extend(e.conjuncts());
                let rows = self.eval(inner, &pushed)?;
                let ctx = ExprContext::default();
                rows.into_iter().filter(|r| effective_filter(e, r, &ctx)).collect()
            }
            AlgebraExpr::Join(l, r) => {
                let left = self.eval(l, &[])?;
                let right = self.eval(r, &[])?;
                join_solutions(left, right)
            }
            AlgebraExpr::Union(l, r) => {
                let mut rows = self.eval(l, &[])?;
                rows.extend(self.eval(r, &[])?);
                rows
            }
            AlgebraExpr::Service { endpoint, body, silent } => self.source.service(endpoint, body, *silent)?,
            AlgebraExpr::Extend { var, value, inner } => {
                let mut rows = self.eval(inner, &[])?;
                for r in &mut rows {
                    // an already bound variable keeps its value
                    r.entry(var.clone()).or_insert_with(|| value.clone());
                }
                rows
            }
            AlgebraExpr::Project(vars, inner) => {
                let mut rows: Vec<Solution> = self
                    .eval(inner, &[])?
                    .into_iter()
                    .map(|mut r| {
                        r.retain(|k, _| vars.contains(k));
                        r
                    })
                    .collect();
                if self.canonical_order {
                    if let Some(first) = vars.first() {
                        rows.sort_by(|a, b| sort_key(a.get(first)).cmp(&sort_key(b.get(first))));
                    }
                }
                rows
            }
            AlgebraExpr::Distinct(inner) => {
                let rows = self.eval(inner, &[])?;
                let mut seen = HashSet::new();
                rows.into_iter().filter(|r| seen.insert(r.clone())).collect()
            }
            AlgebraExpr::Slice { limit, offset, inner } => {
                let rows = self.eval(inner, &[])?;
                let it = rows.into_iter().skip(*offset as usize);
                match limit {
                    Some(l) => it.take(*l as usize).collect(),
                    None => it.collect(),
                }
            }
        })
    }
}

fn sort_key(t: Option<&RdfTerm>) -> (bool, &str) {
    match t {
        None => (false, ""),
        Some(t) => (true, t.string_value()),
    }
}

fn compatible(a: &Solution, b: &Solution) -> bool {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small.iter().all(|(k, v)| large.get(k).is_none_or(|w| w == v))
}

fn always_bound(rows: &[Solution]) -> HashSet<&str> {
    let mut it = rows.iter();
    let Some(first) = it.next() else {
        return HashSet::new();
    };
    let mut set: HashSet<&str> = first.keys().map(String::as_str).collect();
    for r in it {
        set.retain(|k| r.contains_key(*k));
    }
    set
}

/// Hash join of compatible solution mappings, keyed on variables bound in
/// every row of both sides. Output is left-major.
pub fn join_solutions(left: Vec<Solution>, right: Vec<Solution>) -> Vec<Solution> {
    if left.is_empty() || right.is_empty() {
        return Vec::new();
    }
    let lb = always_bound(&left);
    let rb = always_bound(&right);
    let mut keys: Vec<&str> = lb.intersection(&rb).copied().collect();
    keys.sort_unstable();
    let mut index: HashMap<Vec<&RdfTerm>, Vec<usize>> = HashMap::new();
    for (i, r) in right.iter().enumerate() {
        let k: Vec<&RdfTerm> = keys.iter().map(|v| &r[*v]).collect();
        index.entry(k).or_default().push(i);
    }
    let mut out = Vec::new();
    for l in &left {
        let k: Vec<&RdfTerm> = keys.iter().map(|v| &l[*v]).collect();
        if let Some(matches) = index.get(&k) {
            for &i in matches {
                let r = &right[i];
                if compatible(l, r) {
                    let mut merged = l.clone();
                    merged.extend(r.iter().map(|(k, v)| (k.clone(), v.clone())));
                    out.push(merged);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdf::Literal;

    fn row(pairs: &[(&str, i64)]) -> Solution {
        pairs.iter().map(|(k, v)| (k.to_string(), RdfTerm::Literal(Literal::integer(*v)))).collect()
    }

    /// Nested-loop reference join.
    fn naive_join(l: &[Solution], r: &[Solution]) -> Vec<Solution> {
        let mut out = Vec::new();
        for a in l {
            for b in r {
                if compatible(a, b) {
                    let mut m = a.clone();
                    m.extend(b.clone());
                    out.push(m);
                }
            }
        }
        out
    }

    #[test]
    fn join_matches_nested_loop() {
        let l = vec![row(&[("a", 1), ("b", 2)]), row(&[("a", 1)]), row(&[("a", 2), ("b", 3)])];
        let r = vec![row(&[("b", 2), ("c", 9)]), row(&[("a", 1), ("c", 8)]), row(&[("c", 7)])];
        let mut got = join_solutions(l.clone(), r.clone());
        let mut want = naive_join(&l, &r);
        got.sort();
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn join_with_empty_side() {
        assert!(join_solutions(vec![], vec![row(&[("a", 1)])]).is_empty());
        assert_eq!(join_solutions(vec![Solution::new()], vec![row(&[("a", 1)])]).len(), 1);
    }

    struct Fixed(Vec<Solution>);

    impl PatternSource for Fixed {
        type Error = ();
        fn match_bgp(&self, ps: &[TriplePattern], _: &[&Expr]) -> Result<Vec<Solution>, ()> {
            Ok(if ps.is_empty() { vec![Solution::new()] } else { self.0.clone() })
        }
        fn service(&self, _: &ServiceTarget, _: &AlgebraExpr, _: bool) -> Result<Vec<Solution>, ()> {
            Err(())
        }
    }

    #[test]
    fn modifiers_apply_in_order() {
        let src = Fixed(vec![row(&[("x", 3)]), row(&[("x", 1)]), row(&[("x", 3)]), row(&[("x", 2)])]);
        let q = crate::sparql::parse_query("SELECT DISTINCT ?x { ?x <http://a/p> ?y } LIMIT 2 OFFSET 1").unwrap();
        let out = evaluate_algebra(&src, &q, false).unwrap();
        assert_eq!(out.rows, vec![row(&[("x", 1)]), row(&[("x", 2)])]);
        let sorted = evaluate_algebra(&src, &q, true).unwrap();
        assert_eq!(sorted.rows, vec![row(&[("x", 2)]), row(&[("x", 3)])]);
    }

    #[test]
    fn empty_bgp_yields_one_empty_solution() {
        let q = crate::sparql::parse_query("SELECT * WHERE {}").unwrap();
        let out = evaluate_algebra(&Fixed(vec![]), &q, false).unwrap();
        assert_eq!(out.rows, vec![Solution::new()]);
        assert!(out.variables.is_empty());
    }
}
