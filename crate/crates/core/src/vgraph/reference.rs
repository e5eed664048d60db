use std::collections::HashMap;
use std::convert::Infallible;

use crate::rdf::{Graph, Iri, RdfTerm, Solution, Triple};
use crate::sparql::{AlgebraExpr, Expr, PatternSource, ServiceTarget, TermPattern, TriplePattern};

/// Pattern matching over an in-memory graph by backtracking. SERVICE
/// leaves yield no solutions.
pub struct GraphSource<'g> {
    graph: &'g Graph,
    by_predicate: HashMap<&'g Iri, Vec<&'g Triple>>,
}

impl<'g> GraphSource<'g> {
    pub fn new(graph: &'g Graph) -> Self {
        let mut by_predicate: HashMap<&Iri, Vec<&Triple>> = HashMap::new();
        for t in graph.iter() {
            by_predicate.entry(t.predicate()).or_default().push(t);
        }
        Self { graph, by_predicate }
    }

    fn resolve<'a>(p: &'a TermPattern, sol: &'a Solution) -> Option<&'a RdfTerm> {
        match p {
            TermPattern::Term(t) => Some(t),
            TermPattern::Var(v) => sol.get(v),
        }
    }

    fn bound_count(p: &TriplePattern, sol: &Solution) -> usize {
        [&p.subject, &p.predicate, &p.object].iter().filter(|x| Self::resolve(x, sol).is_some()).count()
    }

    fn solve(&self, remaining: &mut Vec<&TriplePattern>, sol: Solution, out: &mut Vec<Solution>) {
        if remaining.is_empty() {
            out.push(sol);
            return;
        }
        // most-bound pattern first
        let (i, _) = remaining
            .iter()
            .enumerate()
            .max_by_key(|(i, p)| (Self::bound_count(p, &sol), usize::MAX - i))
            .expect("non-empty");
        let p = remaining.remove(i);
        let candidates: Vec<&Triple> = match Self::resolve(&p.predicate, &sol) {
            Some(RdfTerm::Iri(pred)) => self.by_predicate.get(pred).cloned().unwrap_or_default(),
            Some(_) => Vec::new(),
            None => self.graph.iter().collect(),
        };
        for t in candidates {
            let mut next = sol.clone();
            let pred = RdfTerm::Iri(t.predicate().clone());
            let ok = [(&p.subject, t.subject()), (&p.predicate, &pred), (&p.object, t.object())].into_iter().all(
                |(pat, term)| match pat {
                    TermPattern::Term(c) => c == term,
                    TermPattern::Var(v) => match next.get(v) {
                        Some(b) => b == term,
                        None => {
                            next.insert(v.clone(), term.clone());
                            true
                        }
                    },
                },
            );
            if ok {
                self.solve(remaining, next, out);
            }
        }
        remaining.insert(i, p);
    }
}

impl PatternSource for GraphSource<'_> {
    type Error = Infallible;

    fn match_bgp(&self, patterns: &[TriplePattern], _: &[&Expr]) -> Result<Vec<Solution>, Infallible> {
        let mut out = Vec::new();
        self.solve(&mut patterns.iter().collect(), Solution::new(), &mut out);
        Ok(out)
    }

    fn service(&self, _: &ServiceTarget, _: &AlgebraExpr, _: bool) -> Result<Vec<Solution>, Infallible> {
        Ok(Vec::new())
    }
}
