use proptest::collection::vec;
use proptest::prelude::*;
use s3ai::rdf::{
    parse_turtle, read_results_json, serialize_turtle, write_results_json, Graph, Iri, Literal, RdfTerm, Solution,
    SolutionSequence, Triple,
};
use s3ai::sparql::{parse_query, render_query, QueryError};

fn iri() -> impl Strategy<Value = Iri> {
    prop_oneof![
        "[a-z][a-zA-Z0-9_]{0,6}".prop_map(|l| format!("http://ex.org/ns#{l}")),
        "[a-z0-9]{1,4}(/[a-z0-9_.-]{1,5}){0,2}".prop_map(|p| format!("http://localhost:2020/resource/{p}")),
        "[a-z]{1,3}".prop_map(|l| format!("urn:x:{l}%20{l}")),
    ]
    .prop_map(|s| Iri::new(s).unwrap())
}

fn lexical() -> impl Strategy<Value = String> {
    prop_oneof!["[ -~]{0,12}", "\\PC{0,8}", Just("line\nbreak\t\"quoted\" \\ back".to_owned()), "-?[0-9]{1,5}",]
}

fn literal() -> impl Strategy<Value = Literal> {
    prop_oneof![
        lexical().prop_map(Literal::simple),
        (lexical(), "[a-z]{2}(-[A-Za-z0-9]{1,4})?").prop_map(|(l, t)| Literal::lang(l, t).unwrap()),
        (
            lexical(),
            prop_oneof![
                Just("http://www.w3.org/2001/XMLSchema#integer"),
                Just("http://www.w3.org/2001/XMLSchema#dateTime"),
                Just("http://www.w3.org/2001/XMLSchema#decimal"),
                Just("http://ex.org/dt#custom"),
            ]
        )
            .prop_map(|(l, d)| Literal::typed(l, Iri::new(d).unwrap())),
    ]
}

fn term(blank: bool) -> BoxedStrategy<RdfTerm> {
    let base = prop_oneof![iri().prop_map(RdfTerm::Iri), literal().prop_map(RdfTerm::Literal)];
    if blank {
        prop_oneof![base, "[a-z][a-z0-9]{0,4}".prop_map(RdfTerm::BlankNode)].boxed()
    } else {
        base.boxed()
    }
}

fn graph() -> impl Strategy<Value = Graph> {
    vec((iri(), iri(), term(false)), 0..25)
        .prop_map(|ts| ts.into_iter().map(|(s, p, o)| Triple::new(RdfTerm::Iri(s), p, o).unwrap()).collect())
}

fn solutions() -> impl Strategy<Value = SolutionSequence> {
    let vars = vec("[a-z][a-z0-9_]{0,4}", 0..5).prop_map(|mut v| {
        v.sort();
        v.dedup();
        v
    });
    vars.prop_flat_map(|vars| {
        let row = vec(proptest::option::of(term(true)), vars.len()).prop_map({
            let vars = vars.clone();
            move |cells| vars.iter().zip(cells).filter_map(|(v, c)| c.map(|t| (v.clone(), t))).collect::<Solution>()
        });
        (Just(vars), vec(row, 0..8))
    })
    .prop_map(|(vars, rows)| SolutionSequence::new(vars, rows))
}

fn var() -> impl Strategy<Value = String> {
    "[a-e]".prop_map(|v| format!("?{v}"))
}

fn query_term() -> impl Strategy<Value = String> {
    prop_oneof![
        3 => var(),
        1 => iri().prop_map(|i| format!("<{i}>")),
        1 => "[a-zA-Z ]{0,6}".prop_map(|s| format!("\"{s}\"")),
        1 => (0i64..1000).prop_map(|n| n.to_string()),
    ]
}

fn pattern() -> impl Strategy<Value = String> {
    (var(), prop_oneof![3 => iri().prop_map(|i| format!("<{i}>")), 1 => var(), 1 => Just("a".to_owned())], query_term())
        .prop_map(|(s, p, o)| format!("{s} {p} {o} ."))
}

fn filter() -> impl Strategy<Value = String> {
    prop_oneof![
        (var(), prop_oneof![Just("="), Just("!="), Just("<"), Just(">="), Just("<=")], query_term())
            .prop_map(|(v, op, t)| format!("FILTER({v} {op} {t})")),
        (var(), "[a-zA-Z]{1,5}", any::<bool>()).prop_map(|(v, p, i)| {
            if i {
                format!("FILTER regex(str({v}), \"{p}\", \"i\")")
            } else {
                format!("FILTER regex({v}, \"{p}\")")
            }
        }),
        (var(), var()).prop_map(|(a, b)| format!("FILTER(bound({a}) && !({b} = {a}) || bound({b}))")),
    ]
}

fn group() -> impl Strategy<Value = String> {
    let leaf = (vec(pattern(), 0..4), proptest::option::of(filter())).prop_map(|(ps, f)| {
        let mut body = ps.join(" ");
        if let Some(f) = f {
            body.push(' ');
            body.push_str(&f);
        }
        body
    });
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{{ {a} }} UNION {{ {b} }}")),
            (inner.clone(), any::<bool>(), "[a-z]{1,5}").prop_map(|(a, silent, h)| format!(
                "SERVICE {}<http://{h}.test/sparql> {{ {a} }}",
                if silent { "SILENT " } else { "" }
            )),
            (inner.clone(), inner).prop_map(|(a, b)| format!("{{ {a} }} {{ {b} }}")),
        ]
    })
}

fn query() -> impl Strategy<Value = String> {
    (
        any::<bool>(),
        proptest::option::of(vec(var(), 1..4)),
        group(),
        proptest::option::of(0u64..50),
        proptest::option::of(0u64..20),
    )
        .prop_map(|(distinct, proj, body, limit, offset)| {
            let proj = proj.map(|mut v| {
                v.dedup();
                v.join(" ")
            });
            let mut q = format!(
                "SELECT {}{} WHERE {{ {body} }}",
                if distinct { "DISTINCT " } else { "" },
                proj.as_deref().unwrap_or("*")
            );
            if let Some(l) = limit {
                q.push_str(&format!(" LIMIT {l}"));
            }
            if let Some(o) = offset {
                q.push_str(&format!(" OFFSET {o}"));
            }
            q
        })
}

proptest! {
    #[test]
    fn turtle_round_trips(g in graph()) {
        let text = serialize_turtle(&g);
        let back = parse_turtle(&text, None).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back.iter().collect::<Vec<_>>(), g.iter().collect::<Vec<_>>(), "{}", text);
        prop_assert_eq!(serialize_turtle(&back), text);
    }

    #[test]
    fn results_json_round_trips(s in solutions()) {
        let text = write_results_json(&s);
        let back = read_results_json(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back, s);
    }

    #[test]
    fn rendered_queries_parse_to_the_same_algebra(q in query()) {
        let a = match parse_query(&q) {
            Err(QueryError::Unsupported { .. }) => return Err(TestCaseError::reject("outside the subset")),
            r => r.map_err(|e| TestCaseError::fail(format!("{e}\n{q}")))?,
        };
        let text = render_query(&a);
        let b = parse_query(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&a, &b, "{}\n{}", q, text);
        prop_assert_eq!(render_query(&b), text);
    }

    #[test]
    fn parser_never_panics(s in "\\PC{0,60}") {
        let _ = parse_query(&s);
        let _ = parse_turtle(&s, Some("http://ex.org/"));
        let _ = read_results_json(&s);
    }
}
