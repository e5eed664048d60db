mod common;

use std::collections::BTreeSet;

use common::{demo, get, get_query, post, site, validate_results_json, OSTICKET_BASE};
use s3ai::demo::{Variant, GOLDEN_QUERIES, NO_VIDEO_QUERY};
use s3ai::endpoint::{serve, EndpointConfig, EndpointError, ServerHandle};
use s3ai::rdf::{parse_turtle, read_results_json, RdfTerm};

fn start(layout: &s3ai::demo::DemoLayout, variant: Variant) -> (ServerHandle, String) {
    let h = serve(EndpointConfig::new(common::base(variant), 0).unwrap(), site(layout, variant)).unwrap();
    let url = h.url();
    (h, url)
}

fn unescape_html(s: &str) -> String {
    s.replace("&lt;", "<").replace("&gt;", ">").replace("&quot;", "\"").replace("&#39;", "'").replace("&amp;", "&")
}

fn strip_tags(s: &str) -> String {
    let mut out = String::new();
    let mut inside = false;
    for c in s.chars() {
        match c {
            '<' => inside = true,
            '>' => inside = false,
            c if !inside => out.push(c),
            _ => {}
        }
    }
    out
}

#[test]
fn query_forms_agree_and_validate() {
    let (_dir, layout) = demo(20);
    let (_h, url) = start(&layout, Variant::OsTicket);
    let sparql = format!("{url}sparql");
    for (name, q) in GOLDEN_QUERIES {
        let a = get_query(&sparql, q);
        assert_eq!(a.status, 200, "{name}: {}", a.body);
        assert!(a.content_type.starts_with("application/sparql-results+json"));
        validate_results_json(&a.json()).unwrap();
        let b = post(&sparql, "application/sparql-query", q);
        let form: String = url::form_urlencoded::Serializer::new(String::new()).append_pair("query", q).finish();
        let c = post(&sparql, "application/x-www-form-urlencoded", &form);
        let (a, b, c) = (
            read_results_json(&a.body).unwrap(),
            read_results_json(&b.body).unwrap(),
            read_results_json(&c.body).unwrap(),
        );
        assert!(a.bag_eq(&b) && a.bag_eq(&c), "{name}");
    }
}

#[test]
fn empty_pattern_and_demo_query() {
    let (_dir, layout) = demo(0);
    let (_h, url) = start(&layout, Variant::OsTicket);
    let r = get_query(&format!("{url}sparql"), "SELECT * WHERE {}");
    assert_eq!(r.status, 200);
    assert_eq!(r.json()["results"]["bindings"], serde_json::json!([{}]));
    let r = get_query(&format!("{url}sparql"), NO_VIDEO_QUERY);
    let s = read_results_json(&r.body).unwrap();
    assert!(s.rows.iter().any(|row| row["ticket"].string_value().ends_with("/ost_ticket/1149")));
}

#[test]
fn bad_requests_name_the_problem() {
    let (_dir, layout) = demo(0);
    let (_h, url) = start(&layout, Variant::OsTicket);
    let sparql = format!("{url}sparql");
    let r = post(&sparql, "application/sparql-query", "SELECT * WHERE {\n  ?s ?p }");
    assert_eq!(r.status, 400);
    assert!(r.body.contains("line 2, column 9"), "{}", r.body);
    let r = get_query(&sparql, "SELECT * WHERE { ?s ?p ?o } ORDER BY ?s");
    assert_eq!(r.status, 400);
    assert!(r.body.contains("ORDER BY"), "{}", r.body);
    assert_eq!(get(&sparql, Some("application/json")).status, 400);
    assert_eq!(post(&sparql, "text/csv", "x").status, 415);
    let q: String = url::form_urlencoded::byte_serialize(b"SELECT * WHERE {}").collect();
    assert_eq!(get(&format!("{sparql}?query={q}"), Some("image/png")).status, 406);
}

#[test]
fn html_forms_and_results() {
    let (_dir, layout) = demo(0);
    let (_h, url) = start(&layout, Variant::OsTicket);
    let landing = get(&url, Some("text/html"));
    assert_eq!(landing.status, 200);
    for needle in ["sparql", "all", "resource/"] {
        assert!(landing.body.contains(needle));
    }
    let form = get(&format!("{url}sparql"), Some("text/html"));
    assert!(form.body.contains("<form"));
    let q: String = url::form_urlencoded::byte_serialize(NO_VIDEO_QUERY.as_bytes()).collect();
    let table = get(&format!("{url}sparql?query={q}"), Some("text/html"));
    assert!(table.content_type.starts_with("text/html"));
    assert!(table.body.contains("ost_ticket/1149"));
}

#[test]
fn resources_dereference_to_the_same_pairs_in_both_formats() {
    let (_dir, layout) = demo(0);
    let (_h, url) = start(&layout, Variant::OsTicket);
    let iri = format!("{OSTICKET_BASE}resource/ost_ticket/1149");
    let path = format!("{url}resource/ost_ticket/1149");
    let ttl = get(&path, Some("text/turtle"));
    assert_eq!(ttl.status, 200);
    assert!(ttl.content_type.starts_with("text/turtle"));
    let g = parse_turtle(&ttl.body, None).unwrap();
    let from_turtle: BTreeSet<(String, String)> = g
        .iter()
        .inspect(|t| assert_eq!(t.subject().string_value(), iri))
        .map(|t| (RdfTerm::Iri(t.predicate().clone()).to_string(), t.object().to_string()))
        .collect();
    assert!(from_turtle.len() > 10);

    let html = get(&path, Some("text/html,*/*;q=0.8"));
    assert!(html.content_type.starts_with("text/html"));
    let from_html: BTreeSet<(String, String)> = html
        .body
        .lines()
        .filter_map(|l| l.strip_prefix("<tr><td>"))
        .map(|l| {
            let (p, o) = l.split_once("</td><td>").unwrap();
            (unescape_html(p), unescape_html(&strip_tags(o)))
        })
        .collect();
    assert_eq!(from_html, from_turtle);

    assert_eq!(get(&format!("{url}resource/ost_ticket/999999999"), None).status, 404);
    assert_eq!(get(&format!("{url}resource/no_such_table/1"), None).status, 404);
    assert_eq!(get(&path, Some("application/pdf")).status, 406);
}

#[test]
fn all_is_paginated() {
    let (_dir, layout) = demo(150);
    let vg = site(&layout, Variant::OsTicket);
    let expected: BTreeSet<String> = vg.subjects().unwrap().into_iter().map(|i| i.to_string()).collect();
    assert!(expected.len() > 100);
    let (_h, url) = start(&layout, Variant::OsTicket);
    let first = get(&format!("{url}all"), Some("text/plain"));
    assert_eq!(first.body.lines().count(), 100);
    assert_eq!(first.header("link"), Some("</all?page=2>; rel=\"next\""));
    let second = get(&format!("{url}all?page=2"), Some("text/plain"));
    assert!(second.header("link").is_none());
    let listed: BTreeSet<String> = first.body.lines().chain(second.body.lines()).map(str::to_owned).collect();
    assert_eq!(listed, expected);
    let html = get(&format!("{url}all"), Some("text/html"));
    assert_eq!(html.body.matches("<li>").count(), 100);
    assert!(html.body.contains("page 1 of 2"));
    assert_eq!(get(&format!("{url}all?page=0"), None).status, 400);
}

#[test]
fn parallel_identical_queries_agree() {
    let (_dir, layout) = demo(60);
    let (_h, url) = start(&layout, Variant::Glpi);
    let sparql = format!("{url}sparql");
    let q = "SELECT ?s ?p ?o WHERE { ?s ?p ?o }";
    let answers: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..8).map(|_| s.spawn(|| get_query(&sparql, q).body)).collect();
        handles.into_iter().map(|h| read_results_json(&h.join().unwrap()).unwrap()).collect()
    });
    assert!(!answers[0].is_empty());
    for a in &answers[1..] {
        assert!(a.bag_eq(&answers[0]));
    }
}

#[test]
fn stopping_one_endpoint_leaves_the_other_alone() {
    let (_dir, layout) = demo(10);
    let (a, _) = start(&layout, Variant::OsTicket);
    let (_b, url_b) = start(&layout, Variant::Glpi);
    let before = get_query(&format!("{url_b}sparql"), NO_VIDEO_QUERY).body;
    a.stop().unwrap();
    let after = get_query(&format!("{url_b}sparql"), NO_VIDEO_QUERY).body;
    assert_eq!(before, after);
}

#[test]
fn shutdown_drains_in_flight_queries() {
    let (_dir, layout) = demo(25);
    let (h, url) = start(&layout, Variant::OsTicket);
    let q = "SELECT ?a ?b WHERE { ?a ?p ?x . ?b ?q ?x }";
    std::thread::scope(|s| {
        let pending = s.spawn(|| get_query(&format!("{url}sparql"), q));
        std::thread::sleep(std::time::Duration::from_millis(150));
        h.stop().unwrap();
        let r = pending.join().unwrap();
        assert_eq!(r.status, 200);
        assert!(!read_results_json(&r.body).unwrap().is_empty());
    });
}

#[test]
fn startup_failures() {
    let (_dir, layout) = demo(0);
    let (_h, url) = start(&layout, Variant::OsTicket);
    let port: u16 = url.trim_end_matches('/').rsplit(':').next().unwrap().parse().unwrap();
    let taken = EndpointConfig::new(OSTICKET_BASE, port).unwrap();
    assert!(matches!(serve(taken, site(&layout, Variant::OsTicket)), Err(EndpointError::Bind { .. })));
    assert!(matches!(EndpointConfig::new("http://localhost:2020", 2020), Err(EndpointError::Config(_))));
}
