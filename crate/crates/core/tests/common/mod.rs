#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Once;
use std::time::Duration;

use rand::seq::IndexedRandom;
use rand::Rng;
use s3ai::demo::{aligned_mapping, build_fixtures, DemoLayout, FixtureSpec, Variant};
use s3ai::rdf::{Graph, RdfTerm, Triple};
use s3ai::relational::{StoreOptions, SQL_LOG_ENV};
use s3ai::sparql::{evaluate_algebra, parse_query};
use s3ai::vgraph::{GraphSource, VirtualGraph};
use tempfile::TempDir;

pub const OSTICKET_BASE: &str = "http://localhost:2020/";
pub const GLPI_BASE: &str = "http://localhost:2021/";

pub fn base(variant: Variant) -> &'static str {
    match variant {
        Variant::OsTicket => OSTICKET_BASE,
        Variant::Glpi => GLPI_BASE,
    }
}

/// File shared by every test binary (and the servers they spawn) that
/// receives each SQL statement sent to a store.
pub fn sql_log_path() -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join("sql-statements.log")
}

static SQL_LOG: Once = Once::new();

pub fn init_sql_log() {
    SQL_LOG.call_once(|| std::env::set_var(SQL_LOG_ENV, sql_log_path()));
}

/// Demo directory with seed rows plus `extra` generated tickets per site.
pub fn demo(extra: usize) -> (TempDir, DemoLayout) {
    init_sql_log();
    let dir = tempfile::tempdir().unwrap();
    let layout = build_fixtures(
        dir.path(),
        &FixtureSpec::with_extra(Variant::OsTicket, extra, 7),
        &FixtureSpec::with_extra(Variant::Glpi, extra, 7),
    )
    .unwrap();
    (dir, layout)
}

pub fn site(layout: &DemoLayout, variant: Variant) -> VirtualGraph {
    let doc = aligned_mapping(layout, variant, base(variant), &[]).unwrap();
    VirtualGraph::open(doc, StoreOptions::default()).unwrap()
}

pub fn write_file(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

pub fn term(t: &RdfTerm) -> String {
    match t {
        RdfTerm::Iri(i) => format!("<{i}>"),
        RdfTerm::Literal(l) => {
            let mut s = String::from("\"");
            for c in l.lexical().chars() {
                match c {
                    '"' => s.push_str("\\\""),
                    '\\' => s.push_str("\\\\"),
                    '\n' => s.push_str("\\n"),
                    '\r' => s.push_str("\\r"),
                    c => s.push(c),
                }
            }
            s.push('"');
            if let Some(lang) = l.language() {
                s.push('@');
                s.push_str(lang);
            } else if !l.is_simple() {
                s.push_str(&format!("^^<{}>", l.datatype()));
            }
            s
        }
        RdfTerm::BlankNode(b) => format!("_:{b}"),
    }
}

fn regex_safe(s: &str) -> String {
    s.chars().filter(|c| c.is_alphanumeric() || *c == ' ').take(6).collect::<String>().trim().to_owned()
}

/// Patterns around one seed triple: a star on its subject and, when the
/// object is an IRI, one hop further.
fn bgp<R: Rng>(
    rng: &mut R,
    g: &Graph,
    triples: &[&Triple],
    tag: &str,
    vars: &mut Vec<String>,
    filters: &mut Vec<String>,
) -> String {
    let seed = *triples.choose(rng).unwrap();
    let s = format!("?s{tag}");
    vars.push(s.clone());
    let mut out = Vec::new();
    let subject = if rng.random_bool(0.15) { term(seed.subject()) } else { s.clone() };
    let add = |rng: &mut R, subj: &str, t: &Triple, n: usize, out: &mut Vec<String>, vars: &mut Vec<String>| {
        // one variable predicate at most; more blow up the candidate space
        let p = if !vars.iter().any(|v| v.starts_with("?p")) && rng.random_bool(0.12) {
            let v = format!("?p{tag}{n}");
            vars.push(v.clone());
            v
        } else {
            term(&RdfTerm::Iri(t.predicate().clone()))
        };
        let o = if rng.random_bool(0.2) {
            term(t.object())
        } else {
            let v = format!("?o{tag}{n}");
            vars.push(v.clone());
            v
        };
        out.push(format!("{subj} {p} {o} ."));
        o
    };
    let first_o = add(rng, &subject, seed, 0, &mut out, vars);
    let star: Vec<&Triple> = g.with_subject(seed.subject()).collect();
    for n in 1..rng.random_range(1..=3) {
        let t = *star.choose(rng).unwrap();
        let o = add(rng, &subject, t, n, &mut out, vars);
        if rng.random_bool(0.3) && o.starts_with('?') {
            if let Some(l) = t.object().as_literal() {
                let pat = regex_safe(l.lexical());
                if !pat.is_empty() {
                    filters.push(format!("regex(str({o}), \"{pat}\", \"i\")"));
                }
            }
        }
    }
    if let (RdfTerm::Iri(_), true) = (seed.object(), first_o.starts_with('?')) {
        let next: Vec<&Triple> = g.with_subject(seed.object()).collect();
        if !next.is_empty() && rng.random_bool(0.5) {
            let t = *next.choose(rng).unwrap();
            let v = format!("?x{tag}");
            vars.push(v.clone());
            out.push(format!("{first_o} {} {v} .", term(&RdfTerm::Iri(t.predicate().clone()))));
        }
    }
    if rng.random_bool(0.1) {
        // a subject no row backs
        out.push(format!("{s} ?miss{tag} <{}resource/ost_ticket/999999999> .", OSTICKET_BASE));
        vars.push(format!("?miss{tag}"));
    }
    if rng.random_bool(0.2) {
        if let Some(l) = seed.object().as_literal() {
            if first_o.starts_with('?') {
                let op = *["=", "!="].choose(rng).unwrap();
                filters.push(format!("{first_o} {op} {}", term(&RdfTerm::Literal(l.clone()))));
            }
        }
    }
    out.join("\n  ")
}

/// A random query in the supported subset whose patterns are drawn from
/// `g`, so most of them have answers.
pub fn random_query<R: Rng>(rng: &mut R, g: &Graph) -> String {
    let triples: Vec<&Triple> = g.iter().collect();
    let mut vars = Vec::new();
    let mut filters = Vec::new();
    let left = bgp(rng, g, &triples, "a", &mut vars, &mut filters);
    let mut body = if rng.random_bool(0.2) {
        let mut fr = Vec::new();
        let right = bgp(rng, g, &triples, "b", &mut vars, &mut fr);
        filters.extend(fr);
        format!("{{ {left} }} UNION {{ {right} }}")
    } else {
        left
    };
    for f in &filters {
        body.push_str(&format!("\n  FILTER({f})"));
    }
    vars.sort();
    vars.dedup();
    let projection = if rng.random_bool(0.4) {
        "*".to_owned()
    } else {
        let k = rng.random_range(1..=vars.len());
        vars.choose_multiple(rng, k).cloned().collect::<Vec<_>>().join(" ")
    };
    let distinct = if rng.random_bool(0.3) { "DISTINCT " } else { "" };
    format!("SELECT {distinct}{projection} WHERE {{\n  {body}\n}}")
}

/// Multiset equality of the virtual answer and the answer over the
/// materialized graph.
pub fn oracle_agrees(vg: &VirtualGraph, g: &Graph, q: &str) -> Result<usize, String> {
    let a = parse_query(q).map_err(|e| format!("{e}\n{q}"))?;
    let got = vg.evaluate(&a).map_err(|e| format!("{e}\n{q}"))?;
    let want = evaluate_algebra(&GraphSource::new(g), &a, false).unwrap();
    if got.bag_eq(&want) {
        Ok(got.len())
    } else {
        Err(format!(
            "mismatch for\n{q}\nvirtual {} rows, reference {} rows\nvirtual: {:?}\nreference: {:?}",
            got.len(),
            want.len(),
            got.multiset().iter().take(5).collect::<Vec<_>>(),
            want.multiset().iter().take(5).collect::<Vec<_>>()
        ))
    }
}

pub struct Reply {
    pub status: u16,
    pub content_type: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl Reply {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }

    pub fn json(&self) -> serde_json::Value {
        serde_json::from_str(&self.body).unwrap_or_else(|e| panic!("{e}: {}", self.body))
    }
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(120)))
        .build()
        .into()
}

fn reply(mut r: ureq::http::Response<ureq::Body>) -> Reply {
    let status = r.status().as_u16();
    let headers: Vec<(String, String)> =
        r.headers().iter().map(|(k, v)| (k.to_string(), v.to_str().unwrap_or("").to_owned())).collect();
    let content_type = headers.iter().find(|(k, _)| k == "content-type").map(|(_, v)| v.clone()).unwrap_or_default();
    let body = r.body_mut().with_config().limit(1 << 30).read_to_string().unwrap();
    Reply { status, content_type, headers, body }
}

pub fn get(url: &str, accept: Option<&str>) -> Reply {
    let mut req = agent().get(url);
    if let Some(a) = accept {
        req = req.header("Accept", a);
    }
    reply(req.call().unwrap())
}

pub fn post(url: &str, content_type: &str, body: &str) -> Reply {
    reply(agent().post(url).header("Content-Type", content_type).send(body).unwrap())
}

pub fn get_query(endpoint: &str, query: &str) -> Reply {
    let q: String = url::form_urlencoded::byte_serialize(query.as_bytes()).collect();
    get(&format!("{endpoint}?query={q}"), None)
}

/// Structural check of a SPARQL results JSON document: head.vars, and
/// bindings whose values are well-formed RDF terms of declared variables.
pub fn validate_results_json(v: &serde_json::Value) -> Result<(), String> {
    let obj = v.as_object().ok_or("document is not an object")?;
    let head = obj.get("head").and_then(|h| h.as_object()).ok_or("missing head")?;
    let vars: Vec<&str> = head
        .get("vars")
        .and_then(|v| v.as_array())
        .ok_or("missing head.vars")?
        .iter()
        .map(|v| v.as_str().ok_or("non-string variable"))
        .collect::<Result<_, _>>()?;
    let results = obj.get("results").and_then(|r| r.as_object()).ok_or("missing results")?;
    let bindings = results.get("bindings").and_then(|b| b.as_array()).ok_or("missing results.bindings")?;
    for b in bindings {
        let b = b.as_object().ok_or("binding is not an object")?;
        for (var, term) in b {
            if !vars.contains(&var.as_str()) {
                return Err(format!("binding for undeclared variable {var}"));
            }
            let t = term.as_object().ok_or("term is not an object")?;
            let ty = t.get("type").and_then(|x| x.as_str()).ok_or("term without type")?;
            t.get("value").and_then(|x| x.as_str()).ok_or("term without string value")?;
            for k in t.keys() {
                if !["type", "value", "xml:lang", "datatype"].contains(&k.as_str()) {
                    return Err(format!("unexpected term key {k}"));
                }
            }
            let lang = t.contains_key("xml:lang");
            let dt = t.contains_key("datatype");
            match ty {
                "uri" | "bnode" if lang || dt => return Err(format!("{ty} with literal annotations")),
                "uri" | "bnode" => {}
                "literal" | "typed-literal" if lang && dt => return Err("literal with both lang and datatype".into()),
                "literal" | "typed-literal" => {}
                other => return Err(format!("unknown term type {other}")),
            }
        }
    }
    Ok(())
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_s3ai")
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Runs the CLI in `cwd` with extra environment variables and optional stdin.
pub fn run(cwd: &Path, args: &[&str], env: &[(&str, &str)], stdin: Option<&str>) -> Run {
    use std::io::Write;
    use std::process::{Command, Stdio};
    init_sql_log();
    let mut cmd = Command::new(bin());
    cmd.current_dir(cwd)
        .args(args)
        .env_remove(s3ai::relational::USER_ENV)
        .env_remove(s3ai::relational::PASS_ENV)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    for (k, v) in env {
        cmd.env(k, v);
    }
    let mut child = cmd.spawn().unwrap();
    let mut pipe = child.stdin.take().unwrap();
    if let Some(text) = stdin {
        pipe.write_all(text.as_bytes()).unwrap();
    }
    drop(pipe);
    let out = child.wait_with_output().unwrap();
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn free_port() -> u16 {
    std::net::TcpListener::bind(("127.0.0.1", 0)).unwrap().local_addr().unwrap().port()
}

/// A `s3ai serve` child process, killed on drop.
pub struct ServeProcess {
    child: std::process::Child,
    pub url: String,
}

impl ServeProcess {
    /// Serves `mapping` under `base` on a free local port and waits until
    /// the landing page answers.
    pub fn start(cwd: &Path, mapping: &Path, base: &str) -> Self {
        init_sql_log();
        let port = free_port();
        let child = std::process::Command::new(bin())
            .current_dir(cwd)
            .args(["serve", "-b", base, "-p", &port.to_string()])
            .arg(mapping)
            .stdout(std::process::Stdio::null())
            .stderr(std::process::Stdio::null())
            .spawn()
            .unwrap();
        let mut p = Self { child, url: format!("http://127.0.0.1:{port}/") };
        let deadline = std::time::Instant::now() + Duration::from_secs(30);
        loop {
            if let Ok(Some(status)) = p.child.try_wait() {
                panic!("serve exited early with {status}");
            }
            if std::net::TcpStream::connect(("127.0.0.1", port)).is_ok() && get(&p.url, None).status == 200 {
                return p;
            }
            assert!(std::time::Instant::now() < deadline, "serve did not come up");
            std::thread::sleep(Duration::from_millis(50));
        }
    }
}

impl Drop for ServeProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
