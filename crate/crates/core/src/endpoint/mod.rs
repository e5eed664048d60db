//! Per-site HTTP endpoint: SPARQL protocol queries over a virtual graph,
//! dereferenceable resource IRIs and a paginated subject listing. The
//! federation gateway lives in [`gateway`].

// handlers return ready-made error responses
#![allow(clippy::result_large_err)]

pub mod gateway;
pub mod http;

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use thiserror::Error;

pub use http::{negotiate, ServerHandle};

use crate::mapping::{MappingDocument, STANDARD_PREFIXES};
use crate::rdf::{serialize_turtle, write_results_json, Graph, Iri, RdfTerm, SolutionSequence};
use crate::relational::StoreError;
use crate::sparql::parse_query;
use crate::vgraph::{VirtualError, VirtualGraph};
use http::{escape_html, page, text, typed, HTML, RESULTS_JSON, TURTLE};

#[derive(Debug, Error)]
pub enum EndpointError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot listen on port {port}: {source}")]
    Bind { port: u16, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug)]
pub struct EndpointConfig {
    /// Ends with `/`; resource IRIs are minted under `{base}resource/`.
    pub base: String,
    /// 0 picks a free port.
    pub port: u16,
    pub host: String,
    /// Per-query evaluation budget.
    pub timeout: Duration,
    pub html: bool,
    pub page_size: usize,
}

impl EndpointConfig {
    pub fn new(base: impl Into<String>, port: u16) -> Result<Self, EndpointError> {
        let base = base.into();
        if !base.ends_with('/') {
            return Err(EndpointError::Config(format!("base IRI '{base}' must end with '/'")));
        }
        Iri::new(&base).map_err(|e| EndpointError::Config(e.to_string()))?;
        Ok(Self { base, port, host: "127.0.0.1".into(), timeout: Duration::from_secs(60), html: true, page_size: 100 })
    }
}

struct Site {
    vg: VirtualGraph,
    cfg: EndpointConfig,
}

type Shared = Arc<Site>;

/// Starts serving `vg` per `cfg`. Resource IRIs are minted from the
/// mapping's base, which should agree with `cfg.base`.
pub fn serve(cfg: EndpointConfig, vg: VirtualGraph) -> Result<ServerHandle, EndpointError> {
    let listener = http::bind(&cfg.host, cfg.port).map_err(|source| EndpointError::Bind { port: cfg.port, source })?;
    let app = router(cfg, vg);
    Ok(http::spawn(listener, app, None::<std::future::Ready<()>>)?)
}

/// The routes of one site, for embedding or custom serving.
pub fn router(cfg: EndpointConfig, vg: VirtualGraph) -> Router {
    let site = Arc::new(Site { vg, cfg });
    Router::new()
        .route("/", get(landing))
        .route("/sparql", get(sparql).post(sparql))
        .route("/resource/{*rest}", get(resource))
        .route("/all", get(all))
        .with_state(site)
}

/// Prefix map for Turtle responses: the mapping's own absolute prefixes.
fn prefixed(doc: &MappingDocument, mut g: Graph) -> Graph {
    let extra = doc.extra_prefixes.iter().map(|(l, n)| (l.as_str(), n.as_str()));
    for (label, ns) in STANDARD_PREFIXES.into_iter().chain(extra) {
        if Iri::new(ns).is_ok() {
            g.add_prefix(label, ns);
        }
    }
    g.add_prefix("vocab", doc.vocab_namespace());
    g
}

async fn landing(State(site): State<Shared>) -> Response {
    let b = escape_html(&site.cfg.base);
    let db = escape_html(&site.vg.document().database.name);
    let body = format!(
        "<p>Virtual RDF view of database <code>{db}</code>.</p>\n<ul>\n\
         <li><a href=\"{b}sparql\">SPARQL endpoint</a>: GET or POST a <code>query</code>.</li>\n\
         <li><a href=\"{b}all\">All resources</a>: browse every subject, {n} per page.</li>\n\
         <li>Resource IRIs under <code>{b}resource/</code> dereference to their description.</li>\n</ul>",
        n = site.cfg.page_size
    );
    typed(HTML, page("S3AI endpoint", &body))
}

const QUERY_FORM: &str = "<form method=\"post\" action=\"sparql\">\n<textarea name=\"query\" rows=\"12\" cols=\"80\">SELECT * WHERE { ?s ?p ?o } LIMIT 10</textarea><br>\n<input type=\"submit\" value=\"Run\">\n</form>";

fn virtual_status(e: &VirtualError) -> StatusCode {
    match e {
        VirtualError::Unsupported(_) => StatusCode::BAD_REQUEST,
        VirtualError::Store(StoreError::Timeout(_)) => StatusCode::GATEWAY_TIMEOUT,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

pub(crate) fn results_table(s: &SolutionSequence) -> String {
    let mut out = String::from("<table border=\"1\">\n<tr>");
    for v in &s.variables {
        out.push_str(&format!("<th>?{}</th>", escape_html(v)));
    }
    out.push_str("</tr>\n");
    for row in &s.rows {
        out.push_str("<tr>");
        for v in &s.variables {
            let cell = row.get(v).map(|t| escape_html(&t.to_string())).unwrap_or_default();
            out.push_str(&format!("<td>{cell}</td>"));
        }
        out.push_str("</tr>\n");
    }
    out.push_str("</table>");
    out
}

async fn sparql(
    State(site): State<Shared>,
    method: Method,
    Query(params): Query<HashMap<String, String>>,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    let offers = [RESULTS_JSON, "application/json", HTML];
    let offers = if site.cfg.html { &offers[..] } else { &offers[..2] };
    let Some(media) = negotiate(http::accept(&headers), offers) else {
        return http::not_acceptable(offers);
    };
    let query = match http::protocol_query(&method, &params, &headers, &body) {
        Ok(Some(q)) => q,
        Ok(None) if media == HTML => return typed(HTML, page("SPARQL query", QUERY_FORM)),
        Ok(None) => return text(StatusCode::BAD_REQUEST, "missing 'query' parameter"),
        Err(resp) => return resp,
    };
    let algebra = match parse_query(&query) {
        Ok(a) => a,
        Err(e) => return text(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let timeout = site.cfg.timeout;
    let job = tokio::task::spawn_blocking(move || site.vg.evaluate(&algebra));
    let solutions = match tokio::time::timeout(timeout, job).await {
        Err(_) => return text(StatusCode::GATEWAY_TIMEOUT, "query timed out"),
        Ok(Err(e)) => return text(StatusCode::INTERNAL_SERVER_ERROR, format!("evaluation failed: {e}")),
        Ok(Ok(Err(e))) => return text(virtual_status(&e), e.to_string()),
        Ok(Ok(Ok(s))) => s,
    };
    if media == HTML {
        typed(HTML, page("SPARQL results", &results_table(&solutions)))
    } else {
        typed(RESULTS_JSON, write_results_json(&solutions))
    }
}

fn resource_html(iri: &Iri, g: &Graph) -> String {
    let mut rows = String::new();
    for t in g.iter() {
        let value = match t.object() {
            RdfTerm::Iri(o) => {
                format!("<a href=\"{0}\">{1}</a>", escape_html(o.as_str()), escape_html(&t.object().to_string()))
            }
            other => escape_html(&other.to_string()),
        };
        rows.push_str(&format!(
            "<tr><td>{}</td><td>{value}</td></tr>\n",
            escape_html(&RdfTerm::Iri(t.predicate().clone()).to_string())
        ));
    }
    page(
        &format!("Resource {}", iri.as_str()),
        &format!("<table border=\"1\">\n<tr><th>Property</th><th>Value</th></tr>\n{rows}</table>"),
    )
}

async fn resource(State(site): State<Shared>, Path(rest): Path<String>, headers: HeaderMap) -> Response {
    let offers = [TURTLE, HTML];
    let offers = if site.cfg.html { &offers[..] } else { &offers[..1] };
    let Some(media) = negotiate(http::accept(&headers), offers) else {
        return http::not_acceptable(offers);
    };
    let iri = match Iri::new(format!("{}{rest}", site.vg.document().resource_prefix())) {
        Ok(i) => i,
        Err(_) => return text(StatusCode::NOT_FOUND, "no such resource"),
    };
    let lookup = iri.clone();
    let described = {
        let site = site.clone();
        tokio::task::spawn_blocking(move || site.vg.describe(&lookup, false)).await
    };
    let g = match described {
        Err(e) => return text(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        Ok(Err(e)) => return text(virtual_status(&e), e.to_string()),
        Ok(Ok(Some(g))) if !g.is_empty() => g,
        Ok(Ok(_)) => return text(StatusCode::NOT_FOUND, format!("no resource {iri}")),
    };
    if media == HTML {
        typed(HTML, resource_html(&iri, &g))
    } else {
        typed(TURTLE, serialize_turtle(&prefixed(site.vg.document(), g)))
    }
}

async fn all(
    State(site): State<Shared>,
    Query(params): Query<HashMap<String, String>>,
    headers: HeaderMap,
) -> Response {
    let offers = [HTML, "text/plain"];
    let offers = if site.cfg.html { &offers[..] } else { &offers[1..] };
    let Some(media) = negotiate(http::accept(&headers), offers) else {
        return http::not_acceptable(offers);
    };
    let page_no = match params.get("page").map(|p| p.parse::<usize>()) {
        None => 1,
        Some(Ok(n)) if n >= 1 => n,
        Some(_) => return text(StatusCode::BAD_REQUEST, "page must be a positive integer"),
    };
    let listed = {
        let site = site.clone();
        tokio::task::spawn_blocking(move || site.vg.subjects()).await
    };
    let subjects = match listed {
        Err(e) => return text(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        Ok(Err(e)) => return text(virtual_status(&e), e.to_string()),
        Ok(Ok(s)) => s,
    };
    let size = site.cfg.page_size.max(1);
    let pages = subjects.len().div_ceil(size).max(1);
    let chunk: Vec<&Iri> = subjects.iter().skip((page_no - 1) * size).take(size).collect();
    let mut resp = if media == HTML {
        let mut body = String::from("<ul>\n");
        for s in &chunk {
            let s = escape_html(s.as_str());
            body.push_str(&format!("<li><a href=\"{s}\">{s}</a></li>\n"));
        }
        body.push_str("</ul>\n<p>");
        if page_no > 1 {
            body.push_str(&format!("<a href=\"?page={}\">previous</a> ", page_no - 1));
        }
        body.push_str(&format!("page {page_no} of {pages}"));
        if page_no < pages {
            body.push_str(&format!(" <a href=\"?page={}\">next</a>", page_no + 1));
        }
        body.push_str("</p>");
        typed(HTML, page("All resources", &body))
    } else {
        typed("text/plain", chunk.iter().map(|s| format!("{s}\n")).collect())
    };
    if page_no < pages {
        if let Ok(v) = format!("</all?page={}>; rel=\"next\"", page_no + 1).parse() {
            resp.headers_mut().insert(axum::http::header::LINK, v);
        }
    }
    resp.into_response()
}
