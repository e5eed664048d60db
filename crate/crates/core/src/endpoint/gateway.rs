//! Federation gateway: one HTTP entry point at the integration site that
//! lists the registered sites, serves the example-query manifest and runs
//! site, federated and mediated queries.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{HeaderMap, HeaderValue, Method, StatusCode};
use axum::middleware;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;

use super::http::{self, page, text, typed, HTML, RESULTS_JSON};
use super::{results_table, EndpointError, ServerHandle};
use crate::demo::examples_manifest;
use crate::federate::{
    evaluate_federated, mediate, EndpointRegistry, FederatedResult, FederationError, FederationOptions, ServiceClient,
};
use crate::rdf::write_results_json;
use crate::sparql::{parse_query, AlgebraExpr};

pub const DEFAULT_PORT: u16 = 3030;
pub const WARNINGS_HEADER: &str = "x-s3ai-warnings";

#[derive(Clone, Debug)]
pub struct GatewayConfig {
    pub host: String,
    pub port: u16,
    /// Re-read on every request, so sites can be toggled without a restart.
    pub registry: PathBuf,
    pub options: FederationOptions,
}

impl GatewayConfig {
    pub fn new(registry: impl Into<PathBuf>, port: u16) -> Self {
        Self {
            host: "127.0.0.1".into(),
            port,
            registry: registry.into(),
            options: FederationOptions { provenance_var: Some("site".into()), ..FederationOptions::default() },
        }
    }
}

struct Gateway {
    cfg: GatewayConfig,
    client: Arc<dyn ServiceClient>,
}

type Shared = Arc<Gateway>;

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum QueryMode {
    Site,
    Federated,
    Mediated,
}

#[derive(Debug, Deserialize)]
pub struct QueryRequest {
    pub mode: QueryMode,
    #[serde(default)]
    pub site: Option<String>,
    pub query: String,
}

pub fn serve_gateway(cfg: GatewayConfig, client: Arc<dyn ServiceClient>) -> Result<ServerHandle, EndpointError> {
    let listener = http::bind(&cfg.host, cfg.port).map_err(|source| EndpointError::Bind { port: cfg.port, source })?;
    let app = gateway_router(cfg, client);
    Ok(http::spawn(listener, app, None::<std::future::Ready<()>>)?)
}

pub fn gateway_router(cfg: GatewayConfig, client: Arc<dyn ServiceClient>) -> Router {
    let gw = Arc::new(Gateway { cfg, client });
    Router::new()
        .route("/", get(landing))
        .route("/api/endpoints", get(endpoints))
        .route("/api/examples", get(examples))
        .route("/api/query", post(api_query))
        .route("/sparql", get(sparql).post(sparql))
        .layer(middleware::from_fn(http::cors))
        .with_state(gw)
}

fn load_registry(gw: &Gateway) -> Result<EndpointRegistry, Response> {
    let text_ = std::fs::read_to_string(&gw.cfg.registry).map_err(|e| {
        text(StatusCode::INTERNAL_SERVER_ERROR, format!("cannot read registry {}: {e}", gw.cfg.registry.display()))
    })?;
    EndpointRegistry::parse(&text_).map_err(|e| text(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))
}

fn federation_status(e: &FederationError) -> StatusCode {
    match e {
        FederationError::Unsupported(_) => StatusCode::BAD_REQUEST,
        FederationError::NoActiveSites => StatusCode::SERVICE_UNAVAILABLE,
        FederationError::Registry { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        FederationError::Service { .. } | FederationError::Services(_) => StatusCode::BAD_GATEWAY,
    }
}

fn results(r: FederatedResult, media: &str) -> Response {
    let mut resp = if media == HTML {
        typed(HTML, page("Federated results", &results_table(&r.solutions)))
    } else {
        typed(RESULTS_JSON, write_results_json(&r.solutions))
    };
    if !r.warnings.is_empty() {
        let joined: String = r
            .warnings
            .join(" | ")
            .chars()
            .map(|c| if c.is_ascii() && !c.is_ascii_control() { c } else { ' ' })
            .collect();
        if let Ok(v) = HeaderValue::from_str(&joined) {
            resp.headers_mut().insert(WARNINGS_HEADER, v);
        }
    }
    resp
}

async fn landing() -> Response {
    typed(
        HTML,
        page(
            "S3AI gateway",
            "<ul>\n<li><a href=\"api/endpoints\">api/endpoints</a>: registered sites</li>\n\
             <li><a href=\"api/examples\">api/examples</a>: predefined queries</li>\n\
             <li>POST api/query with <code>{\"mode\", \"site\", \"query\"}</code></li>\n\
             <li><a href=\"sparql\">sparql</a>: federated SPARQL endpoint (SERVICE blocks)</li>\n</ul>",
        ),
    )
}

async fn endpoints(State(gw): State<Shared>) -> Response {
    match load_registry(&gw) {
        Ok(r) => Json(r).into_response(),
        Err(resp) => resp,
    }
}

async fn examples() -> Response {
    Json(examples_manifest()).into_response()
}

/// Runs `algebra` federated (or mediated first) off the async runtime.
async fn run(gw: Shared, registry: EndpointRegistry, algebra: AlgebraExpr, mediated: bool, media: &str) -> Response {
    let job = tokio::task::spawn_blocking(move || {
        let opts = &gw.cfg.options;
        let algebra = if mediated { mediate(&algebra, &registry, opts)? } else { algebra };
        evaluate_federated(&algebra, &registry, opts, gw.client.as_ref())
    });
    match job.await {
        Err(e) => text(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        Ok(Err(e)) => text(federation_status(&e), e.to_string()),
        Ok(Ok(r)) => results(r, media),
    }
}

async fn api_query(State(gw): State<Shared>, body: Bytes) -> Response {
    let req: QueryRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return text(StatusCode::BAD_REQUEST, format!("bad request body: {e}")),
    };
    let registry = match load_registry(&gw) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    let algebra = match parse_query(&req.query) {
        Ok(a) => a,
        Err(e) => return text(StatusCode::BAD_REQUEST, e.to_string()),
    };
    match req.mode {
        QueryMode::Federated => run(gw, registry, algebra, false, RESULTS_JSON).await,
        QueryMode::Mediated => run(gw, registry, algebra, true, RESULTS_JSON).await,
        QueryMode::Site => {
            let Some(name) = req.site else {
                return text(StatusCode::BAD_REQUEST, "mode 'site' needs a 'site'");
            };
            let Some(site) = registry.site(&name).cloned() else {
                return text(StatusCode::NOT_FOUND, format!("unknown site '{name}'"));
            };
            if !site.active {
                return text(StatusCode::CONFLICT, format!("site '{name}' is inactive"));
            }
            let job = tokio::task::spawn_blocking(move || gw.client.select(&site.service, &req.query, site.timeout));
            match job.await {
                Err(e) => text(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
                Ok(Err(e)) => text(StatusCode::BAD_GATEWAY, format!("{name}: {e}")),
                Ok(Ok(s)) => typed(RESULTS_JSON, write_results_json(&s)),
            }
        }
    }
}

async fn sparql(
    State(gw): State<Shared>,
    method: Method,
    Query(params): Query<HashMap<String, String>>,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    let offers = [RESULTS_JSON, "application/json", HTML];
    let Some(media) = http::negotiate(http::accept(&headers), &offers) else {
        return http::not_acceptable(&offers);
    };
    let query = match http::protocol_query(&method, &params, &headers, &body) {
        Ok(Some(q)) => q,
        Ok(None) => return text(StatusCode::BAD_REQUEST, "missing 'query' parameter"),
        Err(resp) => return resp,
    };
    let algebra = match parse_query(&query) {
        Ok(a) => a,
        Err(e) => return text(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let registry = match load_registry(&gw) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    run(gw, registry, algebra, false, media).await
}
