//! Federation at the integration site: SERVICE leaves are fetched from
//! remote endpoints with bounded concurrency and combined locally, and
//! reference-ontology queries are mediated into one SERVICE per site.

mod client;
mod registry;

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Duration;

use thiserror::Error;

pub use client::{HttpClient, ServiceClient};
pub use registry::{EndpointDescriptor, EndpointRegistry};

use crate::par;
use crate::rdf::{Iri, Literal, RdfTerm, Solution, SolutionSequence};
use crate::sparql::{evaluate_algebra, render_query, AlgebraExpr, Expr, PatternSource, ServiceTarget, TriplePattern};

#[derive(Debug, Error)]
pub enum FederationError {
    #[error("registry line {line}: {message}")]
    Registry { line: usize, message: String },
    #[error("no active sites")]
    NoActiveSites,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("service {endpoint}: {message}")]
    Service { endpoint: String, message: String },
    #[error("{}", .0.join("; "))]
    Services(Vec<String>),
}

#[derive(Clone, Debug)]
pub struct FederationOptions {
    /// Remote requests in flight at once; at least 1.
    pub max_parallel: usize,
    /// Failed services contribute no solutions and a warning instead of
    /// failing the query.
    pub partial_results: bool,
    /// Used for endpoints that are not in the registry.
    pub per_service_timeout: Duration,
    /// Variable bound to the site name in mediated queries.
    pub provenance_var: Option<String>,
}

impl Default for FederationOptions {
    fn default() -> Self {
        Self {
            max_parallel: 4,
            partial_results: false,
            per_service_timeout: Duration::from_secs(30),
            provenance_var: None,
        }
    }
}

/// Solutions plus the warnings of services that were skipped.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FederatedResult {
    pub solutions: SolutionSequence,
    pub warnings: Vec<String>,
}

type Fetched = Result<Vec<Solution>, String>;

struct Job<'a> {
    key: usize,
    endpoint: Iri,
    body: &'a AlgebraExpr,
    silent: bool,
}

fn key(body: &AlgebraExpr) -> usize {
    body as *const AlgebraExpr as usize
}

/// Evaluation source of the integration site: it holds no data of its
/// own, so local patterns see an empty graph, and SERVICE leaves are
/// answered from prefetched remote results.
struct FederatedSource<'a> {
    fetched: HashMap<usize, (Iri, bool, Fetched)>,
    partial: bool,
    warnings: &'a Mutex<Vec<String>>,
}

impl PatternSource for FederatedSource<'_> {
    type Error = FederationError;

    fn match_bgp(&self, patterns: &[TriplePattern], _: &[&Expr]) -> Result<Vec<Solution>, FederationError> {
        Ok(if patterns.is_empty() { vec![Solution::new()] } else { Vec::new() })
    }

    fn service(&self, _: &ServiceTarget, body: &AlgebraExpr, _: bool) -> Result<Vec<Solution>, FederationError> {
        let Some((endpoint, silent, result)) = self.fetched.get(&key(body)) else {
            return Err(FederationError::Unsupported("SERVICE body was not prefetched".into()));
        };
        match result {
            Ok(rows) => Ok(rows.clone()),
            Err(message) if *silent || self.partial => {
                self.warnings.lock().expect("warnings").push(format!("{endpoint}: {message}"));
                Ok(Vec::new())
            }
            Err(message) => Err(FederationError::Service { endpoint: endpoint.to_string(), message: message.clone() }),
        }
    }
}

/// Outermost SERVICE nodes; nested ones travel inside their parent's body.
fn collect_jobs<'a>(a: &'a AlgebraExpr, jobs: &mut Vec<Job<'a>>) -> Result<(), FederationError> {
    match a {
        AlgebraExpr::Service { endpoint: ServiceTarget::Iri(i), body, silent } => {
            jobs.push(Job { key: key(body), endpoint: i.clone(), body, silent: *silent })
        }
        AlgebraExpr::Service { endpoint: ServiceTarget::Var(v), .. } => {
            return Err(FederationError::Unsupported(format!("SERVICE with variable endpoint ?{v}")))
        }
        AlgebraExpr::Bgp(_) => {}
        AlgebraExpr::Filter(_, x)
        | AlgebraExpr::Distinct(x)
        | AlgebraExpr::Project(_, x)
        | AlgebraExpr::Slice { inner: x, .. }
        | AlgebraExpr::Extend { inner: x, .. } => collect_jobs(x, jobs)?,
        AlgebraExpr::Join(x, y) | AlgebraExpr::Union(x, y) => {
            collect_jobs(x, jobs)?;
            collect_jobs(y, jobs)?;
        }
    }
    Ok(())
}

fn fetch(job: &Job<'_>, registry: &EndpointRegistry, opts: &FederationOptions, client: &dyn ServiceClient) -> Fetched {
    let entry = registry.by_service(&job.endpoint);
    if entry.is_some_and(|e| !e.active) {
        return Err("site is inactive".into());
    }
    let timeout = entry.map_or(opts.per_service_timeout, |e| e.timeout);
    let query = render_query(job.body);
    tracing::debug!(endpoint = %job.endpoint, "service request");
    client.select(&job.endpoint, &query, timeout).map(|s| s.rows)
}

/// Evaluates `a`, sending every SERVICE body to its endpoint. At most
/// `opts.max_parallel` requests run at once. Rows come back sorted by the
/// first projected variable.
pub fn evaluate_federated(
    a: &AlgebraExpr,
    registry: &EndpointRegistry,
    opts: &FederationOptions,
    client: &dyn ServiceClient,
) -> Result<FederatedResult, FederationError> {
    let mut jobs = Vec::new();
    collect_jobs(a, &mut jobs)?;
    let results = par::map_bounded(&jobs, opts.max_parallel.max(1), |j| fetch(j, registry, opts, client));
    let fetched = jobs.iter().zip(results).map(|(j, r)| (j.key, (j.endpoint.clone(), j.silent, r))).collect();
    let warnings = Mutex::new(Vec::new());
    let source = FederatedSource { fetched, partial: opts.partial_results, warnings: &warnings };
    let failures: Vec<String> = source
        .fetched
        .values()
        .filter(|(_, silent, r)| r.is_err() && !silent && !opts.partial_results)
        .map(|(e, _, r)| format!("{e}: {}", r.as_ref().err().map(String::as_str).unwrap_or_default()))
        .collect();
    if failures.len() > 1 {
        return Err(FederationError::Services(failures));
    }
    let solutions = evaluate_algebra(&source, a, true)?;
    Ok(FederatedResult { solutions, warnings: warnings.into_inner().expect("warnings") })
}

/// One SERVICE node on its own.
pub fn evaluate_service(
    node: &AlgebraExpr,
    registry: &EndpointRegistry,
    opts: &FederationOptions,
    client: &dyn ServiceClient,
) -> Result<FederatedResult, FederationError> {
    if !matches!(node, AlgebraExpr::Service { .. }) {
        return Err(FederationError::Unsupported("not a SERVICE node".into()));
    }
    evaluate_federated(node, registry, opts, client)
}

/// Rewrites `q` into a UNION with one SERVICE per active site, each
/// carrying `q`'s pattern verbatim and, with a provenance variable,
/// binding it to the site name.
pub fn mediate(
    q: &AlgebraExpr,
    registry: &EndpointRegistry,
    opts: &FederationOptions,
) -> Result<AlgebraExpr, FederationError> {
    if q.service_count() > 0 {
        return Err(FederationError::Unsupported("mediated query already contains SERVICE".into()));
    }
    let (mut modifiers, pattern) = q.split_modifiers();
    let mut branches = registry.active().map(|site| {
        let service = AlgebraExpr::Service {
            endpoint: ServiceTarget::Iri(site.service.clone()),
            body: Box::new(pattern.clone()),
            silent: false,
        };
        match &opts.provenance_var {
            Some(var) => AlgebraExpr::Extend {
                var: var.clone(),
                value: RdfTerm::Literal(Literal::simple(site.site.clone())),
                inner: Box::new(service),
            },
            None => service,
        }
    });
    let first = branches.next().ok_or(FederationError::NoActiveSites)?;
    let union = branches.fold(first, AlgebraExpr::union);
    if let (Some(vars), Some(p)) = (&mut modifiers.projection, &opts.provenance_var) {
        if !vars.contains(p) {
            vars.push(p.clone());
        }
    }
    Ok(modifiers.wrap(union))
}
