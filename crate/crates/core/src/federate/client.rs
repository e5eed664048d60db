use std::time::Duration;

use crate::rdf::{read_results_json, Iri, SolutionSequence};

/// Sends a SELECT query to a SPARQL endpoint.
pub trait ServiceClient: Send + Sync {
    fn select(&self, endpoint: &Iri, query: &str, timeout: Duration) -> Result<SolutionSequence, String>;
}

/// SPARQL protocol over HTTP: the query is POSTed as
/// `application/sparql-query` and results JSON is expected back.
pub struct HttpClient {
    agent: ureq::Agent,
}

impl Default for HttpClient {
    fn default() -> Self {
        let agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Self { agent }
    }
}

impl HttpClient {
    pub fn new() -> Self {
        Self::default()
    }
}

impl ServiceClient for HttpClient {
    fn select(&self, endpoint: &Iri, query: &str, timeout: Duration) -> Result<SolutionSequence, String> {
        let mut resp = self
            .agent
            .post(endpoint.as_str())
            .config()
            .timeout_global(Some(timeout))
            .build()
            .header("Content-Type", "application/sparql-query")
            .header("Accept", "application/sparql-results+json")
            .send(query)
            .map_err(|e| e.to_string())?;
        let status = resp.status();
        let body =
            resp.body_mut().with_config().limit(512 * 1024 * 1024).read_to_string().map_err(|e| e.to_string())?;
        if !status.is_success() {
            let snippet: String = body.chars().take(200).collect();
            return Err(format!("HTTP {}: {}", status.as_u16(), snippet.trim()));
        }
        read_results_json(&body).map_err(|e| e.to_string())
    }
}
