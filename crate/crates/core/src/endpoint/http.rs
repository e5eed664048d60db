use std::collections::HashMap;
use std::future::Future;
use std::io;
use std::net::{SocketAddr, TcpListener};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::body::Bytes;
use axum::extract::{Request, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::Router;
use tokio::sync::oneshot;

pub const RESULTS_JSON: &str = "application/sparql-results+json";
pub const TURTLE: &str = "text/turtle";
pub const HTML: &str = "text/html";

/// A server running on its own thread and runtime.
pub struct ServerHandle {
    addr: SocketAddr,
    draining: Arc<AtomicBool>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<io::Result<()>>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// `http://host:port/`
    pub fn url(&self) -> String {
        format!("http://{}/", self.addr)
    }

    /// Refuses new requests with 503, waits for in-flight ones, then joins
    /// the server thread.
    pub fn stop(mut self) -> io::Result<()> {
        self.shutdown_and_join()
    }

    /// Blocks until the server exits on its own.
    pub fn wait(mut self) -> io::Result<()> {
        self.shutdown.take();
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }

    fn shutdown_and_join(&mut self) -> io::Result<()> {
        self.draining.store(true, Ordering::SeqCst);
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if self.shutdown.is_some() {
            let _ = self.shutdown_and_join();
        }
    }
}

async fn refuse_while_draining(State(draining): State<Arc<AtomicBool>>, req: Request, next: Next) -> Response {
    if draining.load(Ordering::SeqCst) {
        return (StatusCode::SERVICE_UNAVAILABLE, "shutting down\n").into_response();
    }
    next.run(req).await
}

/// Binds synchronously so a busy port fails before anything is spawned.
pub fn bind(host: &str, port: u16) -> io::Result<TcpListener> {
    let listener = TcpListener::bind((host, port))?;
    listener.set_nonblocking(true)?;
    Ok(listener)
}

/// Serves `app` on `listener` from a background thread. With `until`,
/// the server also stops when that future completes.
pub fn spawn<F>(listener: TcpListener, app: Router, until: Option<F>) -> io::Result<ServerHandle>
where
    F: Future<Output = ()> + Send + 'static,
{
    let addr = listener.local_addr()?;
    let draining = Arc::new(AtomicBool::new(false));
    let app = app.layer(middleware::from_fn_with_state(draining.clone(), refuse_while_draining));
    let (tx, rx) = oneshot::channel::<()>();
    let flag = draining.clone();
    let runtime = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()?;
    let thread = std::thread::Builder::new().name(format!("http-{}", addr.port())).spawn(move || {
        runtime.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener)?;
            let stop = async move {
                match until {
                    Some(f) => tokio::select! {
                        _ = rx => {}
                        _ = f => {}
                    },
                    None => {
                        let _ = rx.await;
                    }
                }
                flag.store(true, Ordering::SeqCst);
            };
            axum::serve(listener, app).with_graceful_shutdown(stop).await
        })
    })?;
    Ok(ServerHandle { addr, draining, shutdown: Some(tx), thread: Some(thread) })
}

struct Range<'a> {
    ty: &'a str,
    sub: &'a str,
    q: f32,
}

fn ranges(accept: &str) -> Vec<Range<'_>> {
    accept
        .split(',')
        .filter_map(|part| {
            let mut it = part.split(';');
            let (ty, sub) = it.next()?.trim().split_once('/')?;
            let mut q = 1.0;
            for p in it {
                if let Some(v) = p.trim().strip_prefix("q=") {
                    q = v.trim().parse().unwrap_or(0.0);
                }
            }
            Some(Range { ty: ty.trim(), sub: sub.trim(), q })
        })
        .collect()
}

/// The offer the client prefers; ties go to the earlier offer. Without an
/// Accept header the first offer wins.
pub fn negotiate<'o>(accept: Option<&str>, offers: &[&'o str]) -> Option<&'o str> {
    let Some(accept) = accept.filter(|a| !a.trim().is_empty()) else {
        return offers.first().copied();
    };
    let ranges = ranges(accept);
    let mut best: Option<(&str, f32)> = None;
    for offer in offers {
        let (ty, sub) = offer.split_once('/').unwrap_or((offer, ""));
        let q = ranges
            .iter()
            .filter_map(|r| {
                let spec = match (r.ty, r.sub) {
                    (t, s) if t.eq_ignore_ascii_case(ty) && s.eq_ignore_ascii_case(sub) => 3,
                    (t, "*") if t.eq_ignore_ascii_case(ty) => 2,
                    ("*", "*") => 1,
                    _ => return None,
                };
                Some((spec, r.q))
            })
            .max_by_key(|(spec, _)| *spec)
            .map(|(_, q)| q);
        if let Some(q) = q.filter(|q| *q > 0.0) {
            if best.is_none_or(|(_, b)| q > b) {
                best = Some((offer, q));
            }
        }
    }
    best.map(|(o, _)| o)
}

pub fn accept(headers: &HeaderMap) -> Option<&str> {
    headers.get(header::ACCEPT).and_then(|v| v.to_str().ok())
}

pub fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

pub fn page(title: &str, body: &str) -> String {
    format!(
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>{t}</title></head>\n<body>\n<h1>{t}</h1>\n{body}\n</body></html>\n",
        t = escape_html(title)
    )
}

pub fn text(status: StatusCode, body: impl Into<String>) -> Response {
    let mut body = body.into();
    if !body.ends_with('\n') {
        body.push('\n');
    }
    (status, [(header::CONTENT_TYPE, "text/plain; charset=utf-8")], body).into_response()
}

pub fn typed(media: &str, body: String) -> Response {
    let ct = HeaderValue::from_str(&format!("{media}; charset=utf-8")).expect("media type");
    (StatusCode::OK, [(header::CONTENT_TYPE, ct)], body).into_response()
}

pub fn not_acceptable(offers: &[&str]) -> Response {
    text(StatusCode::NOT_ACCEPTABLE, format!("acceptable media types: {}", offers.join(", ")))
}

/// The `query` of a SPARQL protocol request: the URL parameter, a form
/// field, or a raw `application/sparql-query` body.
pub fn protocol_query(
    method: &Method,
    params: &HashMap<String, String>,
    headers: &HeaderMap,
    body: &Bytes,
) -> Result<Option<String>, Response> {
    if let Some(q) = params.get("query") {
        return Ok(Some(q.clone()));
    }
    if method != Method::POST {
        return Ok(None);
    }
    let ct = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("")
        .split(';')
        .next()
        .unwrap_or("")
        .trim()
        .to_ascii_lowercase();
    let utf8 = || {
        std::str::from_utf8(body)
            .map(str::to_owned)
            .map_err(|_| text(StatusCode::BAD_REQUEST, "request body is not UTF-8"))
    };
    match ct.as_str() {
        "application/sparql-query" => utf8().map(Some),
        "application/x-www-form-urlencoded" => {
            Ok(url::form_urlencoded::parse(body).find(|(k, _)| k == "query").map(|(_, v)| v.into_owned()))
        }
        other => Err(text(StatusCode::UNSUPPORTED_MEDIA_TYPE, format!("unsupported request media type '{other}'"))),
    }
}

/// Permissive CORS for browser clients of the gateway.
pub async fn cors(req: Request, next: Next) -> Response {
    let preflight = req.method() == Method::OPTIONS;
    let mut resp = if preflight { StatusCode::NO_CONTENT.into_response() } else { next.run(req).await };
    let h = resp.headers_mut();
    h.insert(header::ACCESS_CONTROL_ALLOW_ORIGIN, HeaderValue::from_static("*"));
    h.insert(header::ACCESS_CONTROL_ALLOW_METHODS, HeaderValue::from_static("GET, POST, OPTIONS"));
    h.insert(header::ACCESS_CONTROL_ALLOW_HEADERS, HeaderValue::from_static("Content-Type, Accept"));
    resp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negotiation() {
        let offers = [RESULTS_JSON, HTML];
        assert_eq!(negotiate(None, &offers), Some(RESULTS_JSON));
        assert_eq!(negotiate(Some("*/*"), &offers), Some(RESULTS_JSON));
        assert_eq!(negotiate(Some("text/html,application/xhtml+xml,*/*;q=0.8"), &offers), Some(HTML));
        assert_eq!(negotiate(Some("application/json"), &offers), None);
        assert_eq!(negotiate(Some("text/*;q=0.5, application/*;q=0.1"), &offers), Some(HTML));
        assert_eq!(negotiate(Some("text/html;q=0"), &offers), None);
        assert_eq!(negotiate(Some("image/png"), &[TURTLE]), None);
    }

    #[test]
    fn escapes() {
        assert_eq!(escape_html("<a href=\"x\">&</a>"), "&lt;a href=&quot;x&quot;&gt;&amp;&lt;/a&gt;");
    }
}
