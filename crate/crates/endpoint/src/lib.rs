//! Read-only HTTP service over an immutable store snapshot.
//!
//! Routes:
//! - `GET|POST /sparql`: the query subset of the mapping engine. SELECT and
//!   ASK answer with SPARQL 1.1 results JSON, CONSTRUCT with N-Triples.
//! - `GET /stats`: store statistics as JSON.
//! - `GET /export/{year}/{month}`: one monthly named graph as N-Quads.
//!
//! Without a `GRAPH` scope or `default-graph-uri` parameters a query sees the
//! union of all graphs. While no snapshot is installed every route answers 503.

use std::future::Future;
use std::net::SocketAddr;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, RawQuery, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use log::info;

use kgforge_core::mapping::query::{results_to_json, Query, QueryResult};
use kgforge_core::rdf::{serialize_nquads, serialize_ntriples, Iri, Quad};
use kgforge_core::store::{graph_file_name, QuadStore, StoreStats};

pub const SPARQL_JSON: &str = "application/sparql-results+json";
pub const N_TRIPLES: &str = "application/n-triples";
pub const N_QUADS: &str = "application/n-quads";

#[derive(Debug, thiserror::Error)]
pub enum EndpointError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("server error: {0}")]
    Serve(#[from] std::io::Error),
    #[error("query parse error: {0}")]
    Parse(String),
    #[error("invalid graph IRI {0:?}")]
    GraphIri(String),
    #[error("missing query parameter")]
    MissingQuery,
}

/// A store plus its precomputed statistics.
#[derive(Debug)]
pub struct Snapshot {
    pub store: QuadStore,
    pub stats: StoreStats,
}

impl Snapshot {
    /// `classes` selects the per-class counts reported by `/stats`.
    pub fn new(store: QuadStore, classes: &[Iri]) -> Self {
        let stats = store.stats(classes);
        Snapshot { store, stats }
    }
}

/// Shared slot holding the snapshot being served. Swapping replaces the
/// whole snapshot, so in-flight requests finish on the one they started with.
#[derive(Clone, Default)]
pub struct SnapshotHandle {
    slot: Arc<RwLock<Option<Arc<Snapshot>>>>,
}

impl SnapshotHandle {
    pub fn new(snapshot: Snapshot) -> Self {
        let h = Self::default();
        h.install(snapshot);
        h
    }

    pub fn current(&self) -> Option<Arc<Snapshot>> {
        self.slot.read().expect("snapshot lock").clone()
    }

    /// Withdraws the current snapshot; requests get 503 until [`install`](Self::install).
    pub fn begin_swap(&self) {
        *self.slot.write().expect("snapshot lock") = None;
    }

    pub fn install(&self, snapshot: Snapshot) {
        *self.slot.write().expect("snapshot lock") = Some(Arc::new(snapshot));
    }
}

/// A parsed `/sparql` request.
#[derive(Debug, Clone)]
pub struct QueryRequest {
    pub query: Query,
    /// `default-graph-uri` parameters; empty means the union of all graphs.
    pub default_graphs: Vec<Iri>,
}

impl QueryRequest {
    pub fn parse(text: &str, default_graphs: &[String]) -> Result<Self, EndpointError> {
        let query = Query::parse(text).map_err(|e| EndpointError::Parse(e.to_string()))?;
        let default_graphs = default_graphs
            .iter()
            .map(|g| Iri::new(g.clone()).map_err(|_| EndpointError::GraphIri(g.clone())))
            .collect::<Result<_, _>>()?;
        Ok(QueryRequest { query, default_graphs })
    }
}

/// Evaluates a request against a store exactly as the HTTP route does.
pub fn execute(store: &QuadStore, req: &QueryRequest) -> QueryResult {
    let graphs: Vec<Option<Iri>> = match &req.query.graph {
        Some(g) => vec![Some(g.clone())],
        None => req.default_graphs.iter().cloned().map(Some).collect(),
    };
    if graphs.is_empty() {
        req.query.execute(&store.union_view())
    } else {
        req.query.execute(&store.view_of(graphs))
    }
}

/// Picks the first of `offered` acceptable under an `Accept` header.
/// Quality values are ignored except that `q=0` excludes a type.
pub fn negotiate<'a>(accept: Option<&str>, offered: &[&'a str]) -> Option<&'a str> {
    let Some(accept) = accept.filter(|a| !a.trim().is_empty()) else {
        return offered.first().copied();
    };
    let ranges: Vec<&str> = accept
        .split(',')
        .filter(|r| {
            !r.split(';')
                .skip(1)
                .any(|p| p.trim().strip_prefix("q=").is_some_and(|q| q.trim().parse::<f32>() == Ok(0.0)))
        })
        .map(|r| r.split(';').next().unwrap_or("").trim())
        .collect();
    offered.iter().copied().find(|o| {
        let major = o.split('/').next().unwrap_or("");
        ranges
            .iter()
            .any(|r| r.eq_ignore_ascii_case(o) || *r == "*/*" || r.strip_suffix("/*").is_some_and(|m| m.eq_ignore_ascii_case(major)))
    })
}

pub fn router(handle: SnapshotHandle) -> Router {
    Router::new()
        .route("/sparql", get(sparql_get).post(sparql_post))
        .route("/stats", get(stats))
        .route("/export/{year}/{month}", get(export))
        .with_state(handle)
}

pub async fn bind(addr: &str) -> Result<tokio::net::TcpListener, EndpointError> {
    tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| EndpointError::Bind { addr: addr.to_string(), source })
}

/// Serves until `shutdown` resolves, then drains in-flight requests.
pub async fn serve(
    listener: tokio::net::TcpListener,
    handle: SnapshotHandle,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), EndpointError> {
    let addr: SocketAddr = listener.local_addr()?;
    info!("serving on http://{addr}");
    axum::serve(listener, router(handle)).with_graceful_shutdown(shutdown).await?;
    info!("endpoint stopped");
    Ok(())
}

fn text(status: StatusCode, body: impl Into<String>) -> Response {
    (status, [(header::CONTENT_TYPE, "text/plain; charset=utf-8")], body.into()).into_response()
}

fn unavailable() -> Response {
    text(StatusCode::SERVICE_UNAVAILABLE, "store snapshot is being replaced, retry shortly\n")
}

fn form_pairs(s: &str) -> Vec<(String, String)> {
    url::form_urlencoded::parse(s.as_bytes()).into_owned().collect()
}

async fn sparql_get(State(h): State<SnapshotHandle>, RawQuery(q): RawQuery, headers: HeaderMap) -> Response {
    let pairs = form_pairs(q.as_deref().unwrap_or(""));
    answer(h, pairs, None, &headers).await
}

async fn sparql_post(
    State(h): State<SnapshotHandle>,
    RawQuery(q): RawQuery,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    let mut pairs = form_pairs(q.as_deref().unwrap_or(""));
    let ctype = headers.get(header::CONTENT_TYPE).and_then(|v| v.to_str().ok()).unwrap_or("");
    let body = String::from_utf8_lossy(&body).into_owned();
    let direct = if ctype.starts_with("application/sparql-query") {
        Some(body)
    } else {
        pairs.extend(form_pairs(&body));
        None
    };
    answer(h, pairs, direct, &headers).await
}

async fn answer(h: SnapshotHandle, pairs: Vec<(String, String)>, direct: Option<String>, headers: &HeaderMap) -> Response {
    let Some(snapshot) = h.current() else { return unavailable() };
    let text_q = direct.or_else(|| pairs.iter().find(|(k, _)| k == "query").map(|(_, v)| v.clone()));
    let Some(text_q) = text_q else {
        return text(StatusCode::BAD_REQUEST, format!("{}\n", EndpointError::MissingQuery));
    };
    let graphs: Vec<String> = pairs.iter().filter(|(k, _)| k == "default-graph-uri").map(|(_, v)| v.clone()).collect();
    let req = match QueryRequest::parse(&text_q, &graphs) {
        Ok(r) => r,
        Err(e) => return text(StatusCode::BAD_REQUEST, format!("{e}\n")),
    };
    let accept = headers.get(header::ACCEPT).and_then(|v| v.to_str().ok());
    let offered: &[&str] = match req.query.form {
        kgforge_core::mapping::query::QueryForm::Construct { .. } => &[N_TRIPLES, "text/plain"],
        _ => &[SPARQL_JSON, "application/json"],
    };
    let Some(ctype) = negotiate(accept, offered) else {
        return text(StatusCode::NOT_ACCEPTABLE, format!("acceptable types: {}\n", offered.join(", ")));
    };
    let result = match tokio::task::spawn_blocking(move || execute(&snapshot.store, &req)).await {
        Ok(r) => r,
        Err(e) => return text(StatusCode::INTERNAL_SERVER_ERROR, format!("query evaluation failed: {e}\n")),
    };
    let body = match &result {
        QueryResult::Graph(g) => serialize_ntriples(g),
        other => results_to_json(other).expect("select or ask").to_string(),
    };
    let ctype = if ctype == "text/plain" { "text/plain; charset=utf-8" } else { ctype };
    ([(header::CONTENT_TYPE, ctype)], body).into_response()
}

async fn stats(State(h): State<SnapshotHandle>) -> Response {
    match h.current() {
        Some(s) => Json(&s.stats).into_response(),
        None => unavailable(),
    }
}

async fn export(State(h): State<SnapshotHandle>, Path((year, month)): Path<(String, String)>) -> Response {
    let Some(snapshot) = h.current() else { return unavailable() };
    let wanted = format!("{year}-{month}.nq");
    let valid = year.len() == 4 && month.len() == 2 && format!("{year}{month}").bytes().all(|b| b.is_ascii_digit());
    let found = snapshot
        .store
        .graph_names()
        .filter_map(|g| g.as_ref())
        .find(|g| valid && graph_file_name(g) == wanted)
        .cloned();
    let Some(iri) = found else {
        return text(StatusCode::NOT_FOUND, format!("no graph for {year}/{month}\n"));
    };
    let name = Some(iri);
    let quads: Vec<Quad> = snapshot
        .store
        .graph(&name)
        .map(|g| g.iter().map(|t| t.clone().in_graph(name.clone())).collect())
        .unwrap_or_default();
    ([(header::CONTENT_TYPE, N_QUADS)], serialize_nquads(&quads)).into_response()
}
