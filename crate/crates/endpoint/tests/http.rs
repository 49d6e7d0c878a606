//! The HTTP surface over the frozen fixture store, driven in-process through
//! the router and once over a real socket.

use std::path::PathBuf;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use kgforge_core::jsonld::{payload_to_rdf, JsonLdContext};
use kgforge_core::mapping::query::QueryResult;
use kgforge_core::mapping::{apply_rule, eval_bgp, MappingRule};
use kgforge_core::rdf::{parse_nquads, parse_ntriples, serialize_ntriples, Graph, Iri, Quad};
use kgforge_core::store::QuadStore;
use kgforge_core::vocab::VocabTable;
use kgforge_endpoint::{execute, router, QueryRequest, Snapshot, SnapshotHandle, N_QUADS, N_TRIPLES, SPARQL_JSON};

const MAY_2014: &str = "https://ditrare.ise.fiz-karlsruhe.de/chemotion-kg/graphs/2014/05";
const PREFIXES: &str = "PREFIX nfdicore: <https://nfdi.fiz-karlsruhe.de/ontology/>\nPREFIX obo: <http://purl.obolibrary.org/obo/>\n";

fn repo(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn read(rel: &str) -> String {
    std::fs::read_to_string(repo(rel)).unwrap()
}

fn counts() -> Value {
    serde_json::from_str(&read("fixtures/expected/counts.json")).unwrap()
}

fn fixture_store() -> QuadStore {
    let mut s = QuadStore::new();
    s.load_quads(parse_nquads(&read("fixtures/expected/corpus.nq")).unwrap());
    s
}

fn handle() -> SnapshotHandle {
    let classes: Vec<Iri> = VocabTable::shipped().classes().cloned().collect();
    SnapshotHandle::new(Snapshot::new(fixture_store(), &classes))
}

struct Reply {
    status: StatusCode,
    ctype: String,
    body: String,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_str(&self.body).unwrap_or_else(|e| panic!("{e}: {}", self.body))
    }
}

async fn send(h: &SnapshotHandle, req: Request<Body>) -> Reply {
    let resp = router(h.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let ctype = resp.headers().get(header::CONTENT_TYPE).map(|v| v.to_str().unwrap().to_string()).unwrap_or_default();
    let body = String::from_utf8(resp.into_body().collect().await.unwrap().to_bytes().to_vec()).unwrap();
    Reply { status, ctype, body }
}

fn enc(s: &str) -> String {
    url::form_urlencoded::byte_serialize(s.as_bytes()).collect()
}

async fn get_query(h: &SnapshotHandle, q: &str, accept: Option<&str>) -> Reply {
    let mut req = Request::get(format!("/sparql?query={}", enc(q)));
    if let Some(a) = accept {
        req = req.header(header::ACCEPT, a);
    }
    send(h, req.body(Body::empty()).unwrap()).await
}

fn binding_values(v: &Value, var: &str) -> Vec<String> {
    v["results"]["bindings"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| b[var]["value"].as_str().unwrap().to_string())
        .collect()
}

#[tokio::test]
async fn dataset_count_via_select() {
    let h = handle();
    let q = format!("{PREFIXES}SELECT (COUNT(*) AS ?n) WHERE {{ ?d a nfdicore:NFDI_0000009 }}");
    let r = get_query(&h, &q, None).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.ctype, SPARQL_JSON);
    let v = r.json();
    assert_eq!(v["head"]["vars"], serde_json::json!(["n"]));
    let n = &v["results"]["bindings"][0]["n"];
    assert_eq!(n["type"], "literal");
    assert_eq!(n["datatype"], "http://www.w3.org/2001/XMLSchema#integer");
    assert_eq!(n["value"], counts()["per_class"]["nfdicore:NFDI_0000009"].to_string());
}

#[tokio::test]
async fn select_rows_equal_in_process_evaluation() {
    let h = handle();
    let q = format!("{PREFIXES}SELECT ?d WHERE {{ ?d a nfdicore:NFDI_0000009 }}");
    let v = get_query(&h, &q, Some("application/json")).await.json();
    let mut got = binding_values(&v, "d");
    assert_eq!(got.len(), 50);

    let store = fixture_store();
    let req = QueryRequest::parse(&q, &[]).unwrap();
    let mut expected: Vec<String> = eval_bgp(&store.union_view(), &req.query.patterns)
        .iter()
        .map(|b| b.iter().next().unwrap().1.as_iri().unwrap().as_str().to_string())
        .collect();
    got.sort();
    expected.sort();
    assert_eq!(got, expected);
}

#[tokio::test]
async fn graph_scope_returns_only_that_partition() {
    let h = handle();
    let q = format!("SELECT ?s ?p ?o WHERE {{ GRAPH <{MAY_2014}> {{ ?s ?p ?o }} }}");
    let v = get_query(&h, &q, None).await.json();
    let rows = v["results"]["bindings"].as_array().unwrap();
    assert_eq!(rows.len() as u64, counts()["per_graph"][MAY_2014].as_u64().unwrap());
    let store = fixture_store();
    let partition = store.graph(&Some(Iri::new(MAY_2014).unwrap())).unwrap();
    let subjects: std::collections::BTreeSet<String> = binding_values(&v, "s").into_iter().collect();
    let expected: std::collections::BTreeSet<String> =
        partition.iter().map(|t| t.subject.to_string().trim_matches(['<', '>']).to_string()).collect();
    assert_eq!(subjects, expected);

    // the same scope through the protocol parameter
    let url = format!("/sparql?query={}&default-graph-uri={}", enc("SELECT (COUNT(*) AS ?n) WHERE { ?s ?p ?o }"), enc(MAY_2014));
    let r = send(&h, Request::get(url).body(Body::empty()).unwrap()).await;
    assert_eq!(r.json()["results"]["bindings"][0]["n"]["value"], "59");
}

#[tokio::test]
async fn limit_zero_keeps_variables() {
    let h = handle();
    let v = get_query(&h, "SELECT ?s ?o WHERE { ?s ?p ?o } LIMIT 0", None).await.json();
    assert_eq!(v["head"]["vars"], serde_json::json!(["s", "o"]));
    assert_eq!(v["results"]["bindings"].as_array().unwrap().len(), 0);
}

#[tokio::test]
async fn ordered_paging_is_deterministic() {
    let h = handle();
    let q = format!("{PREFIXES}SELECT ?d WHERE {{ ?d a nfdicore:NFDI_0000009 }} ORDER BY DESC(?d)");
    let all = binding_values(&get_query(&h, &q, None).await.json(), "d");
    let page = binding_values(&get_query(&h, &format!("{q} LIMIT 5 OFFSET 10"), None).await.json(), "d");
    assert_eq!(page, all[10..15].to_vec());
    let mut sorted = all.clone();
    sorted.sort();
    sorted.reverse();
    assert_eq!(all, sorted);
}

#[tokio::test]
async fn ask_and_negotiation() {
    let h = handle();
    let q = format!("{PREFIXES}ASK {{ ?s a obo:CHEBI_23367 }}");
    let r = get_query(&h, &q, Some("application/sparql-results+json")).await;
    assert_eq!(r.json()["boolean"], true);
    let r = get_query(&h, &format!("{PREFIXES}ASK {{ ?s a obo:CHEBI_0000000 }}"), None).await;
    assert_eq!(r.json()["boolean"], false);
    let r = get_query(&h, &q, Some("text/html")).await;
    assert_eq!(r.status, StatusCode::NOT_ACCEPTABLE);
}

#[tokio::test]
async fn dataset_construct_matches_apply_rule() {
    let payload: Value = serde_json::from_str(&read("fixtures/dataset_rule/record.json")).unwrap();
    let source = payload_to_rdf(&payload, &JsonLdContext::shipped_schema(), None).unwrap();
    let mut store = QuadStore::new();
    store.load_quads(source.iter().map(|t| Quad::new(t.clone(), None)));
    let h = SnapshotHandle::new(Snapshot::new(store, &[]));
    let text = read("rules/dataset.rq");
    let req = Request::post("/sparql")
        .header(header::CONTENT_TYPE, "application/sparql-query")
        .body(Body::from(text.clone()))
        .unwrap();
    let r = send(&h, req).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.body);
    assert_eq!(r.ctype, N_TRIPLES);
    let expected = apply_rule(&source, &MappingRule::parse("dataset", &text).unwrap());
    assert_eq!(r.body, serialize_ntriples(&expected));
    assert_eq!(r.body, read("fixtures/dataset_rule/expected.nt"));
}

#[tokio::test]
async fn construct_over_empty_store_is_empty() {
    let h = SnapshotHandle::new(Snapshot::new(QuadStore::new(), &[]));
    let form = format!("query={}", enc("CONSTRUCT { ?s ?p ?o } WHERE { ?s ?p ?o }"));
    let req = Request::post("/sparql")
        .header(header::CONTENT_TYPE, "application/x-www-form-urlencoded")
        .body(Body::from(form))
        .unwrap();
    let r = send(&h, req).await;
    assert_eq!((r.status, r.body.as_str()), (StatusCode::OK, ""));
    assert_eq!(parse_ntriples(&r.body).unwrap(), Graph::new());
}

#[tokio::test]
async fn bad_requests() {
    let h = handle();
    let r = get_query(&h, "SELECT ?s WHERE { ?s ?p }", None).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert!(r.body.contains("parse error"), "{}", r.body);
    let r = get_query(&h, "SELECT ?s WHERE { ?s ?p ?o OPTIONAL { ?s ?p ?x } }", None).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert!(r.body.contains("OPTIONAL"), "{}", r.body);
    let r = send(&h, Request::get("/sparql").body(Body::empty()).unwrap()).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn stats_delegate_to_the_store() {
    let h = handle();
    let r = send(&h, Request::get("/stats").body(Body::empty()).unwrap()).await;
    assert_eq!(r.status, StatusCode::OK);
    let v = r.json();
    let expected = serde_json::to_value(&h.current().unwrap().stats).unwrap();
    assert_eq!(v, expected);
    assert_eq!(v["total_triples"].as_u64(), counts()["quads"].as_u64());
    assert_eq!(v["graph_count"].as_u64(), counts()["graphs"].as_u64());
}

#[tokio::test]
async fn export_partitions() {
    let h = handle();
    let r = send(&h, Request::get("/export/2014/05").body(Body::empty()).unwrap()).await;
    assert_eq!((r.status, r.ctype.as_str()), (StatusCode::OK, N_QUADS));
    let quads = parse_nquads(&r.body).unwrap();
    assert_eq!(quads.len(), 59);
    assert!(quads.iter().all(|q| q.graph.as_ref().map(Iri::as_str) == Some(MAY_2014)));
    for missing in ["/export/1999/01", "/export/2014/5", "/export/x/y"] {
        let r = send(&h, Request::get(missing).body(Body::empty()).unwrap()).await;
        assert_eq!(r.status, StatusCode::NOT_FOUND, "{missing}");
    }
}

#[tokio::test]
async fn unavailable_during_swap() {
    let h = handle();
    h.begin_swap();
    for path in ["/stats", "/export/2014/05", "/sparql?query=ASK%20%7B%7D"] {
        let r = send(&h, Request::get(path).body(Body::empty()).unwrap()).await;
        assert_eq!(r.status, StatusCode::SERVICE_UNAVAILABLE, "{path}");
    }
    h.install(Snapshot::new(fixture_store(), &[]));
    let r = send(&h, Request::get("/stats").body(Body::empty()).unwrap()).await;
    assert_eq!(r.status, StatusCode::OK);
}

#[test]
fn execute_matches_direct_query_evaluation() {
    let store = fixture_store();
    let q = format!("{PREFIXES}SELECT ?m WHERE {{ ?s a obo:CHEBI_59999 ; obo:BFO_0000178 ?m }} ORDER BY ?m");
    let req = QueryRequest::parse(&q, &[]).unwrap();
    let QueryResult::Solutions { rows, .. } = execute(&store, &req) else { panic!() };
    assert_eq!(rows.len(), 30);
    assert_eq!(execute(&store, &req), req.query.execute(&store.union_view()));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn real_socket_with_graceful_shutdown() {
    let listener = kgforge_endpoint::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(kgforge_endpoint::serve(listener, handle(), async {
        let _ = rx.await;
    }));
    let url = format!("http://{addr}/sparql?query={}", enc(&format!("{PREFIXES}ASK {{ ?s a nfdicore:NFDI_0000009 }}")));
    let body = tokio::task::spawn_blocking(move || {
        let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        agent.get(&url).call().unwrap().body_mut().read_to_string().unwrap()
    })
    .await
    .unwrap();
    assert_eq!(serde_json::from_str::<Value>(&body).unwrap()["boolean"], true);
    tx.send(()).unwrap();
    server.await.unwrap().unwrap();
}
