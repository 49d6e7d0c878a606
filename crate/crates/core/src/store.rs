//! Append-only quad store partitioned into named graphs, persisted as one
//! canonical N-Quads file per graph plus `manifest.json`.
//!
//! Indexes: per-graph triple sets ordered by subject (graph+SPO), and
//! predicate-first (POS) and object-first (OSP) maps that also record the
//! graphs holding each triple.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::rdf::{parse_nquads, serialize_nquads, Graph, Iri, Quad, Subject, Term, Triple, TripleSource};
use crate::sha256_hex;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const GRAPHS_DIR: &str = "graphs";
pub const DEFAULT_GRAPH_FILE: &str = "default.nq";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt manifest {path}: {message}")]
    CorruptManifest { path: PathBuf, message: String },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: crate::rdf::RdfError,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub quad_count: usize,
    /// Load times that added at least one quad to this graph.
    pub load_timestamps: Vec<String>,
    pub source_records: BTreeSet<String>,
}

impl ManifestEntry {
    pub fn source_record_count(&self) -> usize {
        self.source_records.len()
    }
}

/// Named graph IRI → entry. The default graph has no entry.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub graphs: BTreeMap<String, ManifestEntry>,
}

/// Which graphs a match considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphSel<'a> {
    Any,
    Default,
    Named(&'a Iri),
}

impl GraphSel<'_> {
    fn accepts(&self, g: &Option<Iri>) -> bool {
        match self {
            GraphSel::Any => true,
            GraphSel::Default => g.is_none(),
            GraphSel::Named(i) => g.as_ref() == Some(*i),
        }
    }
}

/// Metadata for one load call.
#[derive(Debug, Clone, Default)]
pub struct LoadContext {
    pub timestamp: String,
    /// Source record ids per graph.
    pub sources: BTreeMap<Option<Iri>, BTreeSet<String>>,
}

type Graphs = BTreeSet<Option<Iri>>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QuadStore {
    gspo: BTreeMap<Option<Iri>, Graph>,
    pos: BTreeMap<Iri, BTreeMap<Term, BTreeMap<Subject, Graphs>>>,
    osp: BTreeMap<Term, BTreeMap<Subject, BTreeMap<Iri, Graphs>>>,
    len: usize,
    manifest: Manifest,
}

impl QuadStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    /// Graph names present, the default graph (`None`) first.
    pub fn graph_names(&self) -> impl Iterator<Item = &Option<Iri>> {
        self.gspo.keys()
    }

    pub fn graph(&self, name: &Option<Iri>) -> Option<&Graph> {
        self.gspo.get(name)
    }

    pub fn contains(&self, q: &Quad) -> bool {
        self.gspo.get(&q.graph).is_some_and(|g| g.contains(&q.triple))
    }

    fn insert(&mut self, q: Quad) -> bool {
        let Quad { graph, triple } = q;
        if !self.gspo.entry(graph.clone()).or_default().insert(triple.clone()) {
            return false;
        }
        let Triple { subject, predicate, object } = triple;
        self.pos
            .entry(predicate.clone())
            .or_default()
            .entry(object.clone())
            .or_default()
            .entry(subject.clone())
            .or_default()
            .insert(graph.clone());
        self.osp
            .entry(object)
            .or_default()
            .entry(subject)
            .or_default()
            .entry(predicate)
            .or_default()
            .insert(graph);
        self.len += 1;
        true
    }

    /// Set-union insert; returns the number of new quads.
    pub fn load_quads(&mut self, quads: impl IntoIterator<Item = Quad>) -> usize {
        self.load_quads_with(quads, &LoadContext::default())
    }

    /// As [`load_quads`](Self::load_quads), recording the load timestamp and
    /// source records in the manifest of each named graph that changed.
    pub fn load_quads_with(&mut self, quads: impl IntoIterator<Item = Quad>, ctx: &LoadContext) -> usize {
        let mut added: BTreeMap<Option<Iri>, usize> = BTreeMap::new();
        let mut touched: BTreeSet<Option<Iri>> = BTreeSet::new();
        for q in quads {
            touched.insert(q.graph.clone());
            let g = q.graph.clone();
            if self.insert(q) {
                *added.entry(g).or_default() += 1;
            }
        }
        for g in touched.iter().chain(ctx.sources.keys()) {
            let Some(iri) = g else { continue };
            let Some(count) = self.gspo.get(g).map(Graph::len) else { continue };
            let entry = self.manifest.graphs.entry(iri.as_str().to_string()).or_default();
            entry.quad_count = count;
            if added.get(g).copied().unwrap_or(0) > 0
                && !ctx.timestamp.is_empty()
                && entry.load_timestamps.last() != Some(&ctx.timestamp)
            {
                entry.load_timestamps.push(ctx.timestamp.clone());
            }
            if let Some(srcs) = ctx.sources.get(g) {
                entry.source_records.extend(srcs.iter().cloned());
            }
        }
        added.values().sum()
    }

    /// Every quad matching the bound positions, each exactly once.
    pub fn match_quads<'a>(
        &'a self,
        s: Option<&'a Subject>,
        p: Option<&'a Iri>,
        o: Option<&'a Term>,
        g: GraphSel<'a>,
    ) -> Box<dyn Iterator<Item = Quad> + 'a> {
        let quad = |graph: &Option<Iri>, s: &Subject, p: &Iri, o: &Term| {
            Quad::new(Triple::new(s.clone(), p.clone(), o.clone()), graph.clone())
        };
        if let Some(s) = s {
            // graph+SPO: subject range inside each accepted graph
            return Box::new(
                self.gspo
                    .iter()
                    .filter(move |(name, _)| g.accepts(name))
                    .flat_map(move |(name, graph)| {
                        graph
                            .subject_range(s, p)
                            .filter(move |t| o.is_none_or(|o| &t.object == o))
                            .map(move |t| Quad::new(t.clone(), name.clone()))
                    }),
            );
        }
        if let Some(p) = p {
            let Some(by_o) = self.pos.get(p) else { return Box::new(std::iter::empty()) };
            let objects: Box<dyn Iterator<Item = (&Term, &BTreeMap<Subject, Graphs>)>> = match o {
                Some(o) => Box::new(by_o.get_key_value(o).into_iter()),
                None => Box::new(by_o.iter()),
            };
            return Box::new(objects.flat_map(move |(obj, by_s)| {
                by_s.iter().flat_map(move |(subj, graphs)| {
                    graphs
                        .iter()
                        .filter(move |name| g.accepts(name))
                        .map(move |name| quad(name, subj, p, obj))
                })
            }));
        }
        if let Some(o) = o {
            let Some(by_s) = self.osp.get(o) else { return Box::new(std::iter::empty()) };
            return Box::new(by_s.iter().flat_map(move |(subj, by_p)| {
                by_p.iter().flat_map(move |(pred, graphs)| {
                    graphs
                        .iter()
                        .filter(move |name| g.accepts(name))
                        .map(move |name| quad(name, subj, pred, o))
                })
            }));
        }
        Box::new(
            self.gspo
                .iter()
                .filter(move |(name, _)| g.accepts(name))
                .flat_map(|(name, graph)| graph.iter().map(move |t| Quad::new(t.clone(), name.clone()))),
        )
    }

    /// All quads in canonical (graph, subject, predicate, object) order.
    pub fn quads(&self) -> impl Iterator<Item = Quad> + '_ {
        self.match_quads(None, None, None, GraphSel::Any)
    }

    /// A read view over the union of all graphs.
    pub fn union_view(&self) -> StoreView<'_> {
        StoreView { store: self, scope: Scope::Union }
    }

    /// A read view over the listed graphs (`None` is the default graph).
    pub fn view_of(&self, graphs: Vec<Option<Iri>>) -> StoreView<'_> {
        StoreView { store: self, scope: Scope::Graphs(graphs) }
    }

    pub fn stats(&self, classes: &[Iri]) -> StoreStats {
        let mut per_class: BTreeMap<String, usize> = classes.iter().map(|c| (c.as_str().to_string(), 0)).collect();
        let ty = Iri::rdf_type();
        let mut typed = BTreeSet::new();
        if let Some(by_o) = self.pos.get(&ty) {
            for (class, by_s) in by_o {
                typed.extend(by_s.keys());
                if let Term::Iri(c) = class {
                    per_class.insert(c.as_str().to_string(), by_s.len());
                }
            }
        }
        let per_predicate = self
            .pos
            .iter()
            .map(|(p, by_o)| {
                let n = by_o.values().flat_map(|by_s| by_s.values()).map(BTreeSet::len).sum();
                (p.as_str().to_string(), n)
            })
            .collect();
        StoreStats {
            total_triples: self.gspo.values().map(Graph::len).sum(),
            per_class,
            per_predicate,
            graph_count: self.gspo.keys().filter(|g| g.is_some()).count(),
            typed_entities: typed.len(),
        }
    }

    /// Writes `graphs/<name>.nq`, `default.nq` (if the default graph is
    /// non-empty) and `manifest.json`. Files whose content is unchanged are
    /// not rewritten.
    pub fn persist(&self, dir: &Path) -> Result<(), StoreError> {
        let graphs_dir = dir.join(GRAPHS_DIR);
        fs::create_dir_all(&graphs_dir).map_err(io_err(&graphs_dir))?;
        for (name, graph) in &self.gspo {
            let path = match name {
                None => dir.join(DEFAULT_GRAPH_FILE),
                Some(iri) => graphs_dir.join(graph_file_name(iri)),
            };
            let quads: Vec<Quad> = graph.iter().map(|t| Quad::new(t.clone(), name.clone())).collect();
            write_if_changed(&path, serialize_nquads(&quads).as_bytes())?;
        }
        let mut manifest = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        manifest.push('\n');
        write_if_changed(&dir.join(MANIFEST_FILE), manifest.as_bytes())
    }

    /// Reads a persisted store; a missing or empty directory yields an empty
    /// store. Manifest counts are checked against the graph files.
    pub fn load(dir: &Path) -> Result<Self, StoreError> {
        let mut store = QuadStore::new();
        if !dir.exists() {
            return Ok(store);
        }
        let mut files = Vec::new();
        let default = dir.join(DEFAULT_GRAPH_FILE);
        if default.exists() {
            files.push(default);
        }
        let graphs_dir = dir.join(GRAPHS_DIR);
        if graphs_dir.exists() {
            let mut names: Vec<PathBuf> = fs::read_dir(&graphs_dir)
                .map_err(io_err(&graphs_dir))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "nq"))
                .collect();
            names.sort();
            files.extend(names);
        }
        for path in files {
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            let quads = parse_nquads(&text).map_err(|source| StoreError::Parse { path: path.clone(), source })?;
            store.load_quads(quads);
        }
        let manifest_path = dir.join(MANIFEST_FILE);
        if manifest_path.exists() {
            let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
            let manifest: Manifest = serde_json::from_str(&text).map_err(|e| StoreError::CorruptManifest {
                path: manifest_path.clone(),
                message: e.to_string(),
            })?;
            let present: BTreeMap<String, usize> = store
                .gspo
                .iter()
                .filter_map(|(g, graph)| g.as_ref().map(|i| (i.as_str().to_string(), graph.len())))
                .collect();
            let listed: BTreeMap<String, usize> =
                manifest.graphs.iter().map(|(g, e)| (g.clone(), e.quad_count)).collect();
            if present != listed {
                return Err(StoreError::CorruptManifest {
                    path: manifest_path,
                    message: "graph list or quad counts disagree with the graph files".into(),
                });
            }
            store.manifest = manifest;
        } else if store.gspo.keys().any(Option::is_some) {
            return Err(StoreError::CorruptManifest {
                path: manifest_path,
                message: "missing".into(),
            });
        }
        Ok(store)
    }
}

/// `…/graphs/2014/05` → `2014-05.nq`, `…/graphs/2014/05/17` → `2014-05-17.nq`;
/// other IRIs get a digest-based name.
pub fn graph_file_name(iri: &Iri) -> String {
    let s = iri.as_str();
    if let Some(idx) = s.rfind("/graphs/") {
        let tail = &s[idx + "/graphs/".len()..];
        let parts: Vec<&str> = tail.split('/').collect();
        let numeric = |p: &str, n: usize| p.len() == n && p.bytes().all(|b| b.is_ascii_digit());
        let ok = match parts.as_slice() {
            [y, m] => numeric(y, 4) && numeric(m, 2),
            [y, m, d] => numeric(y, 4) && numeric(m, 2) && numeric(d, 2),
            _ => false,
        };
        if ok {
            return format!("{}.nq", parts.join("-"));
        }
    }
    format!("g-{}.nq", &sha256_hex(s.as_bytes())[..16])
}

fn write_if_changed(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    if fs::read(path).is_ok_and(|old| old == bytes) {
        return Ok(());
    }
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Scope {
    Union,
    Graphs(Vec<Option<Iri>>),
}

/// Triples of a set of graphs, deduplicated across graphs.
#[derive(Debug, Clone)]
pub struct StoreView<'a> {
    store: &'a QuadStore,
    scope: Scope,
}

impl TripleSource for StoreView<'_> {
    fn triples_matching<'a>(
        &'a self,
        subject: Option<&'a Subject>,
        predicate: Option<&'a Iri>,
        object: Option<&'a Term>,
    ) -> Box<dyn Iterator<Item = Triple> + 'a> {
        let sels: Vec<GraphSel<'a>> = match &self.scope {
            Scope::Union => vec![GraphSel::Any],
            Scope::Graphs(gs) => gs
                .iter()
                .map(|g| match g {
                    None => GraphSel::Default,
                    Some(i) => GraphSel::Named(i),
                })
                .collect(),
        };
        if let [GraphSel::Named(_) | GraphSel::Default] = sels.as_slice() {
            let sel = sels[0];
            return Box::new(self.store.match_quads(subject, predicate, object, sel).map(|q| q.triple));
        }
        let mut out = BTreeSet::new();
        for sel in sels {
            out.extend(self.store.match_quads(subject, predicate, object, sel).map(|q| q.triple));
        }
        Box::new(out.into_iter())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreStats {
    pub total_triples: usize,
    /// Class IRI → distinct subjects typed with it.
    pub per_class: BTreeMap<String, usize>,
    /// Predicate IRI → quads using it.
    pub per_predicate: BTreeMap<String, usize>,
    pub graph_count: usize,
    /// Distinct subjects with at least one `rdf:type`.
    pub typed_entities: usize,
}

impl StoreStats {
    /// Two-column text table of the non-zero counts.
    pub fn table(&self) -> String {
        let mut rows: Vec<(String, String)> = vec![
            ("total triples".into(), self.total_triples.to_string()),
            ("named graphs".into(), self.graph_count.to_string()),
            ("typed entities".into(), self.typed_entities.to_string()),
        ];
        for (c, n) in self.per_class.iter().filter(|(_, n)| **n > 0) {
            rows.push((format!("class {}", crate::vocab::compact(c).unwrap_or_else(|| c.clone())), n.to_string()));
        }
        for (p, n) in &self.per_predicate {
            rows.push((format!("predicate {}", crate::vocab::compact(p).unwrap_or_else(|| p.clone())), n.to_string()));
        }
        let w = rows.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
        rows.iter().map(|(k, v)| format!("{k:<w$}  {v:>8}\n")).collect()
    }
}
