//! One record through the pipeline: JSON-LD → RDF with a minted root IRI →
//! blank-node relabelling → rule pack → node re-minting → quads in the
//! record's submission-date graph.
//!
//! Only rule output is kept; the schema.org source triples are discarded.

use crate::jsonld::{relabel_blank_nodes, to_rdf_rooted, JsonLdContext, JsonLdError, RawRecord};
use crate::mapping::RulePack;
use crate::mint::{mint_graph_iri, mint_record_iri, remint_nodes, MintConfig, MintError};
use crate::rdf::{Graph, Iri, Quad};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransformError {
    #[error("record {source_id}: {error}")]
    JsonLd { source_id: String, error: JsonLdError },
    #[error("record {source_id}: {error}")]
    Mint { source_id: String, error: MintError },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordOutput {
    pub source_id: String,
    pub graph: Iri,
    /// Triples produced by each rule, in pack order.
    pub per_rule: Vec<(String, Graph)>,
    pub quads: Vec<Quad>,
}

#[derive(Debug, Clone)]
pub struct Transformer {
    pub context: JsonLdContext,
    pub rules: RulePack,
    pub mint: MintConfig,
}

impl Transformer {
    pub fn new(context: JsonLdContext, rules: RulePack, mint: MintConfig) -> Self {
        Transformer { context, rules, mint }
    }

    /// The source graph the rules read: the record as RDF, rooted at its
    /// minted resource IRI, with record-scoped blank nodes.
    pub fn source_graph(&self, record: &RawRecord) -> Result<Graph, TransformError> {
        let mint_err = |error| TransformError::Mint { source_id: record.source_id.clone(), error };
        let root = mint_record_iri(&self.mint, record.submission_date, &record.source_id).map_err(mint_err)?;
        let g = to_rdf_rooted(record, &self.context, &root)
            .map_err(|error| TransformError::JsonLd { source_id: record.source_id.clone(), error })?;
        Ok(relabel_blank_nodes(&g, &record.source_id))
    }

    pub fn transform(&self, record: &RawRecord) -> Result<RecordOutput, TransformError> {
        let graph = mint_graph_iri(&self.mint, record.submission_date)
            .map_err(|error| TransformError::Mint { source_id: record.source_id.clone(), error })?;
        let source = self.source_graph(record)?;
        let per_rule: Vec<(String, Graph)> = self
            .rules
            .apply_each(&source)
            .into_iter()
            .map(|(name, g)| (name, remint_nodes(&self.mint, g)))
            .collect();
        let mut all = Graph::new();
        for (_, g) in &per_rule {
            all.union_with(g);
        }
        let quads = all.into_iter().map(|t| t.in_graph(Some(graph.clone()))).collect();
        Ok(RecordOutput { source_id: record.source_id.clone(), graph, per_rule, quads })
    }
}
