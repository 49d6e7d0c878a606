//! Core of the kgforge toolkit: the RDF model and its text formats, JSON-LD
//! ingestion, the CONSTRUCT mapping engine, IRI minting, the quad store and
//! the shape validator.

pub mod jsonld;
pub mod mapping;
pub mod mint;
pub mod rdf;
pub mod store;
pub mod transform;
pub mod validator;
pub mod vocab;

use sha2::{Digest, Sha256};

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
