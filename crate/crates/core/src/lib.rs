//! Generative retrieval over incrementally growing document collections.
//!
//! The crate covers the whole experimental loop:
//!
//! - [`corpus`]: ingestion, tokenization, the initial/incremental partition and
//!   sliding-window chunking.
//! - [`embed`]: a deterministic hashed TF-IDF encoder whose idf table is frozen
//!   on the initial corpus.
//! - [`quantize`]: seeded k-means, hierarchical k-means docids and product
//!   quantization with a frozen codebook.
//! - [`docid_index`]: the docid registry and the prefix tree used to constrain
//!   decoding.
//! - [`scorer`]: the autoregressive scoring interface and a counting reference
//!   model trained from query/docid pairs.
//! - [`decode`]: an FM-index over document bytes and constrained beam search
//!   over either a prefix tree or the FM-index.
//! - [`mdgr`]: multi-docid retrieval with chunk-level PQ codes, constrained
//!   docid expansion and coverage + rank scoring.
//! - [`eval`]: Hit@K, forgetting / generalization metrics, the initial
//!   document bias index, BM25, the synthetic benchmark and the stage-by-stage
//!   experiment runner.
//!
//! Every stage is deterministic given its seed.

pub mod corpus;
pub mod decode;
pub mod docid_index;
pub mod embed;
pub mod eval;
pub mod mdgr;
pub mod quantize;
pub mod scorer;

mod error;
mod io_util;

pub use error::{Error, Result};
