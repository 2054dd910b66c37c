//! Numeric docid assignment: k-means, hierarchical k-means paths and product
//! quantization codes. Fitted models are never mutated by encoding, so new
//! documents are encoded with exactly the state learned on the initial corpus.

mod hierarchical;
mod kmeans;
mod pq;

pub use hierarchical::{hierarchical_docids, HierarchicalParams, HierarchicalTree};
pub use kmeans::{kmeans_fit, sq_dist, KMeansModel, KMeansParams};
pub use pq::{pq_fit, NumericDocid, PQCodebook};
