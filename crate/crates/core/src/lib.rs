//! Embedding-based sentence similarity.
//!
//! The crate covers the whole evaluation path: an on-disk archive of
//! per-sentence word vectors ([`archive`]), word-vector centering
//! ([`centering`]), optimal-transport kernels ([`ot`]), the metric family
//! built on them ([`metrics`]), and correlation against human ratings plus
//! embedding-geometry diagnostics ([`analysis`]).

// `!(x > 0.0)` is used deliberately so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod archive;
pub mod centering;
pub mod error;
pub mod metrics;
pub mod ot;

pub use archive::{
    read_archive, read_pairs, write_archive, ArchiveMetadata, EmbeddingArchive, EvalPair,
    SentenceMatrix,
};
pub use centering::CenteringMode;
pub use error::{Error, Result};
pub use metrics::{score, Metric, MetricConfig, SimilarityScore};
