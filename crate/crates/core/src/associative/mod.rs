//! Associative memories: the classic binary Hopfield network and the
//! continuous Hopfield network with context (HN-C), whose one-step update is
//! single-head softmax attention.

mod classic;
mod hnc;

pub use classic::{ClassicHopfield, Schedule, UpdateOutcome};
pub use hnc::{
    attention_view, context_patterns, hnc_retrieve, matrix_from_rows, matrix_rows, softmax,
    AttentionView, ContextSet, HncModel, QueryState, RetrievalResult, Separation, Similarity,
};
