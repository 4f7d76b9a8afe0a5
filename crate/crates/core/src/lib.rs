//! Contextual retrieval from Hopfield networks with context (HN-C) as a model
//! of in-context learning.
//!
//! - [`associative`]: classic binary Hopfield networks and the HN-C update,
//!   with its single-head attention form.
//! - [`bounds`]: query–context separation and the retrieval-error upper bound.
//! - [`selection`]: random, metric, active (Monte-Carlo value) and
//!   instance-best exemplar selection.
//! - [`task`], [`oracle`]: synthetic tasks, score functions and completion
//!   oracles, including an HTTP adapter.
//! - [`experiment`]: configuration and runners behind the `hnc-icl` CLI.

pub mod associative;
pub mod bounds;
pub mod error;
pub mod exemplar;
pub mod experiment;
pub mod oracle;
pub mod rng;
pub mod selection;
pub mod task;

pub use error::{Error, Result};
