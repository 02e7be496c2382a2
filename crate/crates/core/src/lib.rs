//! Stance inference over user-hashtag interaction graphs.
//!
//! Users and hashtags are embedded by propagating trainable layer-0 vectors
//! over a weighted bipartite graph (optionally also over user-user social and
//! meta-path similarity graphs), trained with BPR. A user's stance is the
//! annotated hashtag class with the greatest mean affinity.

pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod graph;
pub mod ingest;
pub mod model;
pub mod seed;
pub mod sparse;
pub mod train;

pub use error::{Error, Result};
