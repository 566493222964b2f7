//! Offline video-corpus curation and long-context training-batch
//! preparation.
//!
//! The library covers two halves of building a video-language training set
//! without touching any model weights:
//!
//! - **Curation**: coverage filters over detector sidecars (exact rectangle
//!   union areas), a dense optical-flow static-scene filter, content-change
//!   scene cuts with clip segmentation, category rebalancing, and caption
//!   redundancy refinement.
//! - **Batch preparation**: timestamped frame sampling, sinusoidal temporal
//!   position embeddings, depthwise token condensation, per-stage token
//!   budgets, and first-fit-decreasing sequence packing with block-diagonal
//!   causal mask descriptors.
//!
//! Everything is deterministic under explicit seeds so curation runs are
//! reproducible and diffable. See the crate examples for one runnable
//! program per capability, and the `videoprep` binary for the subcommand
//! pipeline.

pub mod balance;
pub mod captions;
pub mod corpus;
pub mod coverage;
pub mod error;
pub mod motion;
pub mod packer;
pub mod pipeline;
pub mod sampler;
pub mod synthetic;

pub use error::{Error, Result};
