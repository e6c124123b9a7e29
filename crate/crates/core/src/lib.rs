//! Tail-dependence topology of multichannel signals.
//!
//! Band-periodogram features are rank-standardized to heavy-tailed margins, a
//! tail pairwise dependence matrix (TPDM) is estimated from the largest block
//! norms, and the canonical tail dependence between two channel groups yields
//! a per-subject topology that fuzzy c-means clusters across subjects.

pub mod cluster;
pub mod ctd;
pub mod error;
pub mod ingest;
pub mod linalg;
pub mod margins;
pub mod pipeline;
pub mod seed;
pub mod simgen;
pub mod spectral;
pub mod tpdm;

pub use error::{ConditionReport, Error, Result};
