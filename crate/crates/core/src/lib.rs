//! Compiler fault isolation from multiple adversarial configuration pairs.
//!
//! The pipeline narrows the compiler's source files to those with
//! differential coverage, classifies the optimizer options enabled at the
//! failing level, builds several failing/passing configuration pairs, ranks
//! files per pair with spectrum-based fault localization and merges the
//! rankings by rank-weighted voting.

pub mod aggregation;
pub mod config;
pub mod coverage;
pub mod drivers;
pub mod evaluation;
pub mod localize;
pub mod pipeline;
pub mod sbfl;
