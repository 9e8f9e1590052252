//! Similarity-controlled counterfactual referring expressions and
//! approximation metrics for visual grounding models.
//!
//! The pipeline: measure the anisotropy of a language encoder from random
//! caption pairs ([`geometry`]), split captions into object and context
//! ([`corpus`]), generate edited captions whose similarity to the original
//! falls in each quantile bin ([`vocab`], [`generator`]), then score a
//! grounding model's predictions on them ([`evaluation`], [`report`]).
//! Embeddings come from any [`provider::EmbeddingProvider`].

pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod generator;
pub mod geometry;
pub mod hashing;
pub mod jsonl;
pub mod provider;
pub mod report;
pub mod text;
pub mod vocab;

pub use error::{Error, Result};
