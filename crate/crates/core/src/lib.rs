//! Type-aware harassment language toolkit.
//!
//! Corpus ingestion and agreement statistics, lexicon-driven linguistic
//! features and effect sizes, word and subword embeddings, feature
//! vectorization, from-scratch classifiers, and a repeated cross-validation
//! evaluation harness.

pub mod classify;
pub mod corpus;
pub mod embeddings;
pub mod evaluate;
pub mod lexicon;
pub mod matrix;
pub mod rng;
pub mod text;
pub mod vectorize;
