//! Next-article recommendation with content-aware latent-factor models.
//!
//! The pipeline turns MIND-format click logs into confidence-weighted
//! `(user, last article, next article)` triplets, trains three models that
//! map article content into the latent space (ALMM, Forbes, Oord), and
//! scores them on warm-start and cold-start splits with MAP@K, Recall@K,
//! Novelty@K and Diversity@K.
//!
//! | module | role |
//! |---|---|
//! | [`ingest`] | parse and validate `news.tsv` / `behaviors.tsv` |
//! | [`transitions`] | transition counts and training triplets |
//! | [`splits`] | warm and cold train/test partitions |
//! | [`features`] | TF-IDF or externally computed article vectors |
//! | [`numerics`] | ridge solves, the triplet score, cosine distance |
//! | [`models`] | ALMM, Forbes and Oord trainers, prediction |
//! | [`eval`] | ranking metrics and curve output |
//! | [`pipeline`] | config-driven stages with persisted intermediates |
//!
//! See the crate's `examples/` directory for one runnable program per stage.

pub mod config;
pub mod error;
pub mod eval;
pub mod features;
pub mod fixture;
pub mod ingest;
pub mod models;
pub mod numerics;
pub mod pipeline;
pub mod seed;
pub mod splits;
pub mod transitions;

pub use error::{Error, Result};
