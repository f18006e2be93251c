//! Dialect identification for tweets.
//!
//! The pieces, in pipeline order:
//!
//! - [`corpus`]: `id`/`content`/`label` tables, validation and seeded splits.
//! - [`preprocess`]: removal of `USER`/`NUM`/`URL` placeholders.
//! - [`baseline`]: character n-gram TF-IDF features and a softmax classifier
//!   trained with AdamW.
//! - [`predfile`]: the prediction-file protocol every backend speaks.
//! - [`ensemble`]: hard (and soft) voting over aligned prediction sets.
//! - [`eval`]: confusion matrices, macro-F1 and results tables.
//! - [`pipeline`]: the end-to-end run driven by a [`config::RunConfig`].

pub mod baseline;
pub mod config;
pub mod corpus;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod fsutil;
pub mod pipeline;
pub mod predfile;
pub mod preprocess;
pub mod synthetic;

pub use error::{Error, Result};
