//! Hierarchical product categorization.
//!
//! The pipeline: [`corpus`] ingestion, [`textprep`] cleaning and
//! tokenization, [`features`] (n-gram tf-idf with α-power normalization),
//! [`sampling`] of majority classes, [`linear`] SVMs trained by dual
//! coordinate descent (flat one-versus-all), [`hierarchy`] top-down
//! classification, [`ensemble`] voting and [`eval`] metrics. [`pipeline`]
//! wires the stages together for the command-line tool and [`synth`]
//! generates labeled corpora for tests and demos.

pub mod corpus;
pub mod ensemble;
pub mod eval;
pub mod features;
pub mod hierarchy;
pub mod linear;
pub mod pipeline;
pub mod sampling;
pub mod seed;
pub mod synth;
pub mod textprep;

mod textfmt;
