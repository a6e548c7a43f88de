//! Tweet-driven price modelling: corpus ingestion, text signals, day- and
//! user-level features, and a from-scratch model suite (linear, tree, kernel,
//! neural, clustering) with evaluation and reporting.

pub mod cluster;
pub mod config;
pub mod corpus;
pub mod error;
pub mod features;
pub mod ingest;
pub mod kbs;
pub mod linalg;
pub mod linear;
pub mod mlcore;
pub mod models;
pub mod neural;
pub mod nlp;
pub mod par;
pub mod persist;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod synth;
pub mod trees;

pub use error::ModelError;
pub use linalg::Matrix;
