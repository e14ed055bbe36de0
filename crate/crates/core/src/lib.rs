//! Dataset construction and opinion-in-the-loop classification for
//! forecasting analyst and institutional behavior from news.
//!
//! The pipeline: [`ingest`] event streams into a [`corpus::Corpus`], build and
//! label instances with [`labeler`], inspect class-trigger words with
//! [`pmi`], and run generator-plus-classifier experiments with [`cod`].
//! [`synth`] produces corpora whose labels are known by construction.

pub mod cod;
pub mod corpus;
pub mod domain;
mod fsutil;
pub mod ingest;
pub mod labeler;
pub mod metrics;
pub mod pmi;
pub mod synth;
pub mod text;

pub use fsutil::write_atomic;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
