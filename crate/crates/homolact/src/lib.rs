//! Sequence files, synthetic datasets and batch pipelines.

pub mod config;
pub mod dataset;
pub mod error;
pub mod fsutil;
pub mod pipeline;
pub mod seqfile;
pub mod weights;
