#![no_std]
extern crate alloc;

pub mod alignment;
pub mod body;
pub mod diagnostics;
pub mod eigen;
pub mod homology;
pub mod learning;
pub mod optimize;
pub mod recognition;
pub mod synth;
pub mod transition;
pub mod error;
pub mod triplet;
pub mod weighting;
