//! Reference-free scoring of machine-generated visual stories.
//!
//! Three independent scorers are provided:
//!
//! * [`vg`] measures visual grounding: nouns in the story are embedded and
//!   greedily matched against detector regions of the photo sequence, and the
//!   idf-weighted best similarities are pooled with LogSumExp.
//! * [`coherence`] averages a sentence-order classifier's in-order probability
//!   over adjacent sentence pairs.
//! * [`nr`] scores non-redundancy from Jaccard overlap between sentences and
//!   between consecutive n-grams inside each sentence.
//!
//! [`harness`] composes them into per-story reports and correlates reports
//! with human judgments. [`corpus`] reads the line-delimited inputs.

pub mod backend;
pub mod cli;
pub mod coherence;
pub mod corpus;
mod error;
pub mod harness;
pub mod nr;
pub mod optim;
pub mod text;
pub mod vg;

pub use error::{Error, Result};
