//! Mutation-rate estimation from year-tagged nucleotide sequences: per-year
//! alignment, profile HMM training and scoring, evolutionary distances,
//! neighbor joining and a least-squares molecular clock.

pub mod align;
pub mod bundled;
pub mod dataset;
pub mod distance;
pub mod error;
pub mod fetch;
pub mod msa;
pub mod nucleotide;
pub mod phmm;
pub mod phylo;
pub mod pipeline;
pub mod plot;
pub mod rate;
pub mod simulate;

pub use error::{Error, ErrorKind, Result};
