//! Algorithms for building and evaluating an Ancient Greek to Modern Greek
//! sentence-aligned parallel corpus.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, transports and
//! the command-line pipeline live in the companion `agmg` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod model;
pub mod align;
pub mod curate;
pub mod embed;
pub mod metrics;
pub mod normalize;
pub mod refine;
pub mod segment;
pub mod stats;
pub mod synth;
pub mod vocab;
