//! Exact and asymptotic limits of variable-length compression with a
//! nonvanishing error probability, lossless and lossy.

pub mod blahut;
pub mod cli;
pub mod cutoff;
pub mod erokhin;
pub mod error;
pub mod iidlimits;
pub mod lossy;
pub mod optcode;
pub mod source;
pub mod special;

pub use error::{Error, Result};
