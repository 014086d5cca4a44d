//! Hint-driven translation of goals in an untyped Lisp-like term language
//! into SMT-LIB v2 queries, plus the soundness obligations (Q1/Q2) that
//! justify the translation, checked with a sampling falsification oracle.

pub mod emit;
pub mod error;
pub mod exptrw;
pub mod goalfile;
pub mod hints;
pub mod obligations;
pub mod oracle;
pub mod phase1;
pub mod pipeline;
pub mod solver;
pub mod term;

pub use error::{Error, Result};
