//! Differential morphing attack detection.
//!
//! A document image and a trusted live capture are scored by three modules:
//! an attempt classifier estimating whether the live subject is the
//! accomplice, the genuine holder or the criminal; an identity detector on
//! the difference of the two face embeddings; and an identity-artifact
//! detector that also looks at document-only artifact features. The attempt
//! probabilities weight the two detector scores into the final morph score.

pub mod ac;
pub mod bundle;
pub mod config;
pub mod domain;
pub mod embeddings;
pub mod error;
pub mod fusion;
pub mod harness;
pub mod id;
pub mod ida;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod svm;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
