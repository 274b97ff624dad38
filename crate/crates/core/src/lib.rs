//! Dual-attention aspect-level sentiment classification.

pub mod attention;
pub mod classifier;
pub mod compute;
pub mod corpus;
pub mod embeddings;
pub mod encoder;
pub mod error;
pub mod gcn;
pub mod trainer;

pub use error::{Error, Result};
