//! Sequence labelling for security-domain named entities: corpus formats,
//! word embeddings, a linear-chain CRF, a BiLSTM-CRF tagger, a feature-based
//! CRF baseline and entity-level evaluation.

pub mod bilstm;
pub mod binfmt;
pub mod corpus;
pub mod crf;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod numerics;
pub mod synthetic;
pub mod tagger;
pub mod training;

pub use error::{Error, Result};
