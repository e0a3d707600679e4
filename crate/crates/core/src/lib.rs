//! Spatial templates: predicting where an object sits relative to a subject
//! from a (subject, relation, object) phrase.

pub mod cli;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod metrics;
pub mod net;
pub mod render;
pub mod templates;

pub use error::{Error, Result};
