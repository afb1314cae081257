//! Two-stage article recommender: content and graph representation
//! learning, approximate nearest-neighbor candidate generation, deep
//! pointwise ranking, reference baselines, and an offline evaluation
//! harness over implicit edit feedback.

pub mod binio;
pub mod candidates;
pub mod corpus;
pub mod error;
pub mod annindex;
pub mod graphembed;
pub mod nn;
pub mod store;
pub mod textembed;

pub use error::{Error, Result};
