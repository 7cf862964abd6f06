pub mod align;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod par;
pub mod syntax;
pub mod synthesize;

pub use error::{Error, Result};
