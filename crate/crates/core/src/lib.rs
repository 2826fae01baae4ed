pub mod cli;
pub mod corpus;
pub mod error;
pub mod extractor;
pub mod generator;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod neural;
pub mod oracle;
pub mod trainer;

pub use error::{Error, Result};
