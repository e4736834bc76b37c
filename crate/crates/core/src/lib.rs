pub mod classifier;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod model_file;
pub mod pipeline;
pub mod polybasis;
pub mod scoring;
pub mod selection;
mod special;
pub mod synth;
pub mod transform;

pub use error::{Error, Result};
