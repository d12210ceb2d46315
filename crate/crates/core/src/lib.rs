pub mod augment;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod nn;
pub mod promptee;
pub mod tagging;

pub use error::{Error, Result};
