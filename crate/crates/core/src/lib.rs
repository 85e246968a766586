//! Causal structure discovery from exchangeable multi-environment
//! categorical data.

pub mod ci_test;
pub mod discovery;
pub mod error;
pub mod graphs;
pub mod harness;
pub mod oracle;
pub mod process;

pub use error::{Error, Result};
