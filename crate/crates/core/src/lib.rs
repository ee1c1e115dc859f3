//! Likelihood-validated middleware: an HMM process validator, a 1-D k-means
//! symbolizer, a deterministic discrete-event simulator of the middleware
//! stack, and the credit-card and file-transfer scenario generators.

pub mod error;
pub mod hmm;
pub mod quantizer;
pub mod scenarios;
pub mod sim;
pub mod validator;

pub use error::{Error, Result};
