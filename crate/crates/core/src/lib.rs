//! Tooling for building and checking a paired classical/quantum machine
//! learning code corpus.
//!
//! The crate is split along the pipeline:
//!
//! - [`corpus`]: seed ingestion and the line-delimited manifest format.
//! - [`scaler`]: reference sampling, prompt assembly and generation campaigns
//!   against a completion endpoint.
//! - [`contract`]: the strict output contract that generations must follow.
//! - [`syntax`]: a lexical/structural validator for Python payloads.
//! - [`qsim`]: statevector simulation with ZZ feature maps and
//!   RealAmplitudes ansatze.
//! - [`train`]: derivative-free optimization, hybrid quantum models and a
//!   small MLP baseline.
//! - [`evalbench`]: datasets, splits and the cross-validated metric suite.
//! - [`stats`]: corpus statistics and SFT export.

pub mod contract;
pub mod corpus;
pub mod evalbench;
pub mod qsim;
pub mod scaler;
pub mod stats;
pub mod syntax;
pub mod train;

pub(crate) mod rng;

/// Version string recorded in manifest metadata.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
