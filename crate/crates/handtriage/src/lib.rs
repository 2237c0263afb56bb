//! File formats, the bootstrap runner, triage reports, the run store and
//! the HTTP review service around `handtriage-core`.

pub mod cli;
pub mod error;
pub mod eval;
pub mod fsutil;
pub mod io;
pub mod runner;
pub mod service;
pub mod store;
pub mod triage;

pub use error::{Error, Result};
