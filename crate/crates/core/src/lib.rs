//! redundancy-lab: encoder-redundancy diagnostics for multi-encoder models.
//!
//! The toolkit has two halves:
//!
//! * an analytics engine that ingests per-subset benchmark score tables and
//!   computes Conditional Utilization Rates (CUR), Information Gaps (IG),
//!   degradation summaries, conditional extremes and the redundancy
//!   predicate ([`ingest`], [`metrics`], [`ablate`]);
//! * a toy multi-encoder fusion simulator with controllable information
//!   overlap and a hand-rolled, finite-difference-checked backward pass,
//!   used to validate the diagnostics against known ground truth
//!   ([`simkit`], [`train`]).

pub mod ablate;
pub mod core;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod oracle;
pub mod report;
pub mod simconfig;
pub mod simkit;
pub mod train;

pub use error::{Error, Result};
