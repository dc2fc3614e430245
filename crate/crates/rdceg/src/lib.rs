//! Reduced dynamic chain event graphs.
//!
//! This crate models recurrent-event processes in open populations as colored
//! event graphs. An event tree is pruned to a modified tree, colored by
//! stages (shared transition distributions) and clusters (shared holding-time
//! distributions) into a hued tree, and coalesced by positions into an RDCEG.
//! Inference is conjugate throughout: Dirichlet posteriors on transition
//! probabilities and Inverse-Gamma posteriors on Weibull scales, with the
//! marginal likelihood available in closed form. Model selection is a greedy
//! agglomerative search over stagings and clusterings; fitted graphs convert
//! to semi-Markov processes for time-to-event queries; cuts and fine cuts of
//! the rolled-out graph license conditional-independence statements.
//!
//! The `rdceg` binary exposes the full pipeline: `simulate`, `fit`, `query`,
//! `smp`, `diagnose` and `repro`.

pub mod ci;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod graph;
pub mod inference;
pub mod numeric;
pub mod search;
pub mod sim;
pub mod smp;

pub use error::{RdcegError, Result};
