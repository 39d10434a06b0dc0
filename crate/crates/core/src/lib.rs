//! Iterative approximate Byzantine consensus on directed graphs.
//!
//! The crate has two halves:
//!
//! * a round-by-round simulator of the trimmed-mean iteration ([`engine`])
//!   driven by pluggable Byzantine strategies ([`adversary`]);
//! * an analysis toolkit that checks graph conditions ([`graph`]),
//!   reconstructs a row-stochastic transition matrix for every simulated
//!   round and certifies convergence through coefficients of ergodicity
//!   ([`matrix`]).
//!
//! [`harness`] ties both to scenario files, CSV traces and JSON reports, and
//! backs the `iabc` command-line tool.
//!
//! ```
//! use iabc::adversary::AdversarySpec;
//! use iabc::engine::{run_scenario, Scenario};
//! use iabc::graph::{DirectedGraph, FaultConfig};
//!
//! let scenario = Scenario::new(
//!     DirectedGraph::complete(4),
//!     FaultConfig::new(1, [4])?,
//!     AdversarySpec::named("constant").with_param("value", 100.0),
//!     vec![0.0, 6.0, 12.0, 0.0],
//! )?;
//! let run = run_scenario(&scenario)?;
//! assert_eq!(run.traces[0].states_after, vec![6.0, 9.0, 9.0]);
//! assert!(run.summary.converged);
//! # Ok::<(), iabc::Error>(())
//! ```

pub mod adversary;
pub mod engine;
mod error;
pub mod graph;
pub mod harness;
pub mod matrix;

pub use error::{Error, Result};
