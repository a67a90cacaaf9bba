//! Strategic analysis of ranked choice elections.
//!
//! The pipeline ingests cast vote records, tabulates them with an exact
//! weighted-inclusive Gregory STV engine, removes provably irrelevant
//! candidates under a ballot-addition allowance, searches election
//! structures for minimal ballot additions, and derives margins, exhaustion
//! sensitivity, strategy classes and preference alignment.

pub mod allocation;
pub mod bootstrap;
pub mod error;
pub mod exhaustion_models;
pub mod ingest;
pub mod instance;
pub mod metrics;
pub mod pipeline;
pub mod rational;
pub mod reduction;
pub mod search;
pub mod strict_support;
pub mod structure;
pub mod tabulation;

pub use error::{Error, Result};
pub use instance::{droop_quota, Ballot, ElectionInstance, ElectionSummary};
pub use structure::{structure_space_size, win_placement_count, Event, Outcome, Structure};
pub use tabulation::{tabulate, tabulate_ballots, RoundLog, TabulationResult, Transfer};
