//! Asynchronous decentralized SGD with sum-weight gossip mixing.
//!
//! Workers optimize local parameter replicas and mix them through weighted
//! pairwise messages whose weights sum to one across the system, giving an
//! unbiased moving consensus without a central coordinator. An elastic
//! center-variable baseline and a no-exchange baseline share the same
//! harness, which runs either as a deterministic sequential simulation or as
//! real threads, emitting per-iteration CSV metrics either way.

pub mod algo;
pub mod baselines;
pub mod cli;
pub mod datagen;
pub mod error;
pub mod harness;
pub mod numeric;
pub mod objectives;
pub mod protocol;

pub use error::{Error, Result};
