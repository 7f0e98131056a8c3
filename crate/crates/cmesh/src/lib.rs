//! Distributed coarse-mesh partitioning for forest-of-trees adaptive meshes.
//!
//! The coarse mesh is the connectivity of tree roots; a partition assigns
//! each rank a consecutive tree range, encoded in a signed offset array whose
//! entries flag trees shared across rank boundaries. From two such arrays
//! alone, every rank derives its full repartition communication pattern --
//! senders, receivers, tree ranges, ghost shipments -- without any handshake
//! round, then executes the move in a two-phase step.
//!
//! Modules:
//! - [`tree`], [`cmesh`], [`global`]: tree classes, face encoding, per-rank
//!   and whole-mesh containers.
//! - [`offsets`], [`forest`]: the partition codec and forest-derived cuts.
//! - [`pattern`], [`ghost`], [`exec`]: communication pattern, ghost rules,
//!   and the repartition step.
//! - [`sim`], [`meshgen`], [`oracle`]: the simulated multi-rank runtime,
//!   generators, and brute-force references.

pub mod cmesh;
pub mod error;
pub mod exec;
pub mod forest;
pub mod ghost;
pub mod global;
pub mod meshgen;
pub mod offsets;
pub mod oracle;
pub mod pattern;
pub mod sim;
pub mod tree;

pub use error::{CmeshError, Result};
