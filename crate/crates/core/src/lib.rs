//! Core of the geoframe query engine.
//!
//! A natural-language question about crash data is turned into a
//! [`SemanticFrame`](frame::SemanticFrame) by an interpreter (see the
//! `geoframe` crate), then flows through this crate:
//!
//! 1. [`repair`] validates the raw frame against a [`SchemaRegistry`],
//!    normalizes surface forms into canonical values, resolves named places
//!    and applies structural corrections, recording every change.
//! 2. [`graph`] compiles the validated frame into a typed DAG of spatial
//!    operations and checks it before any data is touched.
//! 3. [`exec`] evaluates the graph over an in-memory [`Dataset`].
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is
//! deterministic: identical inputs give identical frames, graphs, and
//! results.
#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

#[macro_use]
pub mod vocab;

pub mod exec;
pub mod fixture;
pub mod frame;
pub mod geo;
pub mod graph;
pub mod repair;
pub mod schema;
pub mod store;

#[cfg(test)]
pub(crate) mod testkit;

pub use exec::{execute, ResultSet};
pub use frame::SemanticFrame;
pub use geo::{Geometry, Point};
pub use graph::{compile, ExecGraph};
pub use repair::{repair, RepairReport};
pub use schema::{Operator, Relation, Role, SchemaRegistry};
pub use store::{Dataset, EntityRecord};
pub use vocab::{Token, Vocab};
