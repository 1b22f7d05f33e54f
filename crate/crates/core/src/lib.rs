//! Flood and Echo message passing.
//!
//! Computation starts at an origin node: nodes are layered by hop distance,
//! a flooding pass activates layers outward and an echo pass activates them
//! back toward the origin. Each phase touches every reachable node while
//! sending at most four messages per edge. The crate contains the schedule,
//! a small autodiff engine, neural and symbolic cells, MPNN baselines,
//! synthetic datasets, expressiveness oracles and the training harness.

pub mod autodiff;
pub mod cells;
pub mod error;
pub mod experiments;
pub mod gradsuite;
pub mod graph;
pub mod models;
pub mod oracles;
pub mod schedule;
pub mod seed;
pub mod tasks;
pub mod train;

pub use error::{Error, Result};
