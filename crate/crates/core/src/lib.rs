//! Search-based landing trajectory planning on a Dubins airplane lattice,
//! and maximum-entropy inverse optimal control of the planner's penalty
//! terms from demonstrated arrivals.
//!
//! The pipeline runs bottom up:
//!
//! * [`geo`] turns geodetic fixes into a local east-north-up frame.
//! * [`dubins`] provides planar Dubins paths and the airplane heuristic.
//! * [`lattice`] quantizes states and integrates motion primitives.
//! * [`costs`] holds the routing field and the separation potential.
//! * [`planner`] runs anytime repairing A* and plans arrival sequences.
//! * [`irl`] learns the costs from demonstrations.
//! * [`data`] ingests traces and synthesizes expert datasets.
//! * [`eval`] computes imitation and safety metrics.

pub mod config;
pub mod costs;
pub mod data;
pub mod dubins;
pub mod error;
pub mod eval;
pub mod geo;
pub mod irl;
pub mod lattice;
pub mod par;
pub mod planner;
pub mod spline;

pub use error::{Error, Result};
pub use geo::ContinuousState;
pub use lattice::GridState;
