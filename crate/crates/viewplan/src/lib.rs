//! Coverage-driven viewpoint selection for scene capture.
//!
//! The crate is organized around a single pipeline:
//!
//! 1. [`sampling`] draws a pool of candidate camera poses around a training
//!    trajectory (isotropic jitter and robot-reachable arc displacements).
//! 2. [`geometry`] renders depth for each candidate against a triangle mesh
//!    and extracts the set of surface voxels the candidate observes.
//! 3. [`selection`] greedily picks a budget of candidates that maximizes new
//!    voxel coverage, optionally weighted by novelty relative to the
//!    training trajectory, then resamples the picks into a training stream.
//! 4. [`gating`] scores reconstruction quality per scene and gates between a
//!    learned observation source and a fallback.
//! 5. [`proxy`] runs a kinematic clearance-estimation benchmark that stands
//!    in for closed-loop control evaluation.
//! 6. [`diagnostics`] summarizes runs: budget stability, coverage/error
//!    correlation, novelty-bin tails, and paired significance tests.
//!
//! Everything that consumes randomness derives it from named
//! [`rng`] streams, so identical inputs produce bit-identical outputs.

pub mod diagnostics;
pub mod error;
pub mod gating;
pub mod geometry;
pub mod io;
pub mod pose;
pub mod proxy;
pub mod rng;
pub mod sampling;
pub mod selection;

pub use error::{Error, Result};
