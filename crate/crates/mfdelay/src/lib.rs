//! Particle solvers for mean-field stochastic differential equations with
//! delay, mean-field anticipated backward equations, and a stochastic
//! maximum principle for delayed mean-field control.
//!
//! Every solver works on an N-particle system driven by a seeded
//! [`RandomSource`]. Per-particle loops run on rayon when the `parallel`
//! feature is enabled (the default) and [`par::set_parallel`] has not turned
//! it off; reductions use a fixed block order so results are identical
//! either way.

pub mod backward;
pub mod coefficients;
pub mod control;
pub mod error;
pub mod forward;
pub mod grid;
pub mod measure;
pub mod models;
pub mod par;
pub mod paths;
pub mod regression;
pub mod rng;
pub mod stats;

pub use coefficients::{CoefficientSet, CostArgs, Dims, Jacobians, LawSlot, StateArgs, Structure};
pub use error::{Error, Result};
pub use grid::{DelaySpec, TimeGrid};
pub use measure::{w2_distance_1d, w2_distance_sliced, EmpiricalLaw};
pub use paths::{InitialSegment, NodeArray, SamplePath, TerminalSegment};
pub use regression::{Basis, Projector};
pub use rng::{BrownianIncrements, RandomSource};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
