//! Nonlocal tumor growth under chemotherapy: forward simulation, adjoint
//! gradients and optimal infusion schedules.
//!
//! The tumor density `p` is transported by a velocity proportional to a
//! Gaussian-weighted average of itself, grows logistically and is killed by
//! the drug `d`; the drug diffuses and exchanges with the blood-borne
//! infusion `I(t)`. [`optimize::optimize`] computes the schedule minimizing
//! tumor burden plus a quadratic dosing penalty.

pub mod cli;
pub mod error;
pub mod forward;
pub mod grid;
pub mod model;
pub mod optimize;
pub mod parallel;

pub use error::{OncoError, Result};
pub use forward::{ControlProfile, Normalization, Problem, Storage, Trajectory};
pub use grid::{Field, Grid, Kernel, Mesh};
pub use model::ModelParams;
