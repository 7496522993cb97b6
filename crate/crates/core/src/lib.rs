//! Numerical laboratory for the relation between long-run average and
//! discounted values of deterministic optimal control problems.
//!
//! * [`means`]: Cesàro and Abel means of sequences and functions of time.
//! * [`kernel`]: the mixing density `λ² s e^{-λ s}` and its mass estimates.
//! * [`plays`]: sampled trajectories, concatenation, `γ_t` and `γ_λ`.
//! * [`control`]: controlled ODEs, value estimation by schedule search and the
//!   double-integrator instance whose average and discounted limits differ.
//! * [`discrete`]: exact `v_n` / `v_λ` on finite graphs, minimum mean cycles.
//! * [`bridge`]: reduction of a continuous-time problem to a discrete one and
//!   the error bounds between them.
//! * [`experiments`]: batch runner writing CSV reports.

pub mod bridge;
pub mod control;
pub mod discrete;
pub mod error;
pub mod experiments;
pub mod kernel;
pub mod means;
pub mod plays;
pub mod report;

pub use error::{Error, Result};
pub use report::ValueReport;
