//! Simulation and analysis of coherent population trapping in a two-tone
//! driven, four-level superconducting artificial atom.
//!
//! The numerical core is generic over the scalar type ([`Real`], implemented
//! for `f32` and `f64`); the aliases below fix it to `f64`, which is what
//! the sweep, fitting and I/O layers use.

pub mod analysis;
pub mod error;
pub mod evolution;
pub mod hamiltonian;
pub mod linalg;
pub mod model;
pub mod presets;
pub mod scalar;
pub mod sweep;

pub use error::{Error, Result};
pub use scalar::Real;
pub use sweep::{run_sweep, Axis, AxisSpec, Series, SimContext, SweepResult, SweepSpec};

pub type DeviceParams = model::DeviceParams<f64>;
pub type DriveParams = model::DriveParams<f64>;
pub type DecoherenceParams = model::DecoherenceParams<f64>;
pub type DensityMatrix4 = model::DensityMatrix4<f64>;
pub type MeasurementModel = model::MeasurementModel<f64>;
pub type IntegratorConfig = evolution::IntegratorConfig<f64>;
pub type Trajectory = evolution::Trajectory<f64>;
pub type RotatingFrameHamiltonian = hamiltonian::RotatingFrameHamiltonian<f64>;

/// Single-precision state, mainly for quick exploratory runs.
pub type DensityMatrix4F32 = model::DensityMatrix4<f32>;
pub type TrajectoryF32 = evolution::Trajectory<f32>;
