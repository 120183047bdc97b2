//! Shuttlecock perception, prediction and interception toolkit.
//!
//! The crate is organised bottom-up:
//!
//! - [`dynamics`]: quadratic-drag flight model, RK4 integration, launch sampling, retiming.
//! - [`perception`]: camera FOV and bearing rate, motion-dependent detection/noise model,
//!   colour gate and noise-model regression.
//! - [`estimation`]: time-adaptive EKF over position and velocity.
//! - [`prediction`]: interception point, trajectory qualification, target hold and the
//!   linearised interception shortcut.
//! - [`impact`]: elastic racket/shuttle collision and deflection error.
//! - [`metrics`]: task rewards, perception error, mechanical power and arm current.
//! - [`harness`]: episode orchestration, sweeps and heatmaps.
//!
//! World frame: x toward the opponent, z up, origin at the centre of the robot's half-court
//! (the net line sits at x = `ScenarioConfig::net_x`).

// `!(x > 0.0)` style checks reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod impact;
pub mod io;
pub mod metrics;
pub mod perception;
pub mod prediction;

pub use dynamics::{
    LaunchDistribution, ShuttleParams, ShuttleState, StopCondition, Trajectory, DEFAULT_DT,
};
pub use error::{Error, Result};
pub use estimation::{EkfConfig, EkfSnapshot, EkfState};
pub use impact::RacketState;
pub use perception::{CameraIntrinsics, CameraModel, CameraTrack, Measurement, NoiseModel};
pub use prediction::{CourtGeometry, InterceptionTarget, Rect, TargetSource};

/// 3-vector in SI units.
pub type Vec3 = nalgebra::Vector3<f64>;
