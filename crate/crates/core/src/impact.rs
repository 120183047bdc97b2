//! Racket–shuttle collision against an infinitely heavy racket.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vec3;

/// Nominal incoming shuttle velocity used for deflection errors, m/s (court frame).
pub const NOMINAL_INCOMING: Vec3 = Vec3::new(-4.5, 0.0, -4.5);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RacketState {
    /// Face normal, pointing from the string bed toward the incoming shuttle.
    pub normal: Vec3,
    /// Sweet-spot velocity, m/s.
    pub velocity: Vec3,
}

impl RacketState {
    pub fn new(normal: Vec3, velocity: Vec3) -> Result<Self> {
        let r = Self { normal, velocity };
        r.validate()?;
        Ok(r)
    }

    /// Normalises `normal` before construction.
    pub fn from_direction(direction: Vec3, velocity: Vec3) -> Result<Self> {
        let n = direction.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::domain("racket normal must be a non-zero finite vector"));
        }
        Self::new(direction / n, velocity)
    }

    pub fn validate(&self) -> Result<()> {
        if (self.normal.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!(
                "racket normal must be unit length, |n| = {}",
                self.normal.norm()
            )));
        }
        if !self.velocity.iter().all(|x| x.is_finite()) {
            return Err(Error::domain("racket velocity must be finite"));
        }
        Ok(())
    }
}

pub fn outgoing_velocity(v_in: &Vec3, racket: &RacketState) -> Vec3 {
    outgoing_velocity_with_restitution(v_in, racket, 1.0)
}

/// Reflect the normal component of the shuttle velocity relative to the racket:
/// `v_out = v_in - (1 + e) ((v_in - v_r) . n) n`.
pub fn outgoing_velocity_with_restitution(v_in: &Vec3, racket: &RacketState, restitution: f64) -> Vec3 {
    let n = &racket.normal;
    let v_rel_n = (v_in - racket.velocity).dot(n);
    v_in - n * ((1.0 + restitution) * v_rel_n)
}

pub fn deflection_error(cmd: &RacketState, exec: &RacketState) -> f64 {
    deflection_error_with(cmd, exec, &NOMINAL_INCOMING)
}

pub fn deflection_error_with(cmd: &RacketState, exec: &RacketState, v_in: &Vec3) -> f64 {
    (outgoing_velocity(v_in, cmd) - outgoing_velocity(v_in, exec)).norm()
}
