//! Tracking rewards, perception error, mechanical power, current model and hit success.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vec3;

/// Racket radius used as the success threshold, m.
pub const HIT_RADIUS: f64 = 0.1;

/// Arm current limit, A. Samples at or above the limit are violations.
pub const CURRENT_LIMIT: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardParams {
    pub sigma_p: f64,
    pub sigma_v: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            sigma_p: 0.1,
            sigma_v: 1.0,
        }
    }
}

impl RewardParams {
    pub fn new(sigma_p: f64, sigma_v: f64) -> Result<Self> {
        if !(sigma_p > 0.0 && sigma_v > 0.0) {
            return Err(Error::domain("reward sensitivities must be > 0"));
        }
        Ok(Self { sigma_p, sigma_v })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwingEvaluation {
    pub p_ee: Vec3,
    pub p_target: Vec3,
    pub v_ee: f64,
    pub v_target: f64,
    pub n_ee: Vec3,
    pub n_target: Vec3,
    pub at_swing_time: bool,
}

pub fn reward_position(ev: &SwingEvaluation, rp: &RewardParams) -> f64 {
    if !ev.at_swing_time {
        return 0.0;
    }
    1.0 / (1.0 + (ev.p_target - ev.p_ee).norm() / rp.sigma_p)
}

/// Cosine distance `1 - a . b` of unit vectors.
pub fn cosine_distance(a: &Vec3, b: &Vec3) -> f64 {
    1.0 - a.dot(b)
}

pub fn reward_orientation(ev: &SwingEvaluation) -> f64 {
    if !ev.at_swing_time {
        return 0.0;
    }
    1.0 / (1.0 + cosine_distance(&ev.n_target, &ev.n_ee).powi(2))
}

pub fn reward_velocity(ev: &SwingEvaluation, rp: &RewardParams) -> f64 {
    if !ev.at_swing_time {
        return 0.0;
    }
    1.0 / (1.0 + (ev.v_target - ev.v_ee).powi(2) / rp.sigma_v)
}

pub fn reward_perception(p_est_intercept: &Vec3, p_true_intercept: &Vec3) -> f64 {
    1.0 / (1.0 + (p_est_intercept - p_true_intercept).norm())
}

pub fn perception_error(p_true_at_swing: &Vec3, p_est_at_swing: &Vec3) -> f64 {
    (p_true_at_swing - p_est_at_swing).norm()
}

/// Joint torques (N m) and velocities (rad/s) indexed `[joint][sample]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSeries {
    t: Vec<f64>,
    torque: Vec<Vec<f64>>,
    velocity: Vec<Vec<f64>>,
    motor_constant: Vec<f64>,
    bus_voltage: f64,
}

impl JointSeries {
    pub fn new(
        t: Vec<f64>,
        torque: Vec<Vec<f64>>,
        velocity: Vec<Vec<f64>>,
        motor_constant: Vec<f64>,
        bus_voltage: f64,
    ) -> Result<Self> {
        if !(bus_voltage > 0.0) {
            return Err(Error::domain("bus voltage must be > 0"));
        }
        let joints = torque.len();
        if velocity.len() != joints || motor_constant.len() != joints {
            return Err(Error::domain("torque, velocity and motor constants disagree on joint count"));
        }
        if torque.iter().chain(&velocity).any(|s| s.len() != t.len()) {
            return Err(Error::domain("every joint series must match the time axis length"));
        }
        if motor_constant.iter().any(|k| !(*k > 0.0)) {
            return Err(Error::domain("motor constants must be > 0"));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("sample times must be strictly increasing"));
        }
        Ok(Self {
            t,
            torque,
            velocity,
            motor_constant,
            bus_voltage,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn joints(&self) -> usize {
        self.torque.len()
    }

    fn positive_power(&self, k: usize) -> f64 {
        (0..self.joints())
            .map(|j| (self.torque[j][k] * self.velocity[j][k]).max(0.0))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerIntegration {
    /// Trapezoidal time integral of positive power.
    #[default]
    Trapezoid,
    /// Plain sum over samples.
    DiscreteSum,
}

pub fn normalized_mechanical_power(js: &JointSeries, target_distance: f64) -> Result<f64> {
    normalized_mechanical_power_with(js, target_distance, PowerIntegration::Trapezoid)
}

pub fn normalized_mechanical_power_with(
    js: &JointSeries,
    target_distance: f64,
    mode: PowerIntegration,
) -> Result<f64> {
    if !(target_distance > 0.0) {
        return Err(Error::domain(format!("target distance must be > 0, got {target_distance}")));
    }
    let p: Vec<f64> = (0..js.len()).map(|k| js.positive_power(k)).collect();
    let total = match mode {
        PowerIntegration::DiscreteSum => p.iter().sum(),
        PowerIntegration::Trapezoid => js
            .t
            .windows(2)
            .zip(p.windows(2))
            .map(|(t, p)| 0.5 * (t[1] - t[0]) * (p[0] + p[1]))
            .sum::<f64>(),
    };
    Ok(total / target_distance)
}

/// Travelled length of an end-effector path, usable as an alternative normaliser.
pub fn ee_path_length(path: &[Vec3]) -> f64 {
    path.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// `sum_i (tau_i / K_m,i)^2 / V + sum_i tau_i omega_i / V` at sample `k`.
pub fn total_current(js: &JointSeries, k: usize) -> Result<f64> {
    if k >= js.len() {
        return Err(Error::domain(format!("sample {k} out of range (len {})", js.len())));
    }
    let v = js.bus_voltage;
    let sum: f64 = (0..js.joints())
        .map(|j| {
            let tau = js.torque[j][k];
            (tau / js.motor_constant[j]).powi(2) + tau * js.velocity[j][k]
        })
        .sum();
    Ok(sum / v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CurrentCheck {
    Ok,
    Violation { t: f64, sample: usize, current: f64 },
}

pub fn check_current_constraint(js: &JointSeries) -> CurrentCheck {
    for k in 0..js.len() {
        let current = total_current(js, k).unwrap_or(f64::NAN);
        if !(current.abs() < CURRENT_LIMIT) {
            return CurrentCheck::Violation {
                t: js.t[k],
                sample: k,
                current,
            };
        }
    }
    CurrentCheck::Ok
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SuccessLevel {
    I,
    II,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombinationRule {
    /// Position error plus perception error within the radius.
    #[default]
    Sum,
    /// Each error within the radius on its own.
    BothBelow,
}

pub fn hit_success(p_ee: &Vec3, p_target: &Vec3, perception_err: f64, level: SuccessLevel) -> bool {
    hit_success_with(p_ee, p_target, perception_err, level, CombinationRule::Sum)
}

pub fn hit_success_with(
    p_ee: &Vec3,
    p_target: &Vec3,
    perception_err: f64,
    level: SuccessLevel,
    rule: CombinationRule,
) -> bool {
    let pos = (p_ee - p_target).norm();
    let level_one = pos <= HIT_RADIUS;
    match level {
        SuccessLevel::I => level_one,
        SuccessLevel::II => {
            level_one
                && match rule {
                    CombinationRule::Sum => pos + perception_err <= HIT_RADIUS,
                    CombinationRule::BothBelow => perception_err <= HIT_RADIUS,
                }
        }
    }
}
