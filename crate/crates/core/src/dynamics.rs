//! Shuttlecock flight model.
//!
//! The shuttle is a point mass under gravity and quadratic drag,
//! `dv/dt = g - |v| v / L`, where `L = 2m / (rho S C_D)` is the aerodynamic length.
//! The speed scale over which drag dominates is `L`; terminal speed is `sqrt(|g| L)`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vec3;

/// Default integration step: ten substeps per 60 Hz camera frame.
pub const DEFAULT_DT: f64 = 1.0 / 600.0;

/// Default height below which `simulate` stops (slightly under the floor).
pub const DEFAULT_STOP_Z: f64 = -0.1;

const MAX_STEPS: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShuttleParams {
    /// kg
    #[serde(default = "default_mass")]
    pub mass: f64,
    /// Aerodynamic length L in metres. `f64::INFINITY` disables drag.
    #[serde(default = "default_aero_length")]
    pub aero_length: f64,
    /// m/s²
    #[serde(default = "default_gravity")]
    pub gravity: Vec3,
}

fn default_mass() -> f64 {
    0.005
}

fn default_aero_length() -> f64 {
    4.1
}

fn default_gravity() -> Vec3 {
    Vec3::new(0.0, 0.0, -9.81)
}

impl Default for ShuttleParams {
    fn default() -> Self {
        Self {
            mass: default_mass(),
            aero_length: default_aero_length(),
            gravity: default_gravity(),
        }
    }
}

impl ShuttleParams {
    pub fn new(mass: f64, aero_length: f64) -> Result<Self> {
        let params = Self {
            mass,
            aero_length,
            ..Self::default()
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_gravity(mut self, gravity: Vec3) -> Self {
        self.gravity = gravity;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::domain(format!("mass must be > 0, got {}", self.mass)));
        }
        // infinity is allowed and means drag-free flight
        if !(self.aero_length > 0.0) {
            return Err(Error::domain(format!(
                "aero_length must be > 0, got {}",
                self.aero_length
            )));
        }
        if !self.gravity.iter().all(|g| g.is_finite()) {
            return Err(Error::domain("gravity must be finite"));
        }
        Ok(())
    }

    /// Speed at which drag balances gravity, `sqrt(|g| L)`.
    pub fn terminal_speed(&self) -> f64 {
        (self.gravity.norm() * self.aero_length).sqrt()
    }
}

/// Timestamped world-frame position and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShuttleState {
    pub t: f64,
    pub p: Vec3,
    pub v: Vec3,
}

impl ShuttleState {
    pub fn new(t: f64, p: Vec3, v: Vec3) -> Self {
        Self { t, p, v }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.p.iter().all(|x| x.is_finite())
            && self.v.iter().all(|x| x.is_finite())
    }

    pub fn translated(&self, offset: Vec3) -> Self {
        Self {
            p: self.p + offset,
            ..*self
        }
    }
}

/// Gravity plus quadratic drag. Exactly `g` at rest.
pub fn acceleration(v: &Vec3, params: &ShuttleParams) -> Vec3 {
    let speed = v.norm();
    if speed == 0.0 || params.aero_length.is_infinite() {
        return params.gravity;
    }
    params.gravity - v * (speed / params.aero_length)
}

/// `L = 2 m / (rho S C_D)`.
pub fn aero_length_from_physical(
    mass: f64,
    air_density: f64,
    cross_section: f64,
    drag_coeff: f64,
) -> Result<f64> {
    for (name, value) in [
        ("mass", mass),
        ("air_density", air_density),
        ("cross_section", cross_section),
        ("drag_coeff", drag_coeff),
    ] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::domain(format!("{name} must be > 0, got {value}")));
        }
    }
    Ok(2.0 * mass / (air_density * cross_section * drag_coeff))
}

/// One classical Runge-Kutta step of the coupled (p, v) system.
pub fn step_rk4(state: &ShuttleState, params: &ShuttleParams, dt: f64) -> Result<ShuttleState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::domain(format!("dt must be > 0, got {dt}")));
    }
    Ok(rk4_unchecked(state, params, dt))
}

pub(crate) fn rk4_unchecked(state: &ShuttleState, params: &ShuttleParams, dt: f64) -> ShuttleState {
    let (p, v) = (state.p, state.v);
    let half = 0.5 * dt;

    let k1p = v;
    let k1v = acceleration(&v, params);
    let v2 = v + k1v * half;
    let k2p = v2;
    let k2v = acceleration(&v2, params);
    let v3 = v + k2v * half;
    let k3p = v3;
    let k3v = acceleration(&v3, params);
    let v4 = v + k3v * dt;
    let k4p = v4;
    let k4v = acceleration(&v4, params);

    ShuttleState {
        t: state.t + dt,
        p: p + (k1p + 2.0 * k2p + 2.0 * k3p + k4p) * (dt / 6.0),
        v: v + (k1v + 2.0 * k2v + 2.0 * k3v + k4v) * (dt / 6.0),
    }
}

/// When [`simulate`] stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopCondition {
    /// Stop once `t - t0 >= max_t`.
    MaxTime(f64),
    /// Stop at the first descending state below `z`; fail after `max_t` seconds of flight.
    BelowHeight { z: f64, max_t: f64 },
}

impl StopCondition {
    pub fn ground() -> Self {
        StopCondition::BelowHeight {
            z: DEFAULT_STOP_Z,
            max_t: 60.0,
        }
    }
}

/// Integrate from `initial` until `stop` holds. Timestamps are `t0 + k dt` exactly.
pub fn simulate(
    initial: &ShuttleState,
    params: &ShuttleParams,
    dt: f64,
    stop: StopCondition,
) -> Result<Trajectory> {
    params.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::domain(format!("dt must be > 0, got {dt}")));
    }
    if !initial.is_finite() {
        return Err(Error::domain("initial state must be finite"));
    }

    let t0 = initial.t;
    let mut states = vec![*initial];
    let mut current = *initial;

    match stop {
        StopCondition::MaxTime(max_t) => {
            if !(max_t >= 0.0 && max_t.is_finite()) {
                return Err(Error::domain(format!("max_t must be >= 0, got {max_t}")));
            }
            let n = ((max_t / dt) - 1e-9).ceil().max(0.0) as usize;
            if n > MAX_STEPS {
                return Err(Error::MaxSteps { max_steps: MAX_STEPS });
            }
            states.reserve(n);
            for k in 1..=n {
                current = rk4_unchecked(&current, params, dt);
                current.t = t0 + k as f64 * dt;
                states.push(current);
            }
        }
        StopCondition::BelowHeight { z, max_t } => {
            if !z.is_finite() || !(max_t > 0.0) {
                return Err(Error::domain("stop condition must have finite z and max_t > 0"));
            }
            let limit = ((max_t / dt).ceil() as usize).min(MAX_STEPS);
            let mut k = 0;
            while !(current.p.z < z && current.v.z < 0.0) {
                if k >= limit {
                    return Err(Error::MaxSteps { max_steps: limit });
                }
                k += 1;
                current = rk4_unchecked(&current, params, dt);
                current.t = t0 + k as f64 * dt;
                states.push(current);
            }
        }
    }

    Ok(Trajectory { step: dt, states })
}

/// Uniformly sampled flight record.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    step: f64,
    states: Vec<ShuttleState>,
}

impl Trajectory {
    pub fn new(step: f64, states: Vec<ShuttleState>) -> Result<Self> {
        Self::new_with_tolerance(step, states, 1e-9)
    }

    /// As [`Trajectory::new`] with a custom spacing tolerance, for samples read back from
    /// rounded text.
    pub fn new_with_tolerance(step: f64, states: Vec<ShuttleState>, tol: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::domain("trajectory step must be > 0"));
        }
        if states.is_empty() {
            return Err(Error::domain("trajectory must hold at least one state"));
        }
        for w in states.windows(2) {
            let gap = w[1].t - w[0].t;
            if !(gap > 0.0) || (gap - step).abs() > tol {
                return Err(Error::domain(format!(
                    "trajectory samples at {} and {} are not spaced by {step}",
                    w[0].t, w[1].t
                )));
            }
        }
        Ok(Self { step, states })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn states(&self) -> &[ShuttleState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn first(&self) -> &ShuttleState {
        &self.states[0]
    }

    pub fn last(&self) -> &ShuttleState {
        &self.states[self.states.len() - 1]
    }

    pub fn start_time(&self) -> f64 {
        self.first().t
    }

    pub fn end_time(&self) -> f64 {
        self.last().t
    }

    /// State at `t`, cubic Hermite in position and linear in velocity.
    /// Outside the recorded span the nearest end state is returned.
    pub fn state_at(&self, t: f64) -> ShuttleState {
        if t <= self.start_time() {
            return ShuttleState { t, ..*self.first() };
        }
        if t >= self.end_time() {
            return ShuttleState { t, ..*self.last() };
        }
        let i = (((t - self.start_time()) / self.step).floor() as usize).min(self.states.len() - 2);
        // guard against rounding in the index computation
        let i = if self.states[i].t > t { i.saturating_sub(1) } else { i };
        let i = if self.states[i + 1].t < t { (i + 1).min(self.states.len() - 2) } else { i };
        hermite(&self.states[i], &self.states[i + 1], t)
    }

    /// First crossing of `height` with negative vertical velocity.
    pub fn descending_crossing(&self, height: f64) -> Option<ShuttleState> {
        self.states.windows(2).find_map(|w| {
            let (a, b) = (&w[0], &w[1]);
            if a.p.z > height && b.p.z <= height {
                let s = refine_crossing(a, b, height);
                (s.v.z < 0.0).then_some(s)
            } else {
                None
            }
        })
    }

    /// Time-shift so the descending crossing of `target_height` lands at `swing_time`.
    ///
    /// A positive shift is padded at the front with the launch state (the shuttle is treated
    /// as launched later); a negative shift drops samples before the original start time.
    pub fn retime_to_target(&self, target_height: f64, swing_time: f64) -> Result<Trajectory> {
        let crossing = self
            .descending_crossing(target_height)
            .ok_or(Error::Qualification {
                height: target_height,
            })?;
        let shift = swing_time - crossing.t;
        if shift.abs() < 1e-9 {
            return Ok(self.clone());
        }

        let t0 = self.start_time();
        let shifted: Vec<ShuttleState> = self
            .states
            .iter()
            .map(|s| ShuttleState { t: s.t + shift, ..*s })
            .filter(|s| s.t >= t0 - 1e-9)
            .collect();
        if shifted.is_empty() {
            return Err(Error::Qualification {
                height: target_height,
            });
        }

        let first = shifted[0];
        let launch = *self.first();
        let mut padding = Vec::new();
        let mut k = 1;
        loop {
            let t = first.t - k as f64 * self.step;
            if t < t0 - 1e-9 {
                break;
            }
            padding.push(ShuttleState { t, ..launch });
            k += 1;
        }
        padding.reverse();
        padding.extend(shifted);
        Ok(Trajectory {
            step: self.step,
            states: padding,
        })
    }

    /// Shift every sample by a constant spatial offset.
    pub fn translated(&self, offset: Vec3) -> Trajectory {
        Trajectory {
            step: self.step,
            states: self.states.iter().map(|s| s.translated(offset)).collect(),
        }
    }

    pub fn time_shifted(&self, dt: f64) -> Trajectory {
        Trajectory {
            step: self.step,
            states: self
                .states
                .iter()
                .map(|s| ShuttleState { t: s.t + dt, ..*s })
                .collect(),
        }
    }
}

fn hermite(a: &ShuttleState, b: &ShuttleState, t: f64) -> ShuttleState {
    let h = b.t - a.t;
    let s = ((t - a.t) / h).clamp(0.0, 1.0);
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let p = a.p * h00 + a.v * (h10 * h) + b.p * h01 + b.v * (h11 * h);
    let v = a.v.lerp(&b.v, s);
    ShuttleState { t, p, v }
}

fn refine_crossing(a: &ShuttleState, b: &ShuttleState, height: f64) -> ShuttleState {
    let (mut lo, mut hi) = (a.t, b.t);
    let mut mid = hermite(a, b, 0.5 * (lo + hi));
    for _ in 0..60 {
        mid = hermite(a, b, 0.5 * (lo + hi));
        if (mid.p.z - height).abs() < 1e-12 {
            break;
        }
        if mid.p.z > height {
            lo = mid.t;
        } else {
            hi = mid.t;
        }
    }
    mid
}

/// Per-component uniform launch ranges, `[lo, hi]` in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LaunchDistribution {
    pub px: [f64; 2],
    pub py: [f64; 2],
    pub pz: [f64; 2],
    pub vx: [f64; 2],
    pub vy: [f64; 2],
    pub vz: [f64; 2],
}

impl Default for LaunchDistribution {
    fn default() -> Self {
        Self {
            px: [6.0, 7.0],
            py: [-2.0, 2.0],
            pz: [-0.5, 2.5],
            vx: [-19.0, -13.0],
            vy: [-3.0, 3.0],
            vz: [9.0, 15.0],
        }
    }
}

impl LaunchDistribution {
    fn ranges(&self) -> [(&'static str, [f64; 2]); 6] {
        [
            ("px", self.px),
            ("py", self.py),
            ("pz", self.pz),
            ("vx", self.vx),
            ("vy", self.vy),
            ("vz", self.vz),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, [lo, hi]) in self.ranges() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::domain(format!("launch range {name} = [{lo}, {hi}] is invalid")));
            }
        }
        Ok(())
    }

    /// Launch state made of the range midpoints, at t = 0.
    pub fn mean(&self) -> ShuttleState {
        let mid = |r: [f64; 2]| 0.5 * (r[0] + r[1]);
        ShuttleState::new(
            0.0,
            Vec3::new(mid(self.px), mid(self.py), mid(self.pz)),
            Vec3::new(mid(self.vx), mid(self.vy), mid(self.vz)),
        )
    }
}

/// Draw a launch state at t = 0, each component uniform in its range.
pub fn sample_launch<R: Rng + ?Sized>(dist: &LaunchDistribution, rng: &mut R) -> ShuttleState {
    let mut draw = |[lo, hi]: [f64; 2]| {
        if lo == hi {
            lo
        } else {
            rng.random_range(lo..=hi)
        }
    };
    let p = Vec3::new(draw(dist.px), draw(dist.py), draw(dist.pz));
    let v = Vec3::new(draw(dist.vx), draw(dist.vy), draw(dist.vz));
    ShuttleState::new(0.0, p, v)
}

pub fn sample_launch_seeded(dist: &LaunchDistribution, seed: u64) -> ShuttleState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_launch(dist, &mut rng)
}

/// Draw `n` launches and integrate each to the ground, keeping only the trajectory pool.
pub fn trajectory_pool(
    dist: &LaunchDistribution,
    params: &ShuttleParams,
    n: usize,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let launch = sample_launch(dist, &mut rng);
            simulate(&launch, params, DEFAULT_DT, StopCondition::ground())
        })
        .collect()
}
