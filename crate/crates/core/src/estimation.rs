//! Time-adaptive extended Kalman filter over shuttle position and velocity.
//!
//! State layout: `[px, py, pz, vx, vy, vz]`. The mean follows the drag model through RK4 on a
//! fixed global substep grid; the covariance is carried through the exact Jacobian of each
//! RK4 step, with white-acceleration process noise accumulated per substep so the injected
//! noise scales with the elapsed prediction interval.

use nalgebra::{Matrix3, SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{acceleration, rk4_unchecked, ShuttleParams, ShuttleState, DEFAULT_DT};
use crate::error::{Error, Result};
use crate::perception::Measurement;
use crate::Vec3;

pub type Vector6 = SVector<f64, 6>;
pub type Matrix6 = SMatrix<f64, 6, 6>;
type Matrix6x3 = SMatrix<f64, 6, 3>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EkfConfig {
    /// White acceleration noise std per axis, m/s²·√s.
    pub process_noise_std: f64,
    /// Per-axis position measurement std, m.
    pub measurement_noise_std: f64,
    /// A measurement later than this after the previous one restarts the filter, s.
    pub reset_gap: f64,
    pub init_pos_std: f64,
    pub init_vel_std: f64,
    /// Propagation substep, s.
    pub substep: f64,
    /// Prefer the std attached to a measurement over `measurement_noise_std`.
    pub use_measurement_std: bool,
}

impl Default for EkfConfig {
    fn default() -> Self {
        Self {
            process_noise_std: 2e-3,
            measurement_noise_std: 4e-2,
            reset_gap: 0.2,
            init_pos_std: 4e-2,
            init_vel_std: 10.0,
            substep: DEFAULT_DT,
            use_measurement_std: true,
        }
    }
}

impl EkfConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("process_noise_std", self.process_noise_std),
            ("measurement_noise_std", self.measurement_noise_std),
            ("reset_gap", self.reset_gap),
            ("init_pos_std", self.init_pos_std),
            ("init_vel_std", self.init_vel_std),
            ("substep", self.substep),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    fn initial_cov(&self) -> Matrix6 {
        let p = self.init_pos_std.powi(2);
        let v = self.init_vel_std.powi(2);
        Matrix6::from_diagonal(&Vector6::new(p, p, p, v, v, v))
    }

    /// Discretised white-acceleration noise over an interval `h`.
    pub fn process_noise(&self, h: f64) -> Matrix6 {
        let q = self.process_noise_std.powi(2);
        let mut out = Matrix6::zeros();
        for i in 0..3 {
            out[(i, i)] = q * h.powi(3) / 3.0;
            out[(i, i + 3)] = q * h.powi(2) / 2.0;
            out[(i + 3, i)] = q * h.powi(2) / 2.0;
            out[(i + 3, i + 3)] = q * h;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EkfState {
    pub t: f64,
    pub mean: Vector6,
    pub cov: Matrix6,
    pub initialized: bool,
    pub t_last_meas: f64,
}

impl Default for EkfState {
    fn default() -> Self {
        Self::uninitialized()
    }
}

/// What [`ekf_ingest_traced`] did with a measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IngestKind {
    Initialized,
    Reset,
    Updated,
}

impl EkfState {
    pub fn uninitialized() -> Self {
        Self {
            t: 0.0,
            mean: Vector6::zeros(),
            cov: Matrix6::identity(),
            initialized: false,
            t_last_meas: f64::NEG_INFINITY,
        }
    }

    /// Filter started from a known Gaussian prior.
    pub fn from_prior(t: f64, mean: Vector6, cov: Matrix6) -> Self {
        Self {
            t,
            mean,
            cov,
            initialized: true,
            t_last_meas: t,
        }
    }

    pub fn position(&self) -> Vec3 {
        self.mean.fixed_rows::<3>(0).into_owned()
    }

    pub fn velocity(&self) -> Vec3 {
        self.mean.fixed_rows::<3>(3).into_owned()
    }

    pub fn as_shuttle_state(&self) -> ShuttleState {
        ShuttleState::new(self.t, self.position(), self.velocity())
    }

    pub fn snapshot(&self) -> EkfSnapshot {
        EkfSnapshot {
            t: self.t,
            mean: self.mean.iter().copied().collect(),
            cov: (0..6)
                .flat_map(|i| (0..6).map(move |j| (i, j)))
                .map(|(i, j)| self.cov[(i, j)])
                .collect(),
            t_last_meas: self.initialized.then_some(self.t_last_meas),
            initialized: self.initialized,
        }
    }

    /// Symmetric within 1e-9 and Cholesky-factorisable.
    pub fn cov_is_spd(&self) -> bool {
        let asym = (self.cov - self.cov.transpose()).amax();
        asym <= 1e-9 && self.cov.cholesky().is_some()
    }
}

/// JSON-friendly filter snapshot; covariance is row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EkfSnapshot {
    pub t: f64,
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
    pub t_last_meas: Option<f64>,
    pub initialized: bool,
}

/// `d(acceleration)/dv = -(|v| I + v v^T / |v|) / L`, zero at rest.
pub fn drag_jacobian(v: &Vec3, params: &ShuttleParams) -> Matrix3<f64> {
    let speed = v.norm();
    if speed == 0.0 || params.aero_length.is_infinite() {
        return Matrix3::zeros();
    }
    -(Matrix3::identity() * speed + v * v.transpose() / speed) / params.aero_length
}

fn state_jacobian(v: &Vec3, params: &ShuttleParams) -> Matrix6 {
    let mut f = Matrix6::zeros();
    f.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
    f.fixed_view_mut::<3, 3>(3, 3).copy_from(&drag_jacobian(v, params));
    f
}

/// Jacobian of one RK4 step with respect to the starting state.
pub fn rk4_step_jacobian(v: &Vec3, params: &ShuttleParams, h: f64) -> Matrix6 {
    let half = 0.5 * h;
    let id = Matrix6::identity();

    let j1 = state_jacobian(v, params);
    let k1v = acceleration(v, params);
    let v2 = v + k1v * half;
    let j2 = state_jacobian(&v2, params) * (id + j1 * half);
    let k2v = acceleration(&v2, params);
    let v3 = v + k2v * half;
    let j3 = state_jacobian(&v3, params) * (id + j2 * half);
    let k3v = acceleration(&v3, params);
    let v4 = v + k3v * h;
    let j4 = state_jacobian(&v4, params) * (id + j3 * h);

    id + (j1 + j2 * 2.0 + j3 * 2.0 + j4) * (h / 6.0)
}

fn symmetrize(m: &Matrix6) -> Matrix6 {
    (m + m.transpose()) * 0.5
}

/// Propagate the filter to `t_new`.
///
/// Substep boundaries sit on the global grid `k * cfg.substep`, so splitting a prediction
/// at a grid point gives the same mean as predicting in one go.
pub fn ekf_predict(
    ekf: &EkfState,
    params: &ShuttleParams,
    t_new: f64,
    cfg: &EkfConfig,
) -> Result<EkfState> {
    if !ekf.initialized {
        return Err(Error::domain("cannot predict an uninitialised filter"));
    }
    if !t_new.is_finite() || t_new < ekf.t {
        return Err(Error::Ordering {
            current: ekf.t,
            requested: t_new,
        });
    }
    let h = cfg.substep;
    let mut out = ekf.clone();
    let mut state = ekf.as_shuttle_state();
    let mut t = ekf.t;
    while t_new - t > 1e-12 {
        let mut next = ((t / h).floor() + 1.0) * h;
        if next - t <= 1e-12 {
            next += h;
        }
        let end = next.min(t_new);
        let dt = end - t;
        let phi = rk4_step_jacobian(&state.v, params, dt);
        state = rk4_unchecked(&state, params, dt);
        out.cov = phi * out.cov * phi.transpose() + cfg.process_noise(dt);
        t = end;
    }
    out.t = t_new;
    out.mean = Vector6::new(state.p.x, state.p.y, state.p.z, state.v.x, state.v.y, state.v.z);
    out.cov = symmetrize(&out.cov);
    Ok(out)
}

/// Position-measurement update, Joseph form.
pub fn ekf_update(ekf: &EkfState, meas: &Measurement, cfg: &EkfConfig) -> Result<EkfState> {
    if !meas.p.iter().all(|x| x.is_finite()) || !meas.t_capture.is_finite() {
        return Err(Error::Rejected("non-finite measurement".into()));
    }
    if !ekf.initialized {
        return Err(Error::domain("cannot update an uninitialised filter"));
    }
    if (ekf.t - meas.t_capture).abs() > 1e-9 {
        return Err(Error::Ordering {
            current: ekf.t,
            requested: meas.t_capture,
        });
    }
    let std = match meas.noise_std {
        Some(s) if cfg.use_measurement_std && s > 0.0 && s.is_finite() => s,
        _ => cfg.measurement_noise_std,
    };
    let r = Matrix3::identity() * std * std;

    let p_hx: Matrix6x3 = ekf.cov.fixed_view::<6, 3>(0, 0).into_owned();
    let s = ekf.cov.fixed_view::<3, 3>(0, 0).into_owned() + r;
    let s_inv = s
        .cholesky()
        .ok_or_else(|| Error::Rejected("innovation covariance is not positive definite".into()))?
        .inverse();
    let gain = p_hx * s_inv;
    let innovation = meas.p - ekf.position();

    let mut i_kh = Matrix6::identity();
    let mut block = i_kh.fixed_view_mut::<6, 3>(0, 0);
    block -= &gain;

    let mut out = ekf.clone();
    out.mean += gain * innovation;
    out.cov = symmetrize(&(i_kh * ekf.cov * i_kh.transpose() + gain * r * gain.transpose()));
    out.t_last_meas = meas.t_capture;
    Ok(out)
}

pub fn ekf_ingest(
    ekf: &EkfState,
    meas: &Measurement,
    params: &ShuttleParams,
    cfg: &EkfConfig,
) -> Result<EkfState> {
    ekf_ingest_traced(ekf, meas, params, cfg).map(|(s, _)| s)
}

/// Initialise, reset after a gap longer than `reset_gap`, or predict and update.
///
/// (Re)initialisation puts the mean on the measurement at rest; the large initial velocity
/// std lets the next few updates pull the velocity in.
pub fn ekf_ingest_traced(
    ekf: &EkfState,
    meas: &Measurement,
    params: &ShuttleParams,
    cfg: &EkfConfig,
) -> Result<(EkfState, IngestKind)> {
    if !meas.p.iter().all(|x| x.is_finite()) || !meas.t_capture.is_finite() {
        return Err(Error::Rejected("non-finite measurement".into()));
    }
    let gap = meas.t_capture - ekf.t_last_meas;
    if ekf.initialized && gap <= cfg.reset_gap {
        let predicted = ekf_predict(ekf, params, meas.t_capture, cfg)?;
        return Ok((ekf_update(&predicted, meas, cfg)?, IngestKind::Updated));
    }

    let kind = if ekf.initialized {
        IngestKind::Reset
    } else {
        IngestKind::Initialized
    };
    let state = EkfState {
        t: meas.t_capture,
        mean: Vector6::new(meas.p.x, meas.p.y, meas.p.z, 0.0, 0.0, 0.0),
        cov: cfg.initial_cov(),
        initialized: true,
        t_last_meas: meas.t_capture,
    };
    Ok((state, kind))
}

/// Normalised estimation error squared of the filter mean against the true state.
pub fn nees(ekf: &EkfState, truth: &ShuttleState) -> Result<f64> {
    let truth_vec = Vector6::new(truth.p.x, truth.p.y, truth.p.z, truth.v.x, truth.v.y, truth.v.z);
    let e = ekf.mean - truth_vec;
    let chol = ekf
        .cov
        .cholesky()
        .ok_or_else(|| Error::domain("covariance is not positive definite"))?;
    Ok(e.dot(&chol.solve(&e)))
}
