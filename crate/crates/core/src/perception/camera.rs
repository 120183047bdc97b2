use nalgebra::{Rotation3, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vec3;

/// Angular slack on the FOV boundary so that points constructed exactly on the edge count as
/// visible despite rounding in the projection.
const FOV_EDGE_SLACK: f64 = 1e-12;

/// Time-invariant camera properties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraIntrinsics {
    /// Full horizontal field of view, rad.
    pub h_fov: f64,
    /// Full vertical field of view, rad.
    pub v_fov: f64,
    /// Hz
    pub frame_rate: f64,
    /// Shutter-to-availability delay range `[lo, hi]`, s.
    pub latency: [f64; 2],
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self {
            h_fov: 110f64.to_radians(),
            v_fov: 70f64.to_radians(),
            frame_rate: 60.0,
            latency: [0.06, 0.16],
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        let pi = std::f64::consts::PI;
        if !(self.h_fov > 0.0 && self.h_fov < pi) || !(self.v_fov > 0.0 && self.v_fov < pi) {
            return Err(Error::domain("field of view must lie in (0, pi)"));
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return Err(Error::domain("frame_rate must be > 0"));
        }
        let [lo, hi] = self.latency;
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::domain("latency range must satisfy 0 <= lo <= hi"));
        }
        Ok(())
    }
}

/// Camera position and world-to-camera rotation.
///
/// Camera axes: x along the optical axis, y to the left of the image, z up in the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub position: Vec3,
    pub orientation: UnitQuaternion<f64>,
}

impl CameraPose {
    pub fn new(position: Vec3, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation,
        }
    }

    /// Pose looking along `yaw` (about world z) and `pitch` (positive up).
    pub fn looking(position: Vec3, yaw: f64, pitch: f64) -> Self {
        Self::new(position, look_rotation(yaw, pitch))
    }

    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.orientation * (p - self.position)
    }

    /// Unit optical axis in the world frame.
    pub fn optical_axis(&self) -> Vec3 {
        self.orientation.inverse() * Vec3::x()
    }
}

/// World-to-camera rotation for an optical axis at the given yaw and pitch, zero roll.
pub fn look_rotation(yaw: f64, pitch: f64) -> UnitQuaternion<f64> {
    let cam_to_world = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), yaw)
        * UnitQuaternion::from_axis_angle(&Vec3::y_axis(), -pitch);
    cam_to_world.inverse()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub pose: CameraPose,
    pub intrinsics: CameraIntrinsics,
}

impl CameraModel {
    pub fn new(pose: CameraPose, intrinsics: CameraIntrinsics) -> Self {
        Self { pose, intrinsics }
    }

    /// True iff `p` is in front of the camera with azimuth and elevation inside the
    /// closed half-angle bounds. A point at the camera centre has no bearing and is not visible.
    pub fn in_fov(&self, p: &Vec3) -> bool {
        let q = self.pose.to_camera(p);
        if q.norm() == 0.0 || q.x <= 0.0 {
            return false;
        }
        let azimuth = q.y.atan2(q.x).abs();
        let elevation = q.z.atan2(q.x).abs();
        azimuth <= 0.5 * self.intrinsics.h_fov + FOV_EDGE_SLACK
            && elevation <= 0.5 * self.intrinsics.v_fov + FOV_EDGE_SLACK
    }
}

/// One sample of a scripted camera motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraSample {
    pub t: f64,
    pub position: Vec3,
    /// World-frame translational velocity, m/s.
    pub velocity: Vec3,
    /// World-to-camera rotation.
    pub orientation: UnitQuaternion<f64>,
    /// World-frame body angular velocity, rad/s.
    pub angular_velocity: Vec3,
}

impl CameraSample {
    pub fn pose(&self) -> CameraPose {
        CameraPose::new(self.position, self.orientation)
    }
}

/// Time-indexed camera motion with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraTrack {
    intrinsics: CameraIntrinsics,
    samples: Vec<CameraSample>,
}

impl CameraTrack {
    pub fn new(intrinsics: CameraIntrinsics, samples: Vec<CameraSample>) -> Result<Self> {
        intrinsics.validate()?;
        if samples.is_empty() {
            return Err(Error::domain("camera track needs at least one sample"));
        }
        if samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::domain("camera track timestamps must be strictly increasing"));
        }
        Ok(Self {
            intrinsics,
            samples,
        })
    }

    /// A camera that does not move over `[t0, t1]`.
    pub fn fixed(intrinsics: CameraIntrinsics, pose: CameraPose, t0: f64, t1: f64) -> Result<Self> {
        let sample = |t| CameraSample {
            t,
            position: pose.position,
            velocity: Vec3::zeros(),
            orientation: pose.orientation,
            angular_velocity: Vec3::zeros(),
        };
        let samples = if t1 > t0 {
            vec![sample(t0), sample(t1)]
        } else {
            vec![sample(t0)]
        };
        Self::new(intrinsics, samples)
    }

    /// Build a track from sampled poses; velocities are recovered by finite differences
    /// (forward difference on each interval, held on the last sample).
    pub fn from_poses(intrinsics: CameraIntrinsics, poses: &[(f64, CameraPose)]) -> Result<Self> {
        if poses.is_empty() {
            return Err(Error::domain("camera track needs at least one pose"));
        }
        let mut samples = Vec::with_capacity(poses.len());
        for (i, (t, pose)) in poses.iter().enumerate() {
            let (velocity, angular_velocity) = match poses.get(i + 1) {
                Some((t_next, next)) => {
                    let dt = t_next - t;
                    if !(dt > 0.0) {
                        return Err(Error::domain("camera pose timestamps must be strictly increasing"));
                    }
                    (
                        (next.position - pose.position) / dt,
                        world_rate(&pose.orientation, &next.orientation, dt),
                    )
                }
                None => match samples.last() {
                    Some(prev) => {
                        let prev: &CameraSample = prev;
                        (prev.velocity, prev.angular_velocity)
                    }
                    None => (Vec3::zeros(), Vec3::zeros()),
                },
            };
            samples.push(CameraSample {
                t: *t,
                position: pose.position,
                velocity,
                orientation: pose.orientation,
                angular_velocity,
            });
        }
        Self::new(intrinsics, samples)
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.intrinsics
    }

    pub fn samples(&self) -> &[CameraSample] {
        &self.samples
    }

    pub fn start_time(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end_time(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    /// Interpolated camera state; position is linear, orientation slerped.
    pub fn sample_at(&self, t: f64) -> Result<CameraSample> {
        let (t0, t1) = (self.start_time(), self.end_time());
        if !(t >= t0 - 1e-9 && t <= t1 + 1e-9) {
            return Err(Error::domain(format!(
                "time {t} outside camera track span [{t0}, {t1}]"
            )));
        }
        if self.samples.len() == 1 {
            return Ok(CameraSample { t, ..self.samples[0] });
        }
        let i = match self.samples.partition_point(|s| s.t <= t) {
            0 => 0,
            n => (n - 1).min(self.samples.len() - 2),
        };
        let (a, b) = (&self.samples[i], &self.samples[i + 1]);
        let s = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
        Ok(CameraSample {
            t,
            position: a.position.lerp(&b.position, s),
            velocity: a.velocity.lerp(&b.velocity, s),
            orientation: a.orientation.slerp(&b.orientation, s),
            angular_velocity: a.angular_velocity.lerp(&b.angular_velocity, s),
        })
    }

    pub fn model_at(&self, t: f64) -> Result<CameraModel> {
        Ok(CameraModel::new(self.sample_at(t)?.pose(), self.intrinsics))
    }

    /// Magnitude of the camera body rate at `t`.
    pub fn body_rate(&self, t: f64) -> Result<f64> {
        Ok(self.sample_at(t)?.angular_velocity.norm())
    }
}

/// World-frame angular velocity carrying camera orientation `a` to `b` in `dt`.
fn world_rate(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>, dt: f64) -> Vec3 {
    // orientations are world->camera; camera->world is the inverse
    let delta = b.inverse() * *a;
    let rot: Rotation3<f64> = delta.to_rotation_matrix();
    rot.scaled_axis() / dt
}

/// Angular rate of the target bearing as seen in the camera frame.
///
/// The bearing rotates in the world at `r x w / |r|^2` for relative position `r` and
/// relative velocity `w`; subtracting the camera body rate and keeping the component that
/// moves the bearing gives the apparent rate.
pub fn line_of_sight_rate(
    track: &CameraTrack,
    t: f64,
    p_target: &Vec3,
    v_target: &Vec3,
) -> Result<f64> {
    let cam = track.sample_at(t)?;
    let r = p_target - cam.position;
    let r2 = r.norm_squared();
    if r2 == 0.0 {
        return Err(Error::domain("target coincides with the camera"));
    }
    let w = v_target - cam.velocity;
    let bearing_rate = r.cross(&w) / r2;
    let u = r / r2.sqrt();
    Ok((bearing_rate - cam.angular_velocity).cross(&u).norm())
}
