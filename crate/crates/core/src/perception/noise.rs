use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::camera::{line_of_sight_rate, CameraTrack};
use crate::dynamics::ShuttleState;
use crate::error::{Error, Result};
use crate::Vec3;

/// Lower bound on the evaluated measurement standard deviation, m.
pub const DEFAULT_STD_FLOOR: f64 = 1e-4;

/// `intercept + per_distance * d + per_angvel * w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearCoeffs {
    pub intercept: f64,
    pub per_distance: f64,
    pub per_angvel: f64,
}

impl LinearCoeffs {
    pub fn new(intercept: f64, per_distance: f64, per_angvel: f64) -> Self {
        Self {
            intercept,
            per_distance,
            per_angvel,
        }
    }

    pub fn eval(&self, distance: f64, ang_rate: f64) -> f64 {
        self.intercept + self.per_distance * distance + self.per_angvel * ang_rate
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.intercept, self.per_distance, self.per_angvel]
    }
}

/// Linear detection-probability and noise-magnitude model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub detect: LinearCoeffs,
    pub noise_std: LinearCoeffs,
    #[serde(default = "default_std_floor")]
    pub std_floor: f64,
    /// Noise std along the camera-to-shuttle ray relative to the lateral std; 1 is isotropic.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub range_factor: f64,
}

fn default_std_floor() -> f64 {
    DEFAULT_STD_FLOOR
}

fn one() -> f64 {
    1.0
}

fn is_one(x: &f64) -> bool {
    *x == 1.0
}

impl Default for NoiseModel {
    /// Placeholder coefficients; they only keep the clamps meaningful over a court-sized range.
    fn default() -> Self {
        Self {
            detect: LinearCoeffs::new(1.05, -0.03, -0.05),
            noise_std: LinearCoeffs::new(0.02, 0.004, 0.01),
            std_floor: DEFAULT_STD_FLOOR,
            range_factor: 1.0,
        }
    }
}

impl NoiseModel {
    /// Always detects, with the noise clamped to the floor.
    pub fn perfect() -> Self {
        Self {
            detect: LinearCoeffs::new(1.0, 0.0, 0.0),
            noise_std: LinearCoeffs::new(0.0, 0.0, 0.0),
            std_floor: DEFAULT_STD_FLOOR,
            range_factor: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = self
            .detect
            .as_array()
            .into_iter()
            .chain(self.noise_std.as_array());
        if all.into_iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("noise model coefficients must be finite"));
        }
        if !(self.std_floor > 0.0) {
            return Err(Error::domain("std_floor must be > 0"));
        }
        if !(self.range_factor > 0.0 && self.range_factor.is_finite()) {
            return Err(Error::domain("range_factor must be > 0"));
        }
        Ok(())
    }
}

pub fn detection_probability(nm: &NoiseModel, distance: f64, ang_rate: f64, visible: bool) -> f64 {
    if !visible {
        return 0.0;
    }
    let p = nm.detect.eval(distance, ang_rate);
    if p.is_nan() {
        0.0
    } else {
        p.clamp(0.0, 1.0)
    }
}

pub fn measurement_std(nm: &NoiseModel, distance: f64, ang_rate: f64) -> f64 {
    let s = nm.noise_std.eval(distance, ang_rate);
    if s.is_nan() {
        nm.std_floor
    } else {
        s.max(nm.std_floor)
    }
}

/// Which angular velocity feeds the noise model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateSource {
    /// Apparent rate of the shuttle bearing in the camera frame.
    #[default]
    LineOfSight,
    /// Magnitude of the camera body rate.
    BodyRate,
}

/// A detected shuttle position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub t_capture: f64,
    pub t_available: f64,
    pub p: Vec3,
    /// Per-axis standard deviation the perception model assigned to this detection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_std: Option<f64>,
}

impl Measurement {
    pub fn new(t_capture: f64, t_available: f64, p: Vec3) -> Self {
        Self {
            t_capture,
            t_available,
            p,
            noise_std: None,
        }
    }

    pub fn with_std(mut self, std: f64) -> Self {
        self.noise_std = Some(std);
        self
    }
}

/// Everything the perception model evaluated for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub visible: bool,
    pub distance: f64,
    pub ang_rate: f64,
    pub p_detect: f64,
    pub std: f64,
    pub measurement: Option<Measurement>,
}

/// Simulate one camera frame of the shuttle at `truth.t`.
///
/// Every call consumes the same five draws from `rng` (detection uniform, three normals,
/// latency uniform) whatever the outcome, so paired runs sharing a seed stay aligned frame
/// by frame.
pub fn observe_detailed<R: Rng + ?Sized>(
    track: &CameraTrack,
    truth: &ShuttleState,
    nm: &NoiseModel,
    rate_source: RateSource,
    rng: &mut R,
) -> Result<Observation> {
    let u_detect: f64 = rng.random();
    let noise = Vec3::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    );
    let u_latency: f64 = rng.random();

    let cam = track.model_at(truth.t)?;
    let distance = (truth.p - cam.pose.position).norm();
    let visible = cam.in_fov(&truth.p);
    let ang_rate = match rate_source {
        RateSource::LineOfSight if distance > 0.0 => {
            line_of_sight_rate(track, truth.t, &truth.p, &truth.v)?
        }
        RateSource::LineOfSight => 0.0,
        RateSource::BodyRate => track.body_rate(truth.t)?,
    };
    let p_detect = detection_probability(nm, distance, ang_rate, visible);
    let std = measurement_std(nm, distance, ang_rate);

    let noise = if nm.range_factor != 1.0 && distance > 0.0 {
        let ray = (truth.p - cam.pose.position) / distance;
        noise + ray * ((nm.range_factor - 1.0) * noise.dot(&ray))
    } else {
        noise
    };
    let measurement = (u_detect < p_detect).then(|| {
        let [lo, hi] = track.intrinsics().latency;
        let latency = lo + (hi - lo) * u_latency;
        Measurement {
            t_capture: truth.t,
            t_available: truth.t + latency,
            p: truth.p + noise * std,
            noise_std: Some(std),
        }
    });

    Ok(Observation {
        visible,
        distance,
        ang_rate,
        p_detect,
        std,
        measurement,
    })
}

pub fn observe<R: Rng + ?Sized>(
    track: &CameraTrack,
    truth: &ShuttleState,
    nm: &NoiseModel,
    rate_source: RateSource,
    rng: &mut R,
) -> Result<Option<Measurement>> {
    observe_detailed(track, truth, nm, rate_source, rng).map(|o| o.measurement)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::{CameraIntrinsics, CameraPose};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn track() -> CameraTrack {
        CameraTrack::fixed(
            CameraIntrinsics::default(),
            CameraPose::looking(Vec3::zeros(), 0.0, 0.0),
            0.0,
            10.0,
        )
        .unwrap()
    }

    #[test]
    fn invisible_never_detects() {
        assert_eq!(detection_probability(&NoiseModel::default(), 1.0, 0.0, false), 0.0);
    }

    #[test]
    fn flat_model_always_detects() {
        let nm = NoiseModel {
            detect: LinearCoeffs::new(1.0, 0.0, 0.0),
            ..NoiseModel::default()
        };
        for d in [0.0, 3.0, 100.0] {
            assert_eq!(detection_probability(&nm, d, 5.0, true), 1.0);
        }
    }

    #[test]
    fn linear_detection_value() {
        let nm = NoiseModel {
            detect: LinearCoeffs::new(1.0, -0.05, -0.1),
            ..NoiseModel::default()
        };
        assert_abs_diff_eq!(detection_probability(&nm, 4.0, 2.0, true), 0.6, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn outputs_respect_clamps(
            a in -5.0f64..5.0, b in -1.0f64..1.0, c in -1.0f64..1.0,
            d in 0.0f64..50.0, w in 0.0f64..20.0, vis: bool,
        ) {
            let nm = NoiseModel {
                detect: LinearCoeffs::new(a, b, c),
                noise_std: LinearCoeffs::new(a, b, c),
                std_floor: DEFAULT_STD_FLOOR,
                range_factor: 1.0,
            };
            let p = detection_probability(&nm, d, w, vis);
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!(measurement_std(&nm, d, w) >= DEFAULT_STD_FLOOR);
        }

        #[test]
        fn out_of_view_never_measured(seed: u64, px in -10.0f64..-0.1, py in -5.0f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let truth = ShuttleState::new(1.0, Vec3::new(px, py, 1.0), Vec3::zeros());
            let m = observe(&track(), &truth, &NoiseModel::perfect(), RateSource::LineOfSight, &mut rng).unwrap();
            prop_assert!(m.is_none());
        }
    }

    #[test]
    fn range_factor_stretches_noise_along_the_ray() {
        let flat = NoiseModel {
            detect: LinearCoeffs::new(1.0, 0.0, 0.0),
            noise_std: LinearCoeffs::new(0.05, 0.0, 0.0),
            ..NoiseModel::default()
        };
        let stretched = NoiseModel { range_factor: 4.0, ..flat };
        let truth = ShuttleState::new(1.0, Vec3::new(5.0, 0.0, 0.0), Vec3::zeros());
        let (mut iso, mut aniso) = (Vec3::zeros(), Vec3::zeros());
        for seed in 0..2000 {
            let a = observe(&track(), &truth, &flat, RateSource::BodyRate, &mut ChaCha8Rng::seed_from_u64(seed));
            let b = observe(&track(), &truth, &stretched, RateSource::BodyRate, &mut ChaCha8Rng::seed_from_u64(seed));
            let (a, b) = (a.unwrap().unwrap().p - truth.p, b.unwrap().unwrap().p - truth.p);
            // camera looks along +x, so only the x component is scaled
            assert_abs_diff_eq!(b.x, 4.0 * a.x, epsilon = 1e-12);
            assert_abs_diff_eq!(b.y, a.y, epsilon = 1e-12);
            iso += a.component_mul(&a);
            aniso += b.component_mul(&b);
        }
        assert!(aniso.x / iso.x > 15.0);
        assert!(NoiseModel { range_factor: 0.0, ..flat }.validate().is_err());
        assert!(!serde_json::to_string(&flat).unwrap().contains("range_factor"));
    }

    #[test]
    fn perfect_model_returns_truth_with_latency() {
        let nm = NoiseModel {
            std_floor: 1e-300,
            ..NoiseModel::perfect()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let truth = ShuttleState::new(2.0, Vec3::new(5.0, 0.3, 0.2), Vec3::new(-3.0, 0.0, 1.0));
        for _ in 0..200 {
            let m = observe(&track(), &truth, &nm, RateSource::LineOfSight, &mut rng)
                .unwrap()
                .unwrap();
            assert!((m.p - truth.p).norm() < 1e-12);
            let latency = m.t_available - m.t_capture;
            assert!((0.06..=0.16).contains(&latency));
            assert_eq!(m.t_capture, 2.0);
        }
    }

    #[test]
    fn empirical_detection_rate_matches_model() {
        let nm = NoiseModel::default();
        let truth = ShuttleState::new(1.0, Vec3::new(6.0, 1.0, 0.5), Vec3::new(-10.0, 2.0, 3.0));
        let obs = observe_detailed(&track(), &truth, &nm, RateSource::LineOfSight, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let p = obs.p_detect;
        assert!(p > 0.2 && p < 0.95, "p = {p}");
        let n = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let hits = (0..n)
            .filter(|_| {
                observe(&track(), &truth, &nm, RateSource::LineOfSight, &mut rng)
                    .unwrap()
                    .is_some()
            })
            .count();
        let rate = hits as f64 / n as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((rate - p).abs() < 3.0 * sigma, "rate {rate} vs {p}");
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let truth = ShuttleState::new(1.0, Vec3::new(6.0, 1.0, 0.5), Vec3::new(-10.0, 2.0, 3.0));
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| observe(&track(), &truth, &NoiseModel::default(), RateSource::LineOfSight, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
    }

    #[test]
    fn body_rate_source_uses_camera_spin() {
        let truth = ShuttleState::new(1.0, Vec3::new(6.0, 0.0, 0.5), Vec3::new(-10.0, 0.0, 0.0));
        let obs = observe_detailed(&track(), &truth, &NoiseModel::default(), RateSource::BodyRate, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(obs.ang_rate, 0.0);
        let los = observe_detailed(&track(), &truth, &NoiseModel::default(), RateSource::LineOfSight, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(los.ang_rate > 0.0);
    }

    #[test]
    fn noise_model_json_keys() {
        let json = r#"{"detect":{"intercept":1.0,"per_distance":-0.02,"per_angvel":-0.1},
                       "noise_std":{"intercept":0.01,"per_distance":0.002,"per_angvel":0.02}}"#;
        let nm: NoiseModel = serde_json::from_str(json).unwrap();
        assert_eq!(nm.detect.per_angvel, -0.1);
        assert_eq!(nm.std_floor, DEFAULT_STD_FLOOR);
        let bad = r#"{"detect":{"intercept":1.0,"per_distance":-0.02},"noise_std":{"intercept":0.01,"per_distance":0.002,"per_angvel":0.02}}"#;
        assert!(serde_json::from_str::<NoiseModel>(bad).is_err());
    }
}
