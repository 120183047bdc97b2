use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{sample_launch, simulate, ShuttleParams, ShuttleState, StopCondition, Trajectory};
use crate::error::{Error, Result};
use crate::estimation::{ekf_ingest_traced, ekf_predict, EkfSnapshot, EkfState, IngestKind};
use crate::perception::{observe_detailed, CameraPose, CameraTrack, Measurement};
use crate::prediction::{
    predict_interception_with, qualify_trajectory, target_persistence_with, CourtGeometry,
    InterceptionTarget, RolloutOptions,
};
use crate::Vec3;

use super::config::{CameraScript, LaunchMode, ScenarioConfig, SCHEMA_VERSION};

/// Per-episode random stream: the config seed picks the key, the episode index the stream.
pub fn episode_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Which episode to run and where its landing point is moved.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpisodeSpec {
    pub index: u64,
    /// Landing offset in the court plane, m.
    pub offset: [f64; 2],
    pub cell: Option<[usize; 2]>,
    pub full_logs: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeliveredMeasurement {
    #[serde(flatten)]
    pub measurement: Measurement,
    /// When the filter consumed it; never before `t_available`.
    pub t_delivered: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeLogs {
    pub measurements: Vec<DeliveredMeasurement>,
    pub snapshots: Vec<EkfSnapshot>,
    pub targets: Vec<InterceptionTarget>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub schema_version: u32,
    pub seed: u64,
    pub index: u64,
    pub camera: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<[usize; 2]>,
    pub offset: [f64; 2],
    pub region: Option<String>,
    /// Commanded swing height above the base, m.
    pub swing_height: f64,
    pub launch: ShuttleState,
    pub landing: [f64; 3],
    /// Ground-truth flight passes the two-rectangle test.
    pub qualified: bool,
    /// True descending crossing of the swing height.
    pub t_swing: Option<f64>,
    pub true_intercept: Option<Vec3>,
    /// Filter estimate at `t_swing` from measurements delivered by then.
    pub est_at_swing: Option<Vec3>,
    pub epsilon: Option<f64>,
    pub target_at_swing: Option<InterceptionTarget>,
    pub target_error: Option<f64>,
    pub registration_delay: Option<f64>,
    pub frames: usize,
    pub visible_frames: usize,
    pub measurements: usize,
    pub resets: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logs: Option<EpisodeLogs>,
}

impl EpisodeRecord {
    /// Placeholder record, for assembling synthetic records.
    pub fn empty() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            index: 0,
            camera: String::new(),
            cell: None,
            offset: [0.0; 2],
            region: None,
            swing_height: 0.0,
            launch: ShuttleState::new(0.0, Vec3::zeros(), Vec3::zeros()),
            landing: [0.0; 3],
            qualified: false,
            t_swing: None,
            true_intercept: None,
            est_at_swing: None,
            epsilon: None,
            target_at_swing: None,
            target_error: None,
            registration_delay: None,
            frames: 0,
            visible_frames: 0,
            measurements: 0,
            resets: 0,
            logs: None,
        }
    }
}

/// Camera motion over the span of `truth`.
pub fn build_camera_track(cfg: &ScenarioConfig, truth: &Trajectory) -> Result<CameraTrack> {
    let intr = cfg.intrinsics;
    let (t0, t1) = (truth.start_time(), truth.end_time().max(truth.start_time() + cfg.sim_dt));
    let pos = Vec3::from(cfg.camera.position());
    match &cfg.camera {
        CameraScript::Fixed { yaw_deg, pitch_deg, .. } => CameraTrack::fixed(
            intr,
            CameraPose::looking(pos, yaw_deg.to_radians(), pitch_deg.to_radians()),
            t0,
            t1,
        ),
        CameraScript::Tracking { max_rate, .. } => {
            let aim = |p: &Vec3| {
                let d = p - pos;
                (d.y.atan2(d.x), d.z.atan2(d.x.hypot(d.y)))
            };
            let (mut yaw, mut pitch) = aim(&truth.first().p);
            let mut poses = Vec::with_capacity(truth.len() + 1);
            poses.push((t0, CameraPose::looking(pos, yaw, pitch)));
            for w in truth.states().windows(2) {
                let dt = w[1].t - w[0].t;
                let (yaw_d, pitch_d) = aim(&w[1].p);
                let dyaw = wrap_angle(yaw_d - yaw);
                let dpitch = pitch_d - pitch;
                let step = (dyaw * pitch.cos()).hypot(dpitch);
                let limit = max_rate * dt;
                let k = if step > limit { limit / step } else { 1.0 };
                yaw = wrap_angle(yaw + k * dyaw);
                pitch += k * dpitch;
                poses.push((w[1].t, CameraPose::looking(pos, yaw, pitch)));
            }
            if poses.len() == 1 {
                poses.push((t1, poses[0].1));
            }
            CameraTrack::from_poses(intr, &poses)
        }
        CameraScript::PitchProfile { yaw_deg, keyframes, .. } => {
            let yaw = yaw_deg.to_radians();
            let mut poses: Vec<(f64, CameraPose)> = truth
                .states()
                .iter()
                .map(|s| {
                    let pitch = interpolate_keyframes(keyframes, s.t - t0).to_radians();
                    (s.t, CameraPose::looking(pos, yaw, pitch))
                })
                .collect();
            if poses.len() == 1 {
                let pitch = interpolate_keyframes(keyframes, t1 - t0).to_radians();
                poses.push((t1, CameraPose::looking(pos, yaw, pitch)));
            }
            CameraTrack::from_poses(intr, &poses)
        }
    }
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    a - two_pi * ((a + std::f64::consts::PI) / two_pi).floor()
}

fn interpolate_keyframes(keys: &[[f64; 2]], t: f64) -> f64 {
    let first = keys[0];
    let last = keys[keys.len() - 1];
    if t <= first[0] {
        return first[1];
    }
    if t >= last[0] {
        return last[1];
    }
    let i = keys.partition_point(|k| k[0] <= t);
    let (a, b) = (keys[i - 1], keys[i]);
    a[1] + (b[1] - a[1]) * (t - a[0]) / (b[0] - a[0])
}

/// Qualified interception target from the current estimate, if any.
fn fresh_target(
    cfg: &ScenarioConfig,
    ekf: &EkfState,
    swing_height: f64,
    now: f64,
    court: &CourtGeometry,
) -> Option<InterceptionTarget> {
    let opts = RolloutOptions {
        dt: cfg.sim_dt,
        horizon: cfg.prediction_horizon,
        ground_height: court.ground_height,
    };
    let target =
        predict_interception_with(ekf, &cfg.shuttle, swing_height, cfg.base_height, now, &opts).ok()?;
    if cfg.require_qualification {
        let stop = StopCondition::BelowHeight {
            z: court.ground_height - 0.1,
            max_t: cfg.prediction_horizon,
        };
        let rollout = simulate(&ekf.as_shuttle_state(), &cfg.shuttle, cfg.sim_dt, stop).ok()?;
        if !qualify_trajectory(&rollout, court) {
            return None;
        }
    }
    Some(target)
}

/// One closed-loop perception → filter → prediction episode.
///
/// Camera frames are captured at the frame rate; detections reach the filter through a
/// first-in first-out pipeline, at `max(t_available, previous delivery)`. The perception
/// error is taken at the true swing-height crossing from measurements delivered by then.
pub fn run_episode(cfg: &ScenarioConfig, spec: &EpisodeSpec) -> Result<EpisodeRecord> {
    let mut rng = episode_rng(cfg.seed, spec.index);
    let base = match cfg.launch_mode {
        LaunchMode::Nominal => cfg.launch.mean(),
        LaunchMode::Sampled => sample_launch(&cfg.launch, &mut rng),
    };
    let [lo, hi] = cfg.swing_height;
    let swing_height = lo + (hi - lo) * rng.random::<f64>();
    let flight = match cfg.aero_length_range {
        Some([lo, hi]) => ShuttleParams {
            aero_length: lo + (hi - lo) * rng.random::<f64>(),
            ..cfg.shuttle
        },
        None => cfg.shuttle,
    };
    let launch = base.translated(Vec3::new(spec.offset[0], spec.offset[1], 0.0));

    let court = cfg.court_in_sim_frame();
    let truth = simulate(&launch, &flight, cfg.sim_dt, StopCondition::ground())?;
    let landing = truth
        .descending_crossing(court.ground_height)
        .map(|s| s.p)
        .unwrap_or(truth.last().p);
    let crossing = truth.descending_crossing(cfg.base_height + swing_height);
    let track = build_camera_track(cfg, &truth)?;

    // capture
    let mut frames = 0;
    let mut visible_frames = 0;
    let mut queue: Vec<DeliveredMeasurement> = Vec::new();
    let mut last_delivery = f64::NEG_INFINITY;
    let period = 1.0 / cfg.intrinsics.frame_rate;
    let t0 = truth.start_time();
    for k in 0.. {
        let t = t0 + k as f64 * period;
        if t > truth.end_time() + 1e-12 {
            break;
        }
        let obs = observe_detailed(&track, &truth.state_at(t), &cfg.noise, cfg.rate_source, &mut rng)?;
        frames += 1;
        visible_frames += usize::from(obs.visible);
        if let Some(m) = obs.measurement {
            let t_delivered = m.t_available.max(last_delivery);
            last_delivery = t_delivered;
            queue.push(DeliveredMeasurement {
                measurement: m,
                t_delivered,
            });
        }
    }

    // filter and predict in delivery order
    let t_swing = crossing.map(|c| c.t);
    let mut logs = EpisodeLogs::default();
    let mut ekf = EkfState::uninitialized();
    let mut since_init = 0usize;
    let mut resets = 0;
    let mut held: Option<InterceptionTarget> = None;
    let mut registration_delay = None;
    let mut at_swing: Option<(Option<EkfState>, Option<InterceptionTarget>)> = None;

    let freeze = |ekf: &EkfState, held: Option<InterceptionTarget>, t: f64| -> Result<_> {
        let est = if ekf.initialized {
            Some(ekf_predict(ekf, &cfg.shuttle, t, &cfg.ekf)?)
        } else {
            None
        };
        Ok((est, target_persistence_with(held, t, None, cfg.target_hold)))
    };

    for item in &queue {
        if let Some(ts) = t_swing {
            if at_swing.is_none() && item.t_delivered > ts {
                at_swing = Some(freeze(&ekf, held, ts)?);
            }
        }
        let (next, kind) = match ekf_ingest_traced(&ekf, &item.measurement, &cfg.shuttle, &cfg.ekf) {
            Ok(r) => r,
            Err(Error::Rejected(_)) => continue,
            Err(e) => return Err(e),
        };
        ekf = next;
        match kind {
            IngestKind::Updated => since_init += 1,
            IngestKind::Reset => {
                resets += 1;
                since_init = 0;
            }
            IngestKind::Initialized => since_init = 0,
        }
        let now = item.t_delivered;
        let fresh = if since_init >= cfg.target_warmup {
            fresh_target(cfg, &ekf, swing_height, now, &court)
        } else {
            None
        };
        if let Some(f) = fresh {
            registration_delay.get_or_insert(f.created_at - launch.t);
            if spec.full_logs {
                logs.targets.push(f);
            }
        }
        held = target_persistence_with(held, now, fresh, cfg.target_hold);
        if spec.full_logs {
            logs.measurements.push(*item);
            logs.snapshots.push(ekf.snapshot());
        }
    }
    if let (Some(ts), None) = (t_swing, &at_swing) {
        at_swing = Some(freeze(&ekf, held, ts)?);
    }

    let (est, target_at_swing) = at_swing.unwrap_or((None, None));
    let true_intercept = crossing.map(|c| c.p);
    let est_at_swing = est.map(|e| e.position());
    let epsilon = match (true_intercept, est_at_swing) {
        (Some(p), Some(e)) => Some((p - e).norm()),
        _ => None,
    };
    let target_error = match (true_intercept, target_at_swing) {
        (Some(p), Some(t)) => Some((p - t.p).norm()),
        _ => None,
    };

    Ok(EpisodeRecord {
        schema_version: SCHEMA_VERSION,
        seed: cfg.seed,
        index: spec.index,
        camera: cfg.camera.name().to_string(),
        cell: spec.cell,
        offset: spec.offset,
        region: cfg.sweep.region_of(landing.x, landing.y),
        swing_height,
        launch,
        landing: landing.into(),
        qualified: qualify_trajectory(&truth, &court),
        t_swing,
        true_intercept,
        est_at_swing,
        epsilon,
        target_at_swing,
        target_error,
        registration_delay,
        frames,
        visible_frames,
        measurements: queue.len(),
        resets,
        logs: spec.full_logs.then_some(logs),
    })
}
