use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{LaunchDistribution, ShuttleParams, DEFAULT_DT};
use crate::error::{Error, Result};
use crate::estimation::EkfConfig;
use crate::perception::{CameraIntrinsics, NoiseModel, RateSource};
use crate::prediction::{CourtGeometry, Rect, DEFAULT_SWING_HEIGHT, TARGET_HOLD};

use super::heatmap::{GridSpec, Metric};

/// Version stamped into every record and summary file.
pub const SCHEMA_VERSION: u32 = 1;

/// How each episode picks its launch state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaunchMode {
    /// Mean of the launch distribution.
    #[default]
    Nominal,
    /// Fresh draw per episode.
    Sampled,
}

/// Scripted camera motion standing in for the robot's body motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CameraScript {
    Fixed {
        #[serde(default = "default_camera_position")]
        position: [f64; 3],
        #[serde(default)]
        yaw_deg: f64,
        #[serde(default = "default_pitch_deg")]
        pitch_deg: f64,
    },
    /// Slews toward the true shuttle direction, angular speed capped at `max_rate`.
    Tracking {
        #[serde(default = "default_camera_position")]
        position: [f64; 3],
        /// rad/s
        #[serde(default = "default_max_rate")]
        max_rate: f64,
    },
    /// Fixed yaw, pitch interpolated linearly between `[t, pitch_deg]` keyframes
    /// (time since launch) and held beyond the ends.
    PitchProfile {
        #[serde(default = "default_camera_position")]
        position: [f64; 3],
        #[serde(default)]
        yaw_deg: f64,
        #[serde(default = "default_keyframes")]
        keyframes: Vec<[f64; 2]>,
    },
}

fn default_camera_position() -> [f64; 3] {
    [-2.5, 0.0, 0.7]
}

fn default_pitch_deg() -> f64 {
    0.0
}

fn default_max_rate() -> f64 {
    3.0
}

fn default_keyframes() -> Vec<[f64; 2]> {
    vec![[0.0, 20.0], [0.5, 10.0], [0.9, 35.0], [1.3, 10.0]]
}

impl Default for CameraScript {
    fn default() -> Self {
        CameraScript::Fixed {
            position: default_camera_position(),
            yaw_deg: 0.0,
            pitch_deg: default_pitch_deg(),
        }
    }
}

impl CameraScript {
    pub fn tracking() -> Self {
        CameraScript::Tracking {
            position: default_camera_position(),
            max_rate: default_max_rate(),
        }
    }

    pub fn pitch_profile() -> Self {
        CameraScript::PitchProfile {
            position: default_camera_position(),
            yaw_deg: 0.0,
            keyframes: default_keyframes(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CameraScript::Fixed { .. } => "fixed",
            CameraScript::Tracking { .. } => "tracking",
            CameraScript::PitchProfile { .. } => "pitch_profile",
        }
    }

    pub fn position(&self) -> [f64; 3] {
        match self {
            CameraScript::Fixed { position, .. }
            | CameraScript::Tracking { position, .. }
            | CameraScript::PitchProfile { position, .. } => *position,
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.position().iter().all(|x| x.is_finite()) {
            return Err(Error::config("camera.position", "must be finite"));
        }
        match self {
            CameraScript::Fixed { yaw_deg, pitch_deg, .. } => {
                if !yaw_deg.is_finite() || !(pitch_deg.abs() < 90.0) {
                    return Err(Error::config("camera.pitch_deg", "must lie in (-90, 90)"));
                }
            }
            CameraScript::Tracking { max_rate, .. } => {
                if !(*max_rate > 0.0 && max_rate.is_finite()) {
                    return Err(Error::config("camera.max_rate", "must be > 0"));
                }
            }
            CameraScript::PitchProfile { yaw_deg, keyframes, .. } => {
                if !yaw_deg.is_finite() {
                    return Err(Error::config("camera.yaw_deg", "must be finite"));
                }
                if keyframes.is_empty() {
                    return Err(Error::config("camera.keyframes", "need at least one keyframe"));
                }
                if keyframes.windows(2).any(|w| !(w[1][0] > w[0][0])) {
                    return Err(Error::config("camera.keyframes", "times must be strictly increasing"));
                }
                if keyframes.iter().any(|k| !(k[1].abs() < 90.0) || !k[0].is_finite()) {
                    return Err(Error::config("camera.keyframes", "pitch must lie in (-90, 90)"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Landing offsets from the nominal landing point along x, m.
    pub x_offsets: Vec<f64>,
    /// Landing offsets along y, m.
    pub y_offsets: Vec<f64>,
    pub episodes_per_cell: usize,
    /// Band edges of the a/b/c regions, distance of the landing point from `region_center`.
    pub region_edges: Vec<f64>,
    pub region_center: [f64; 2],
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            x_offsets: vec![-2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0],
            y_offsets: vec![-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0],
            episodes_per_cell: 1650,
            region_edges: vec![0.0, 1.2, 2.4, 3.6],
            region_center: [0.0, 0.0],
        }
    }
}

impl SweepConfig {
    fn validate(&self) -> Result<()> {
        if self.x_offsets.is_empty() || self.y_offsets.is_empty() {
            return Err(Error::config("sweep.x_offsets", "offset lists must be non-empty"));
        }
        if !self.x_offsets.iter().all(|x| x.is_finite()) {
            return Err(Error::config("sweep.x_offsets", "must be finite"));
        }
        if !self.y_offsets.iter().all(|y| y.is_finite()) {
            return Err(Error::config("sweep.y_offsets", "must be finite"));
        }
        if self.episodes_per_cell == 0 {
            return Err(Error::config("sweep.episodes_per_cell", "must be >= 1"));
        }
        if self.region_edges.len() < 2
            || self.region_edges.len() > 27
            || self.region_edges.windows(2).any(|w| !(w[1] > w[0]))
            || !(self.region_edges[0] >= 0.0)
        {
            return Err(Error::config(
                "sweep.region_edges",
                "need 2 to 27 non-negative, strictly increasing edges",
            ));
        }
        Ok(())
    }

    /// Region label (`a`, `b`, ...) for a landing point, or `None` beyond the last edge.
    pub fn region_of(&self, x: f64, y: f64) -> Option<String> {
        let d = (x - self.region_center[0]).hypot(y - self.region_center[1]);
        let last = self.region_edges.len() - 2;
        self.region_edges.windows(2).enumerate().find_map(|(i, w)| {
            let inside = d >= w[0] && (d < w[1] || (i == last && d <= w[1]));
            inside.then(|| ((b'a' + i as u8) as char).to_string())
        })
    }

    pub fn region_labels(&self) -> Vec<String> {
        (0..self.region_edges.len() - 1)
            .map(|i| ((b'a' + i as u8) as char).to_string())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub records: String,
    pub heatmap: String,
    pub regions: String,
    /// Keep measurement, filter and target logs in sweep records.
    pub full_logs: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            records: "records.jsonl".into(),
            heatmap: "heatmap.csv".into(),
            regions: "regions.csv".into(),
            full_logs: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub seed: u64,
    /// Episodes run by `simulate`.
    pub episodes: usize,
    pub shuttle: ShuttleParams,
    /// When set, each episode's true flight uses an aerodynamic length drawn uniformly from
    /// this range; the filter and predictor keep `shuttle.aero_length`.
    pub aero_length_range: Option<[f64; 2]>,
    pub launch: LaunchDistribution,
    pub launch_mode: LaunchMode,
    pub noise: NoiseModel,
    /// Noise-model JSON file; replaces `noise` when set.
    pub noise_file: Option<PathBuf>,
    pub rate_source: RateSource,
    pub camera: CameraScript,
    pub intrinsics: CameraIntrinsics,
    pub ekf: EkfConfig,
    /// Service area relative to the net line (robot side at negative x).
    pub court: CourtGeometry,
    /// x coordinate of the net in the simulation frame, m.
    pub net_x: f64,
    /// Commanded swing height above the base, sampled uniformly per episode, m.
    pub swing_height: [f64; 2],
    pub base_height: f64,
    pub require_qualification: bool,
    /// Filter updates required after a (re)initialisation before targets are issued.
    pub target_warmup: usize,
    pub target_hold: f64,
    pub prediction_horizon: f64,
    pub sim_dt: f64,
    pub sweep: SweepConfig,
    pub heatmap: GridSpec,
    pub metric: Metric,
    pub output: OutputConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            episodes: 1,
            shuttle: ShuttleParams::default(),
            aero_length_range: None,
            launch: LaunchDistribution::default(),
            launch_mode: LaunchMode::default(),
            noise: NoiseModel::default(),
            noise_file: None,
            rate_source: RateSource::default(),
            camera: CameraScript::default(),
            intrinsics: CameraIntrinsics::default(),
            ekf: EkfConfig::default(),
            court: CourtGeometry::default(),
            net_x: 3.35,
            swing_height: [0.9, 1.4],
            base_height: DEFAULT_BASE_HEIGHT,
            require_qualification: true,
            target_warmup: 3,
            target_hold: TARGET_HOLD,
            prediction_horizon: 3.0,
            sim_dt: DEFAULT_DT,
            sweep: SweepConfig::default(),
            heatmap: GridSpec::default(),
            metric: Metric::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Robot base height; with the default 1.25 m swing this puts the nominal swing at 1.8 m.
pub const DEFAULT_BASE_HEIGHT: f64 = 1.8 - DEFAULT_SWING_HEIGHT;

fn wrap(key: &str, r: Result<()>) -> Result<()> {
    r.map_err(|e| match e {
        Error::Config { .. } => e,
        other => Error::config(key, other.to_string()),
    })
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::config("episodes", "must be >= 1"));
        }
        wrap("shuttle", self.shuttle.validate())?;
        wrap("launch", self.launch.validate())?;
        wrap("noise", self.noise.validate())?;
        wrap("intrinsics", self.intrinsics.validate())?;
        wrap("ekf", self.ekf.validate())?;
        wrap("court", self.court.validate())?;
        self.camera.validate()?;
        self.sweep.validate()?;
        wrap("heatmap", self.heatmap.validate())?;
        if !self.net_x.is_finite() {
            return Err(Error::config("net_x", "must be finite"));
        }
        if let Some([lo, hi]) = self.aero_length_range {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::config("aero_length_range", "need 0 < lo <= hi"));
            }
        }
        let [lo, hi] = self.swing_height;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::config("swing_height", "need 0 < lo <= hi"));
        }
        if !(self.base_height >= 0.0 && self.base_height.is_finite()) {
            return Err(Error::config("base_height", "must be >= 0"));
        }
        if !(self.target_hold >= 0.0 && self.target_hold.is_finite()) {
            return Err(Error::config("target_hold", "must be >= 0"));
        }
        if !(self.prediction_horizon > 0.0 && self.prediction_horizon.is_finite()) {
            return Err(Error::config("prediction_horizon", "must be > 0"));
        }
        if !(self.sim_dt > 0.0 && self.sim_dt <= 0.01) {
            return Err(Error::config("sim_dt", "must lie in (0, 0.01]"));
        }
        Ok(())
    }

    /// Load `noise_file` (relative paths against `base_dir`) into `noise`.
    pub fn resolve_noise_file(&mut self, base_dir: &Path) -> Result<()> {
        if let Some(file) = self.noise_file.take() {
            let path = if file.is_absolute() { file } else { base_dir.join(file) };
            self.noise = crate::io::load_noise_model(&path)
                .map_err(|e| Error::config("noise_file", format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }

    /// Court geometry in the simulation frame.
    pub fn court_in_sim_frame(&self) -> CourtGeometry {
        let a = self.court.service_area;
        CourtGeometry {
            service_area: Rect {
                x: [a.x[0] + self.net_x, a.x[1] + self.net_x],
                y: a.y,
            },
            ..self.court
        }
    }
}
