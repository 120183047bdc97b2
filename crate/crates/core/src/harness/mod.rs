//! Episode orchestration, landing-grid sweeps and heatmaps.

mod config;
mod episode;
mod heatmap;
mod sweep;

pub use config::{
    CameraScript, LaunchMode, OutputConfig, ScenarioConfig, SweepConfig, DEFAULT_BASE_HEIGHT,
    SCHEMA_VERSION,
};
pub use episode::{
    build_camera_track, episode_rng, run_episode, DeliveredMeasurement, EpisodeLogs, EpisodeRecord,
    EpisodeSpec,
};
pub use heatmap::{
    aggregate_heatmap, region_stats, write_region_csv, GridSpec, Heatmap, Metric, RegionStats, Stats,
};
pub use sweep::{run_episodes, run_sweep, sweep_specs};
