#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use shuttle_core::dynamics::{simulate, LaunchDistribution, ShuttleParams, StopCondition};
use shuttle_core::io::save_trajectory_csv;
use shuttle_core::{Vec3, DEFAULT_DT};

pub const NET_X: f64 = 3.35;

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_shuttle-sim"));
    cmd.env_remove("SHUTTLE_SIM_SEED");
    cmd
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn shuttle-sim")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Nominal flight shifted along x, written as a trajectory CSV.
pub fn write_fixture(dir: &Path, name: &str, dx: f64) -> PathBuf {
    let launch = LaunchDistribution::default().mean().translated(Vec3::new(dx, 0.0, 0.0));
    let traj = simulate(&launch, &ShuttleParams::default(), DEFAULT_DT, StopCondition::ground()).unwrap();
    let path = dir.join(name);
    save_trajectory_csv(&traj, &path).unwrap();
    path
}

/// Three flights: through both rectangles, 1.55 m crossing short of the service area,
/// landing past the back line.
pub fn qualification_fixtures(dir: &Path) -> [PathBuf; 3] {
    [
        write_fixture(dir, "both.csv", -3.5 + NET_X),
        write_fixture(dir, "short.csv", -1.75 + NET_X),
        write_fixture(dir, "long.csv", -6.3 + NET_X),
    ]
}
