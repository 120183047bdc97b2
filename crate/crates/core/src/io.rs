//! CSV and JSON file formats.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{ShuttleState, Trajectory};
use crate::error::{Error, Result};
use crate::perception::{FitSample, NoiseModel};
use crate::Vec3;

pub const TRAJECTORY_HEADER: [&str; 7] = ["t", "px", "py", "pz", "vx", "vy", "vz"];
pub const FIT_HEADER: [&str; 4] = ["distance", "ang_rate", "detected", "error_norm"];

/// Round to `digits` significant digits and print the shortest decimal that reads back to
/// the rounded value.
pub fn format_sig(x: f64, digits: usize) -> String {
    if !x.is_finite() || x == 0.0 {
        return format!("{x}");
    }
    let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .unwrap_or(x);
    format!("{rounded}")
}

#[derive(Debug, Serialize, Deserialize)]
struct TrajectoryRow {
    t: f64,
    px: f64,
    py: f64,
    pz: f64,
    vx: f64,
    vy: f64,
    vz: f64,
}

pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    for s in traj.states() {
        let row = [s.t, s.p.x, s.p.y, s.p.z, s.v.x, s.v.y, s.v.z];
        w.write_record(row.iter().map(|x| format_sig(*x, 9)))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a uniformly sampled trajectory; the step is the mean row spacing.
pub fn read_trajectory_csv<R: Read>(input: R) -> Result<Trajectory> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != TRAJECTORY_HEADER {
        return Err(Error::domain(format!(
            "expected header {}, got {}",
            TRAJECTORY_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut states = Vec::new();
    for row in r.deserialize() {
        let row: TrajectoryRow = row?;
        states.push(ShuttleState::new(
            row.t,
            Vec3::new(row.px, row.py, row.pz),
            Vec3::new(row.vx, row.vy, row.vz),
        ));
    }
    if states.is_empty() {
        return Err(Error::domain("trajectory file has no rows"));
    }
    let step = if states.len() > 1 {
        (states[states.len() - 1].t - states[0].t) / (states.len() - 1) as f64
    } else {
        crate::DEFAULT_DT
    };
    Trajectory::new_with_tolerance(step, states, 1e-6)
}

pub fn save_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    write_trajectory_csv(traj, BufWriter::new(File::create(path)?))
}

pub fn load_trajectory_csv(path: &Path) -> Result<Trajectory> {
    read_trajectory_csv(File::open(path)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct FitRow {
    distance: f64,
    ang_rate: f64,
    detected: String,
    error_norm: Option<f64>,
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        other => Err(Error::domain(format!("detected must be 0/1/true/false, got {other:?}"))),
    }
}

/// Reads calibration samples. `error_norm` may be empty for undetected frames and is
/// ignored when `detected` is false.
pub fn read_fit_csv<R: Read>(input: R) -> Result<Vec<FitSample>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in r.deserialize() {
        let row: FitRow = row?;
        let detected = parse_bool(&row.detected)?;
        if detected && row.error_norm.is_none() {
            return Err(Error::domain(format!(
                "row {}: detected frame without error_norm",
                out.len() + 1
            )));
        }
        out.push(FitSample {
            distance: row.distance,
            ang_rate: row.ang_rate,
            detected,
            error_norm: if detected { row.error_norm } else { None },
        });
    }
    Ok(out)
}

pub fn write_fit_csv<W: Write>(samples: &[FitSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FIT_HEADER)?;
    for s in samples {
        w.write_record([
            format_sig(s.distance, 12),
            format_sig(s.ang_rate, 12),
            if s.detected { "1".into() } else { "0".into() },
            s.error_norm.map(|e| format_sig(e, 12)).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_noise_model(path: &Path) -> Result<NoiseModel> {
    let nm: NoiseModel = serde_json::from_reader(File::open(path)?)?;
    nm.validate()?;
    Ok(nm)
}

pub fn save_noise_model(nm: &NoiseModel, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, nm)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Serialise items as one compact JSON document per line.
pub fn write_json_lines<W: Write, T: Serialize>(items: &[T], mut out: W) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_json_lines<R: Read, T: for<'de> Deserialize<'de>>(mut input: R) -> Result<Vec<T>> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{simulate, LaunchDistribution, ShuttleParams, StopCondition};
    use crate::perception::LinearCoeffs;

    #[test]
    fn sig_digits() {
        assert_eq!(format_sig(1.0 / 3.0, 9), "0.333333333");
        assert_eq!(format_sig(123456789.123, 9), "123456789");
        assert_eq!(format_sig(-0.0016666666666, 9), "-0.00166666667");
        assert_eq!(format_sig(0.0, 9), "0");
        assert_eq!(format_sig(2.5, 9), "2.5");
    }

    #[test]
    fn trajectory_round_trip() {
        let launch = LaunchDistribution::default().mean();
        let traj = simulate(&launch, &ShuttleParams::default(), crate::DEFAULT_DT, StopCondition::ground()).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,px,py,pz,vx,vy,vz\n"));
        let back = read_trajectory_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), traj.len());
        for (a, b) in back.states().iter().zip(traj.states()) {
            assert!((a.p - b.p).norm() < 1e-7 * (1.0 + b.p.norm()));
            assert!((a.v - b.v).norm() < 1e-7 * (1.0 + b.v.norm()));
            assert!((a.t - b.t).abs() < 1e-8);
        }
    }

    #[test]
    fn bad_trajectory_header() {
        assert!(read_trajectory_csv("a,b\n1,2\n".as_bytes()).is_err());
        assert!(read_trajectory_csv("t,px,py,pz,vx,vy,vz\n".as_bytes()).is_err());
    }

    #[test]
    fn fit_csv_parsing() {
        let text = "distance,ang_rate,detected,error_norm\n1.0,0.5,1,0.02\n2.0,0.1,0,\n3.0,0.0,true,0.03\n";
        let s = read_fit_csv(text.as_bytes()).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s[0].detected && !s[1].detected && s[2].detected);
        assert_eq!(s[1].error_norm, None);
        assert_eq!(s[2].error_norm, Some(0.03));
        assert!(read_fit_csv("distance,ang_rate,detected,error_norm\n1,1,1,\n".as_bytes()).is_err());
        assert!(read_fit_csv("distance,ang_rate,detected,error_norm\n1,1,maybe,\n".as_bytes()).is_err());
        let mut buf = Vec::new();
        write_fit_csv(&s, &mut buf).unwrap();
        assert_eq!(read_fit_csv(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn noise_model_json_keys() {
        let nm = NoiseModel {
            detect: LinearCoeffs::new(1.0, -0.1, -0.2),
            noise_std: LinearCoeffs::new(0.01, 0.002, 0.003),
            std_floor: 1e-4,
            range_factor: 1.0,
        };
        let v = serde_json::to_value(nm).unwrap();
        assert_eq!(v["detect"]["per_distance"], -0.1);
        assert_eq!(v["noise_std"]["per_angvel"], 0.003);
        let dir = std::env::temp_dir().join(format!("shuttle-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("noise.json");
        save_noise_model(&nm, &path).unwrap();
        assert_eq!(load_noise_model(&path).unwrap(), nm);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn json_lines_round_trip() {
        let items = vec![vec![1.0, 2.0], vec![3.5]];
        let mut buf = Vec::new();
        write_json_lines(&items, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "[1.0,2.0]\n[3.5]\n");
        let back: Vec<Vec<f64>> = read_json_lines(buf.as_slice()).unwrap();
        assert_eq!(back, items);
    }
}
