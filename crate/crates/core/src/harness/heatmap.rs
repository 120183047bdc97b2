use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::format_sig;

use super::episode::EpisodeRecord;

/// Regular grid over landing positions, closed on the upper edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridSpec {
    /// Unit cells centred on the default sweep landings.
    fn default() -> Self {
        Self {
            x: [-3.19, 3.81],
            y: [-3.5, 3.5],
            nx: 7,
            ny: 7,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.x[0] < self.x[1] && self.y[0] < self.y[1]) {
            return Err(Error::domain("grid bounds need lo < hi"));
        }
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::domain("grid needs at least one cell per axis"));
        }
        Ok(())
    }

    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let ix = bin(x, self.x, self.nx)?;
        let iy = bin(y, self.y, self.ny)?;
        Some((ix, iy))
    }

    pub fn center(&self, ix: usize, iy: usize) -> (f64, f64) {
        let wx = (self.x[1] - self.x[0]) / self.nx as f64;
        let wy = (self.y[1] - self.y[0]) / self.ny as f64;
        (
            self.x[0] + (ix as f64 + 0.5) * wx,
            self.y[0] + (iy as f64 + 0.5) * wy,
        )
    }
}

fn bin(v: f64, range: [f64; 2], n: usize) -> Option<usize> {
    if !(v >= range[0] && v <= range[1]) {
        return None;
    }
    let k = ((v - range[0]) / (range[1] - range[0]) * n as f64).floor() as usize;
    Some(k.min(n - 1))
}

/// Scalar extracted from each record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Perception error at swing time.
    #[default]
    Epsilon,
    /// Distance between the held target and the true interception point.
    TargetError,
    RegistrationDelay,
}

impl Metric {
    pub fn of(self, r: &EpisodeRecord) -> Option<f64> {
        match self {
            Metric::Epsilon => r.epsilon,
            Metric::TargetError => r.target_error,
            Metric::RegistrationDelay => r.registration_delay,
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epsilon" => Ok(Metric::Epsilon),
            "target_error" => Ok(Metric::TargetError),
            "registration_delay" => Ok(Metric::RegistrationDelay),
            other => Err(Error::domain(format!(
                "unknown metric {other:?} (epsilon, target_error, registration_delay)"
            ))),
        }
    }
}

/// Count, mean and population std of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl Stats {
    /// Values are sorted first so the result does not depend on input order.
    pub fn from_values(values: &[f64]) -> Self {
        if values.is_empty() {
            return Stats {
                count: 0,
                mean: None,
                std: None,
            };
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Stats {
            count: v.len(),
            mean: Some(mean),
            std: Some(var.sqrt()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub grid: GridSpec,
    pub metric: Metric,
    /// Row-major over `iy`, then `ix`: index `iy * nx + ix`.
    pub cells: Vec<Stats>,
}

impl Heatmap {
    pub fn cell(&self, ix: usize, iy: usize) -> &Stats {
        &self.cells[iy * self.grid.nx + ix]
    }

    /// CSV `ix,iy,x_center,y_center,count,mean,std`; empty cells leave mean and std blank.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["ix", "iy", "x_center", "y_center", "count", "mean", "std"])?;
        for iy in 0..self.grid.ny {
            for ix in 0..self.grid.nx {
                let (cx, cy) = self.grid.center(ix, iy);
                let s = self.cell(ix, iy);
                let opt = |v: Option<f64>| v.map(|x| format_sig(x, 9)).unwrap_or_default();
                w.write_record([
                    ix.to_string(),
                    iy.to_string(),
                    format_sig(cx, 9),
                    format_sig(cy, 9),
                    s.count.to_string(),
                    opt(s.mean),
                    opt(s.std),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Bin records by landing position. Records without the metric or outside the grid are skipped.
pub fn aggregate_heatmap(records: &[EpisodeRecord], metric: Metric, grid: &GridSpec) -> Result<Heatmap> {
    if records.is_empty() {
        return Err(Error::domain("no records to aggregate"));
    }
    grid.validate()?;
    let mut bins: Vec<Vec<f64>> = vec![Vec::new(); grid.nx * grid.ny];
    for r in records {
        let Some(value) = metric.of(r) else { continue };
        if let Some((ix, iy)) = grid.cell_of(r.landing[0], r.landing[1]) {
            bins[iy * grid.nx + ix].push(value);
        }
    }
    Ok(Heatmap {
        grid: *grid,
        metric,
        cells: bins.iter().map(|b| Stats::from_values(b)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionStats {
    pub region: String,
    pub stats: Stats,
}

/// Per-region statistics in label order.
pub fn region_stats(records: &[EpisodeRecord], metric: Metric, labels: &[String]) -> Vec<RegionStats> {
    labels
        .iter()
        .map(|label| {
            let values: Vec<f64> = records
                .iter()
                .filter(|r| r.region.as_deref() == Some(label.as_str()))
                .filter_map(|r| metric.of(r))
                .collect();
            RegionStats {
                region: label.clone(),
                stats: Stats::from_values(&values),
            }
        })
        .collect()
}

pub fn write_region_csv<W: Write>(regions: &[RegionStats], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["region", "count", "mean", "std"])?;
    for r in regions {
        let opt = |v: Option<f64>| v.map(|x| format_sig(x, 9)).unwrap_or_default();
        w.write_record([
            r.region.clone(),
            r.stats.count.to_string(),
            opt(r.stats.mean),
            opt(r.stats.std),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::episode::EpisodeRecord;
    use proptest::prelude::*;

    fn record(x: f64, y: f64, eps: Option<f64>) -> EpisodeRecord {
        let mut r = EpisodeRecord::empty();
        r.landing = [x, y, 0.0];
        r.epsilon = eps;
        r
    }

    fn grid() -> GridSpec {
        GridSpec {
            x: [0.0, 4.0],
            y: [0.0, 2.0],
            nx: 4,
            ny: 2,
        }
    }

    #[test]
    fn single_record() {
        let h = aggregate_heatmap(&[record(1.5, 0.5, Some(0.2))], Metric::Epsilon, &grid()).unwrap();
        let c = h.cell(1, 0);
        assert_eq!((c.count, c.mean, c.std), (1, Some(0.2), Some(0.0)));
        assert_eq!(h.cell(0, 0).count, 0);
        assert_eq!(h.cell(0, 0).mean, None);
    }

    #[test]
    fn empty_records_error() {
        assert!(aggregate_heatmap(&[], Metric::Epsilon, &grid()).is_err());
    }

    #[test]
    fn upper_edges_are_closed_and_outside_skipped() {
        let g = grid();
        assert_eq!(g.cell_of(4.0, 2.0), Some((3, 1)));
        assert_eq!(g.cell_of(4.01, 1.0), None);
        assert_eq!(g.cell_of(-0.01, 1.0), None);
        let h = aggregate_heatmap(&[record(5.0, 0.5, Some(1.0)), record(0.5, 0.5, None)], Metric::Epsilon, &g).unwrap();
        assert!(h.cells.iter().all(|c| c.count == 0));
    }

    #[test]
    fn synthetic_field_recovered() {
        let g = grid();
        let field = |ix: usize, iy: usize| 0.1 * ix as f64 + 0.01 * iy as f64;
        let mut recs = Vec::new();
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                let (cx, cy) = g.center(ix, iy);
                for k in 0..5 {
                    let jitter = (k as f64 - 2.0) * 0.1;
                    recs.push(record(cx + jitter, cy - jitter * 0.5, Some(field(ix, iy) + 0.001 * (k as f64 - 2.0))));
                }
            }
        }
        let h = aggregate_heatmap(&recs, Metric::Epsilon, &g).unwrap();
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                let c = h.cell(ix, iy);
                assert_eq!(c.count, 5);
                assert!((c.mean.unwrap() - field(ix, iy)).abs() < 1e-12);
                assert!((c.std.unwrap() - 0.001 * 2f64.sqrt()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn csv_leaves_empty_cells_blank() {
        let h = aggregate_heatmap(&[record(1.5, 0.5, Some(0.25))], Metric::Epsilon, &grid()).unwrap();
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "ix,iy,x_center,y_center,count,mean,std");
        assert_eq!(lines[1], "0,0,0.5,0.5,0,,");
        assert_eq!(lines[2], "1,0,1.5,0.5,1,0.25,0");
        assert_eq!(lines.len(), 9);
    }

    #[test]
    fn metric_parsing() {
        assert_eq!("target_error".parse::<Metric>().unwrap(), Metric::TargetError);
        assert!("bogus".parse::<Metric>().is_err());
    }

    #[test]
    fn region_statistics() {
        let mut a = record(0.0, 0.0, Some(1.0));
        a.region = Some("a".into());
        let mut b = record(0.0, 0.0, Some(3.0));
        b.region = Some("a".into());
        let labels = vec!["a".to_string(), "b".to_string()];
        let s = region_stats(&[a, b], Metric::Epsilon, &labels);
        assert_eq!(s[0].stats.count, 2);
        assert_eq!(s[0].stats.mean, Some(2.0));
        assert_eq!(s[0].stats.std, Some(1.0));
        assert_eq!(s[1].stats.count, 0);
    }

    proptest! {
        #[test]
        fn permutation_invariant(values in prop::collection::vec((0.0f64..4.0, 0.0f64..2.0, 0.0f64..1.0), 1..40), seed in 0u64..1000) {
            let recs: Vec<_> = values.iter().map(|&(x, y, e)| record(x, y, Some(e))).collect();
            let mut shuffled = recs.clone();
            // deterministic permutation
            let n = shuffled.len();
            for i in 0..n {
                let j = ((seed as usize).wrapping_mul(31).wrapping_add(i * 17)) % n;
                shuffled.swap(i, j);
            }
            let a = aggregate_heatmap(&recs, Metric::Epsilon, &grid()).unwrap();
            let b = aggregate_heatmap(&shuffled, Metric::Epsilon, &grid()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
