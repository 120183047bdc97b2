use rayon::prelude::*;

use crate::error::{Error, Result};

use super::config::ScenarioConfig;
use super::episode::{run_episode, EpisodeRecord, EpisodeSpec};

/// Episodes of a landing-grid sweep, ordered by x offset, then y offset, then index.
pub fn sweep_specs(cfg: &ScenarioConfig) -> Vec<EpisodeSpec> {
    let s = &cfg.sweep;
    let mut specs = Vec::with_capacity(s.x_offsets.len() * s.y_offsets.len() * s.episodes_per_cell);
    for (ix, &dx) in s.x_offsets.iter().enumerate() {
        for (iy, &dy) in s.y_offsets.iter().enumerate() {
            for index in 0..s.episodes_per_cell as u64 {
                specs.push(EpisodeSpec {
                    index,
                    offset: [dx, dy],
                    cell: Some([ix, iy]),
                    full_logs: cfg.output.full_logs,
                });
            }
        }
    }
    specs
}

/// Run episodes on a pool of `jobs` workers; results come back in `specs` order.
pub fn run_episodes(cfg: &ScenarioConfig, specs: &[EpisodeSpec], jobs: usize) -> Result<Vec<EpisodeRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::domain(format!("cannot start worker pool: {e}")))?;
    pool.install(|| specs.par_iter().map(|s| run_episode(cfg, s)).collect())
}

pub fn run_sweep(cfg: &ScenarioConfig, jobs: usize) -> Result<Vec<EpisodeRecord>> {
    cfg.validate()?;
    run_episodes(cfg, &sweep_specs(cfg), jobs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::SweepConfig;

    fn small() -> ScenarioConfig {
        ScenarioConfig {
            sweep: SweepConfig {
                x_offsets: vec![-1.0, 0.0],
                y_offsets: vec![0.0, 1.5],
                episodes_per_cell: 3,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn record_count_and_order() {
        let cfg = small();
        let recs = run_sweep(&cfg, 2).unwrap();
        assert_eq!(recs.len(), 2 * 2 * 3);
        assert_eq!(recs[0].cell, Some([0, 0]));
        assert_eq!(recs[3].cell, Some([0, 1]));
        assert_eq!(recs[6].cell, Some([1, 0]));
        assert_eq!(recs[7].index, 1);
    }

    #[test]
    fn zero_offset_cell_reproduces_base_episode() {
        let cfg = small();
        let recs = run_sweep(&cfg, 1).unwrap();
        for r in recs.iter().filter(|r| r.offset == [0.0, 0.0]) {
            let mut base = run_episode(&cfg, &EpisodeSpec { index: r.index, ..Default::default() }).unwrap();
            base.cell = r.cell;
            assert_eq!(serde_json::to_string(&base).unwrap(), serde_json::to_string(r).unwrap());
        }
    }

    #[test]
    fn parallelism_does_not_change_results() {
        let cfg = small();
        let a = serde_json::to_string(&run_sweep(&cfg, 1).unwrap()).unwrap();
        let b = serde_json::to_string(&run_sweep(&cfg, 4).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
