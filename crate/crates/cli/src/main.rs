use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use shuttle_core::harness::{
    aggregate_heatmap, region_stats, run_episodes, run_sweep, write_region_csv, EpisodeRecord,
    EpisodeSpec, Metric, ScenarioConfig,
};
use shuttle_core::io::{load_trajectory_csv, read_fit_csv, read_json_lines, save_noise_model, write_json_lines};
use shuttle_core::perception::{fit_noise_model_with, ErrorNormScale};
use shuttle_core::prediction::qualify_trajectory;

#[derive(Debug, Parser)]
#[command(name = "shuttle-sim", version, about = "Shuttlecock tracking and interception simulator")]
struct Cli {
    /// Scenario config (JSON). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the config seed.
    #[arg(long, global = true, env = "SHUTTLE_SIM_SEED")]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run `episodes` episodes from the config with full logs.
    Simulate {
        /// Index of the first episode.
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
    /// Landing-grid sweep: records, heatmap and region summary.
    Sweep,
    /// Regress a noise model from a calibration CSV.
    FitNoise {
        /// CSV with columns distance,ang_rate,detected,error_norm.
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Scale::Raw)]
        scale: Scale,
        /// Output file name inside `--out`.
        #[arg(long, default_value = "noise_model.json")]
        output: String,
    },
    /// Aggregate a records file into a heatmap and region summary.
    Heatmap {
        records: PathBuf,
        #[arg(long)]
        metric: Option<Metric>,
    },
    /// Classify trajectory CSVs with the two-rectangle test; prints one verdict per file.
    Qualify {
        #[arg(required = true)]
        trajectories: Vec<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Scale {
    Raw,
    IsotropicAxisStd,
}

impl From<Scale> for ErrorNormScale {
    fn from(s: Scale) -> Self {
        match s {
            Scale::Raw => ErrorNormScale::Raw,
            Scale::IsotropicAxisStd => ErrorNormScale::IsotropicAxisStd,
        }
    }
}

/// Malformed or invalid configuration; exits with status 2.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn load_config(cli: &Cli) -> Result<ScenarioConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read config {}", path.display()))?;
            let de = &mut serde_json::Deserializer::from_str(&text);
            let mut cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
                let key = e.path().to_string();
                ConfigError(format!("{}: key `{key}`: {}", path.display(), e.inner()))
            })?;
            let base = path.parent().unwrap_or(Path::new("."));
            cfg.resolve_noise_file(base)
                .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
            cfg
        }
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(|e| ConfigError(e.to_string()))?;
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn write_records(path: &Path, records: &[EpisodeRecord]) -> Result<()> {
    write_json_lines(records, create(path)?)?;
    Ok(())
}

fn write_aggregates(cfg: &ScenarioConfig, out: &Path, records: &[EpisodeRecord], metric: Metric) -> Result<()> {
    let heatmap = aggregate_heatmap(records, metric, &cfg.heatmap)?;
    let heatmap_path = out.join(&cfg.output.heatmap);
    heatmap.write_csv(create(&heatmap_path)?)?;
    let regions = region_stats(records, metric, &cfg.sweep.region_labels());
    let regions_path = out.join(&cfg.output.regions);
    write_region_csv(&regions, create(&regions_path)?)?;
    println!("{:<8} {:>7} {:>12} {:>12}", "region", "count", "mean", "std");
    for r in &regions {
        let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.6}"));
        println!("{:<8} {:>7} {:>12} {:>12}", r.region, r.stats.count, fmt(r.stats.mean), fmt(r.stats.std));
    }
    eprintln!("wrote {} and {}", heatmap_path.display(), regions_path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let jobs = cli
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    fs::create_dir_all(&cli.out).with_context(|| format!("cannot create {}", cli.out.display()))?;
    match &cli.command {
        Command::Simulate { index } => {
            let cfg = load_config(&cli)?;
            let specs: Vec<EpisodeSpec> = (0..cfg.episodes as u64)
                .map(|i| EpisodeSpec {
                    index: index + i,
                    full_logs: true,
                    ..Default::default()
                })
                .collect();
            let records = run_episodes(&cfg, &specs, jobs)?;
            let path = cli.out.join(&cfg.output.records);
            write_records(&path, &records)?;
            for r in &records {
                let eps = r.epsilon.map_or("-".to_string(), |e| format!("{e:.6}"));
                println!(
                    "episode {} qualified={} t_swing={} epsilon={eps} measurements={}",
                    r.index,
                    r.qualified,
                    r.t_swing.map_or("-".to_string(), |t| format!("{t:.4}")),
                    r.measurements
                );
            }
            eprintln!("wrote {}", path.display());
        }
        Command::Sweep => {
            let cfg = load_config(&cli)?;
            let records = run_sweep(&cfg, jobs)?;
            let path = cli.out.join(&cfg.output.records);
            write_records(&path, &records)?;
            eprintln!("wrote {} ({} episodes)", path.display(), records.len());
            write_aggregates(&cfg, &cli.out, &records, cfg.metric)?;
        }
        Command::FitNoise { input, scale, output } => {
            let file = File::open(input).with_context(|| format!("cannot open {}", input.display()))?;
            let samples = read_fit_csv(file)?;
            let fit = fit_noise_model_with(&samples, (*scale).into())?;
            let path = cli.out.join(output);
            save_noise_model(&fit.model, &path)?;
            let summary = serde_json::json!({
                "detect": fit.model.detect.as_array(),
                "detect_se": fit.detect_se,
                "noise_std": fit.model.noise_std.as_array(),
                "noise_std_se": fit.noise_std_se,
                "n_detect": fit.n_detect,
                "n_error": fit.n_error,
            });
            println!("{summary}");
            eprintln!("wrote {}", path.display());
        }
        Command::Heatmap { records, metric } => {
            let cfg = load_config(&cli)?;
            let file = File::open(records).with_context(|| format!("cannot open {}", records.display()))?;
            let recs: Vec<EpisodeRecord> = read_json_lines(file)?;
            write_aggregates(&cfg, &cli.out, &recs, metric.unwrap_or(cfg.metric))?;
        }
        Command::Qualify { trajectories } => {
            let cfg = load_config(&cli)?;
            let court = cfg.court_in_sim_frame();
            let mut stdout = std::io::stdout().lock();
            for path in trajectories {
                let traj = load_trajectory_csv(path).with_context(|| format!("cannot load {}", path.display()))?;
                writeln!(stdout, "{}", qualify_trajectory(&traj, &court))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
