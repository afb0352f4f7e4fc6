//! Command-line front end: simulate scans, track scan files, run Monte-Carlo
//! benchmarks, print the default config.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use apda::harness::export::{export, rmse_table, write_estimates};
use apda::harness::{run_experiment, run_filter, run_rng, Algorithm, ExperimentConfig};
use apda::scanfile::{group_runs, read_records, write_run};
use apda::simulator::simulate;
use apda::Result;

#[derive(Parser)]
#[command(name = "apda", version, about = "Multipath-robust radio tracking: simulation, filtering and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate measurement scans and write them as JSON lines.
    Simulate(Common),
    /// Run the filter on a scan file.
    Track {
        #[command(flatten)]
        common: Common,
        /// Scan file written by `simulate`.
        #[arg(long)]
        scans: PathBuf,
    },
    /// Monte-Carlo study of one or more algorithm variants.
    Bench(Common),
    /// Print the resolved configuration as TOML.
    Config(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config, or a manifest.toml from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated variants, e.g. AL1,AL3,AL5.
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for one per core.
    #[arg(long)]
    workers: Option<usize>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(a) = &self.algorithm {
            cfg.algorithms = Algorithm::parse_list(a)?;
        }
        if let Some(r) = self.runs {
            cfg.runs = r;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn cmd_simulate(cfg: &ExperimentConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    let scan_path = cfg.output_dir.join("scans.jsonl");
    let truth_path = cfg.output_dir.join("truth.csv");
    let mut scans = BufWriter::new(File::create(&scan_path)?);
    let mut truth = csv::Writer::from_path(&truth_path)?;
    truth.write_record(["run", "n", "t", "x", "y", "vx", "vy"])?;
    for run in 0..cfg.runs {
        let sim = simulate(&cfg.scenario, &mut run_rng(cfg.seed, run, false))?;
        write_run(&mut scans, run, &sim, &cfg.scenario)?;
        for (i, x) in sim.trajectory.iter().enumerate() {
            let t = cfg.scenario.time_of(i + 1);
            truth.write_record([run.to_string(), (i + 1).to_string()].into_iter().chain(
                [t, x.p.x, x.p.y, x.v.x, x.v.y].map(|v| v.to_string()),
            ))?;
        }
    }
    scans.flush()?;
    truth.flush()?;
    println!("wrote {} and {}", scan_path.display(), truth_path.display());
    Ok(())
}

fn cmd_track(cfg: &ExperimentConfig, scans: &PathBuf) -> Result<()> {
    let records = read_records(BufReader::new(File::open(scans)?))?;
    let runs = group_runs(&records, cfg.scenario.anchors.len())?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    for alg in &cfg.algorithms {
        let params = cfg.filter_params(alg)?;
        let mut out = Vec::new();
        for (&run, seq) in &runs {
            let times: Vec<f64> = (1..=seq.len()).map(|n| cfg.scenario.time_of(n)).collect();
            let steps = run_filter(params.clone(), &cfg.scenario.anchors, seq, &times, &mut run_rng(cfg.seed, run, true))?;
            out.push((run, steps));
        }
        let path = cfg.output_dir.join(format!("estimates_{}.csv", alg.label()));
        write_estimates(&out, cfg.scenario.anchors.len(), &path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_bench(cfg: &ExperimentConfig) -> Result<()> {
    let exp = run_experiment(cfg)?;
    let files = export(&exp, &cfg.output_dir)?;
    let rmse = rmse_table(&exp)?;
    let windows = apda::harness::export::evaluation_windows(&cfg.scenario);
    println!("{:<10} {:>12} {:>12} {:>10}", "algorithm", "mean RMSE", "pre-OLOS", "lost runs");
    for ((a, series), runs) in cfg.algorithms.iter().zip(&rmse).zip(&exp.results) {
        let full = apda::harness::mean_over_window(series, &exp.times, windows[0])?;
        let pre = match windows.get(1) {
            Some(w) => apda::harness::mean_over_window(series, &exp.times, *w)?,
            None => full,
        };
        let lost = runs.iter().filter(|r| r.lost_step.is_some()).count();
        println!("{:<10} {:>12.4} {:>12.4} {:>10}", a.label(), full, pre, lost);
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(c) => c.resolve().and_then(|cfg| cmd_simulate(&cfg)),
        Command::Track { common, scans } => common.resolve().and_then(|cfg| cmd_track(&cfg, scans)),
        Command::Bench(c) => c.resolve().and_then(|cfg| cmd_bench(&cfg)),
        Command::Config(c) => c.resolve().and_then(|cfg| {
            print!("{}", cfg.to_toml()?);
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
