use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use invradar::active::ProbeMode;
use invradar::harness::{self, ExportFormat, RunRecord};
use invradar::{Error, Result, ScenarioConfig, Streams};

#[derive(Parser)]
#[command(name = "invradar", version, about = "Learn a cognitive radar's policy from its actions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file or preset name (nominal, policy_benchmark, probing_benchmark).
    #[arg(long)]
    config: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Probing mode: active or random.
    #[arg(long)]
    mode: Option<ProbeMode>,
    /// Trials for probing comparisons, seeds for sweeps.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate target, radar and policy; with --mode, also run a probing episode.
    Simulate(Common),
    /// Train the filter on one simulated run and score it.
    Infer(Common),
    /// Metrics for every bandwidth in the config, per seed.
    SweepBandwidth(Common),
    /// Metrics for every training length in the config, per seed.
    SweepTrain(Common),
    /// Paired active and random probing trials.
    ActiveVsRandom(Common),
    /// Re-export a saved run record as CSV or JSON lines.
    Export {
        #[command(flatten)]
        common: Common,
        /// record.json written by `infer`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "csv")]
        format: ExportFormat,
    },
}

fn load_config(source: Option<&str>, default: &str) -> Result<ScenarioConfig> {
    let source = source.unwrap_or(default);
    if Path::new(source).exists() {
        ScenarioConfig::from_path(source)
    } else {
        ScenarioConfig::preset(source)
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn prepare(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|source| Error::Io {
        path: out.to_path_buf(),
        source,
    })
}

fn seeds(cfg: &ScenarioConfig, trials: Option<usize>, base: u64) -> Vec<u64> {
    match trials {
        Some(n) => (0..n as u64).map(|i| base + i).collect(),
        None => cfg.experiment.seeds.clone(),
    }
}

fn run(cli: Cli) -> Result<serde_json::Value> {
    match cli.command {
        Command::Simulate(c) => {
            let cfg = load_config(c.config.as_deref(), "policy_benchmark")?;
            prepare(&c.out)?;
            let traj = harness::simulate_trajectory(&cfg, &Streams::new(c.seed), cfg.experiment.train_steps)?;
            let traj_path = c.out.join("trajectory.jsonl");
            harness::write_jsonl(&traj.records, &traj_path)?;
            let mut files = vec![traj_path];
            if let Some(mode) = c.mode {
                let mut pcfg = cfg.clone();
                pcfg.motion.revisit = None;
                let (_, log) = harness::run_probing(&pcfg, c.seed, mode, pcfg.probing.warmstart, pcfg.probing.horizon)?;
                let log_path = c.out.join("probe_log.jsonl");
                harness::write_jsonl(&log, &log_path)?;
                files.push(log_path);
            }
            Ok(json!({ "command": "simulate", "config_hash": cfg.hash(), "files": files }))
        }
        Command::Infer(c) => {
            let cfg = load_config(c.config.as_deref(), "policy_benchmark")?;
            prepare(&c.out)?;
            let out = harness::run_random_probing_detailed(&cfg, c.seed, &harness::TestSet::Simulated)?;
            let mut files = harness::export(std::slice::from_ref(&out.record), ExportFormat::Csv, &c.out)?;
            let run_log = c.out.join("run_log.jsonl");
            harness::write_jsonl(&out.record.run_log, &run_log)?;
            let pairs = c.out.join("policy_pairs.jsonl");
            harness::write_jsonl(&out.pairs, &pairs)?;
            let record = c.out.join("record.json");
            write_json(&out.record, &record)?;
            let checkpoint = c.out.join("checkpoint.json");
            write_json(&out.ensemble, &checkpoint)?;
            files.extend([run_log, pairs, record, checkpoint]);
            Ok(json!({ "command": "infer", "report": out.record.report, "files": files }))
        }
        Command::SweepBandwidth(c) => {
            let cfg = load_config(c.config.as_deref(), "policy_benchmark")?;
            prepare(&c.out)?;
            let table = harness::sweep_bandwidth(&cfg, &cfg.experiment.bandwidths, &seeds(&cfg, c.trials, c.seed))?;
            harness::write_csv(&table.runs, &c.out.join("sweep_bandwidth.csv"))?;
            harness::write_csv(&table.summary, &c.out.join("sweep_bandwidth_summary.csv"))?;
            Ok(json!({ "command": "sweep-bandwidth", "summary": table.summary }))
        }
        Command::SweepTrain(c) => {
            let cfg = load_config(c.config.as_deref(), "policy_benchmark")?;
            prepare(&c.out)?;
            let table =
                harness::sweep_training_size(&cfg, &cfg.experiment.train_sizes, &seeds(&cfg, c.trials, c.seed))?;
            harness::write_csv(&table.runs, &c.out.join("sweep_train.csv"))?;
            harness::write_csv(&table.summary, &c.out.join("sweep_train_summary.csv"))?;
            Ok(json!({ "command": "sweep-train", "summary": table.summary }))
        }
        Command::ActiveVsRandom(c) => {
            let cfg = load_config(c.config.as_deref(), "probing_benchmark")?;
            prepare(&c.out)?;
            let trials = c.trials.unwrap_or(cfg.probing.trials);
            let cmp = harness::active_vs_random(&cfg, trials, cfg.probing.warmstart, cfg.probing.horizon, c.seed)?;
            harness::write_csv(&cmp.curves, &c.out.join("kl_curves.csv"))?;
            harness::write_csv(&cmp.halving, &c.out.join("halving.csv"))?;
            let summary = json!({
                "command": "active-vs-random",
                "trials": trials,
                "median_halving_active": cmp.median_halving_active,
                "median_halving_random": cmp.median_halving_random,
                "dominance": cmp.dominance,
            });
            write_json(&summary, &c.out.join("summary.json"))?;
            Ok(summary)
        }
        Command::Export { common, input, format } => {
            let text = std::fs::read_to_string(&input).map_err(|source| Error::Io {
                path: input.clone(),
                source,
            })?;
            let record: RunRecord = serde_json::from_str(&text)?;
            prepare(&common.out)?;
            let files = harness::export(&[record], format, &common.out)?;
            Ok(json!({ "command": "export", "files": files }))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            eprintln!("{}", json!({ "error": "usage", "message": message.trim_end() }));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::from(2)
        }
    }
}
