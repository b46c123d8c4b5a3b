//! Sweep the kernel length scale across seeds and write per-run and
//! aggregate CSVs.
//!
//! cargo run --release --example bandwidth_sweep -- [out_dir] [n_seeds]

use std::path::PathBuf;

use invradar::harness::{sweep_bandwidth, write_csv};
use invradar::ScenarioConfig;

fn main() -> invradar::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out/bandwidth_sweep".into()));
    let n_seeds: u64 = args.next().map_or(3, |s| s.parse().expect("seed count"));

    let cfg = ScenarioConfig::policy_benchmark();
    let seeds: Vec<u64> = (0..n_seeds).collect();
    let table = sweep_bandwidth(&cfg, &cfg.experiment.bandwidths, &seeds)?;
    write_csv(&table.runs, &out.join("runs.csv"))?;
    write_csv(&table.summary, &out.join("summary.csv"))?;

    println!("{:>9} {:>8} {:>8} {:>8}", "ell", "mse", "kl", "rank");
    for r in &table.summary {
        println!("{:>9.0e} {:>8.4} {:>8.4} {:>8.3}", r.bandwidth, r.mse_mean, r.kl_mean, r.rank_acc_mean);
    }
    println!("wrote {}", out.display());
    Ok(())
}
