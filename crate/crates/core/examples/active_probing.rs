//! Paired active and random probing after a shared random warm start; prints
//! the mean KL curves and the steps each needed to halve the warm-start KL.
//!
//! cargo run --release --example active_probing -- [trials]

use invradar::harness::active_vs_random;
use invradar::ScenarioConfig;

fn main() -> invradar::Result<()> {
    let trials: usize = std::env::args().nth(1).map_or(4, |s| s.parse().expect("trials"));
    let cfg = ScenarioConfig::probing_benchmark();
    let cmp = active_vs_random(&cfg, trials, cfg.probing.warmstart, cfg.probing.horizon, 0)?;

    println!("{:>5} {:>10} {:>10}", "step", "active", "random");
    for c in cmp.curves.iter().step_by(20) {
        println!("{:>5} {:>10.4} {:>10.4}", c.step, c.active_mean, c.random_mean);
    }
    for h in &cmp.halving {
        println!("trial {} (seed {}): active {} steps, random {} steps", h.trial, h.seed, h.active_steps, h.random_steps);
    }
    println!(
        "median steps to halve: active {} random {} (horizon {}); dominance {:.2}",
        cmp.median_halving_active, cmp.median_halving_random, cfg.probing.horizon, cmp.dominance
    );

    let first = &cmp.trials[0].active_log;
    for r in first.iter().take(5) {
        println!(
            "k={} target trace {:.3} gamma {:.4} accel {:+.1} realized {:.3}",
            r.k,
            r.f_star.unwrap_or(f64::NAN),
            r.gamma_star.unwrap_or(f64::NAN),
            r.accel,
            r.realized_trace
        );
    }
    Ok(())
}
