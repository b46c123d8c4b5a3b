//! Simulate the radar tracking a target on the cyclic revisit schedule and
//! report how often each policy region is visited.
//!
//! cargo run --example forward_tracking -- [seed] [steps]

use std::collections::BTreeMap;

use invradar::forward::Region;
use invradar::harness::simulate_trajectory;
use invradar::{ScenarioConfig, Streams};

fn main() -> invradar::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));
    let steps: usize = args.next().map_or(400, |s| s.parse().expect("steps"));

    let cfg = ScenarioConfig::policy_benchmark();
    let schedule = cfg.revisit_schedule()?;
    println!("revisit intervals per mode: {:?}", schedule.dts);

    let traj = simulate_trajectory(&cfg, &Streams::new(seed), steps)?;
    let mut visits: Vec<(usize, BTreeMap<u32, usize>)> = vec![Default::default(); 3];
    for r in &traj.records {
        let entry = &mut visits[r.region.index()];
        entry.0 += 1;
        *entry.1.entry(r.action.0).or_default() += 1;
    }
    let policy = cfg.policy_spec()?;
    for (region, (n, actions)) in Region::ALL.iter().zip(&visits) {
        if *n == 0 {
            continue;
        }
        let freq: Vec<String> = policy
            .actions()
            .iter()
            .map(|a| format!("{a}={:.2}", *actions.get(&a.0).unwrap_or(&0) as f64 / *n as f64))
            .collect();
        println!("{region}: {n} revisits, empirical {}, true {:?}", freq.join(" "), policy.row(*region));
    }
    for r in traj.records.iter().step_by(steps.div_ceil(12).max(1)) {
        println!(
            "k={:4} dt={:.3} range={:10.2} trace={:.4} {} {}",
            r.k, r.dt, r.x[0], r.trace_pred, r.region, r.action
        );
    }
    Ok(())
}
