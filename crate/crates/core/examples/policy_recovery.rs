//! Train the inverse filter on one simulated run and compare the recovered
//! policy with the true one in each region. With the default narrow kernel,
//! traces the radar never revisits (0.35, 0.65 here) stay at the prior.
//!
//! cargo run --release --example policy_recovery -- [seed] [train_steps]

use invradar::harness::{run_random_probing_detailed, TestSet};
use invradar::inverse::belief_summary;
use invradar::ScenarioConfig;

fn main() -> invradar::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));
    let steps: usize = args.next().map_or(2000, |s| s.parse().expect("train steps"));

    let cfg = ScenarioConfig::policy_benchmark().with_train_steps(steps);
    let out = run_random_probing_detailed(&cfg, seed, &TestSet::Fixed(vec![0.2, 0.35, 0.5, 0.65, 0.8]))?;
    println!("trained on {steps} revisits, revealed actions {:?}", out.ensemble.revealed);
    for p in &out.pairs {
        println!(
            "trace {:.2}: estimated [{:.3} {:.3} {:.3}] true [{:.1} {:.1} {:.1}]",
            p.feature, p.estimated[0], p.estimated[1], p.estimated[2], p.truth[0], p.truth[1], p.truth[2]
        );
    }
    let s = belief_summary(&out.ensemble);
    let last = out.record.trajectory.last().expect("non-empty run");
    println!(
        "final belief mean ({:.2}, {:.3}) vs target ({:.2}, {:.3}), spread ({:.3}, {:.3})",
        s.mean[0], s.mean[1], last.x[0], last.x[1], s.spread[0], s.spread[1]
    );
    let r = out.record.report;
    println!("mse {:.4} kl {:.4} rank_acc {:.3}", r.mse, r.kl, r.rank_acc);
    Ok(())
}
