//! Predictive action probabilities of the kernel-smoothed urn at a few belief
//! features, for a narrow and a wide kernel.

use invradar::ddp::{DdpStats, KernelParams};
use invradar::forward::ActionLabel;

fn main() -> invradar::Result<()> {
    let history = [
        (0.20, 1),
        (0.21, 1),
        (0.19, 2),
        (0.50, 2),
        (0.52, 2),
        (0.80, 3),
        (0.81, 3),
        (0.79, 1),
    ];
    for length_scale in [0.02, 10.0] {
        let mut stats = DdpStats::new(2.0, 5, KernelParams::new(1.0, length_scale)?)?;
        for (f, a) in history {
            stats.record_observation(f, ActionLabel(a))?;
        }
        println!("length scale {length_scale}");
        for f in [0.2, 0.5, 0.8, 3.0] {
            let post = stats.posterior_at(f);
            let probs: Vec<String> = post.measure.probs.iter().map(|(a, p)| format!("{a}={p:.3}")).collect();
            println!(
                "  f={f:.1} alpha={:6.3} {} each unseen={:.3} entropy={:.3}",
                post.alpha,
                probs.join(" "),
                post.measure.unseen_atom_prob(),
                post.measure.entropy()
            );
        }
    }
    Ok(())
}
