//! Track an adaptive radar's hidden belief with the policy known, and with the
//! policy learned alongside it. ESS is reported before resampling.

use invradar::forward::{propagate_state, CognitiveRadar, KinematicState};
use invradar::inverse::{belief_summary, init_ensemble_with_tracker, ipf_step_known_policy, ipfddp_step};
use invradar::{Purpose, ScenarioConfig, Streams};

fn main() -> invradar::Result<()> {
    let cfg = ScenarioConfig::probing_benchmark();
    let motion = cfg.motion_model(cfg.motion.dt)?;
    let observation = cfg.observation_model()?;
    let policy = cfg.policy_spec()?;
    let opts = cfg.filter_options();
    let streams = Streams::new(9);
    let accel = cfg.accel_grid();

    let mut radar = CognitiveRadar {
        tracker: cfg.tracker(),
        policy: policy.clone(),
        observation: observation.clone(),
    };
    let mut known = init_ensemble_with_tracker(200, cfg.tracker(), cfg.ddp_prior()?);
    let mut learned = known.clone();
    let mut x = KinematicState::new(cfg.motion.initial_state[0], cfg.motion.initial_state[1]);

    for k in 1..=300u64 {
        let prev = x;
        let a = accel[(k as usize / 25) % accel.len()];
        x = propagate_state(&x, &motion, &mut streams.rng(Purpose::TargetNoise, k), Some(a));
        let d = radar.dwell(
            &x,
            &motion,
            &mut streams.rng(Purpose::RadarMeasurement, k),
            &mut streams.rng(Purpose::RadarAction, k),
        )?;
        let rng = &mut streams.rng(Purpose::Learner, k);
        let rk = ipf_step_known_policy(&mut known, &prev, &x, d.action, &motion, &observation, &policy, &opts, rng)?;
        let rl = ipfddp_step(&mut learned, &prev, &x, d.action, &motion, &observation, &opts, rng)?;
        if k % 30 == 0 {
            let sk = belief_summary(&known);
            let sl = belief_summary(&learned);
            println!(
                "k={k:3} radar trace {:.3} | known policy {:.3} (ess {:5.1}) | learned policy {:.3} (ess {:5.1})",
                d.predicted_trace, sk.mean_predicted_trace, rk.ess, sl.mean_predicted_trace, rl.ess
            );
        }
    }
    Ok(())
}
