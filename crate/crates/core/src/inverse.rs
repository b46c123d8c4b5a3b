//! Particle approximation of the learner's joint posterior over the radar's
//! belief and its waveform policy.

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ddp::{trace_feature, BeliefFeature, DdpStats, FeatureMap, PolicyDistribution};
use crate::error::{Error, Result};
use crate::forward::{
    observe, ActionLabel, GaussianBelief, KinematicState, Mat2, MotionModel, ObservationModel, PolicySpec,
    TrackerState, Vec2,
};
use crate::rng::substream;

/// Unnormalized weight sums below this mean the data contradict the model.
pub const MIN_WEIGHT_SUM: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    /// Index of the initial particle this one descends from.
    pub id: usize,
    pub tracker: TrackerState,
    pub last_predicted_trace: BeliefFeature,
    pub ddp: DdpStats,
    pub weight: f64,
}

impl Particle {
    pub fn belief(&self) -> &GaussianBelief {
        &self.tracker.belief
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub particles: Vec<Particle>,
    pub revealed: Vec<ActionLabel>,
    pub step: u64,
    pub ess: f64,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.weight).collect()
    }

    /// Shannon entropy of the weights in nats; `ln N` when uniform.
    pub fn weight_entropy(&self) -> f64 {
        self.particles
            .iter()
            .map(|p| p.weight)
            .filter(|w| *w > 0.0)
            .map(|w| -w * w.ln())
            .sum()
    }

    fn refresh_ess(&mut self) {
        self.ess = effective_sample_size(&self.weights());
    }
}

pub fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

#[derive(Clone, Copy, Debug)]
pub struct FilterOptions {
    /// Multiply weights by the (particle-independent) target transition density.
    pub include_transition_factor: bool,
    /// Resample when ESS falls below this fraction of N.
    pub ess_threshold: f64,
    pub feature_map: FeatureMap,
}

impl Default for FilterOptions {
    fn default() -> Self {
        FilterOptions {
            include_transition_factor: false,
            ess_threshold: 0.5,
            feature_map: trace_feature,
        }
    }
}

/// Outcome of one filtering step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    /// ESS after reweighting, before any resampling.
    pub ess: f64,
    pub resampled: bool,
}

/// `n` particles with fixed-noise trackers at `prior_belief`.
pub fn init_ensemble(n: usize, prior_belief: GaussianBelief, ddp_prior: DdpStats) -> Ensemble {
    init_ensemble_with_tracker(n, TrackerState::fixed(prior_belief), ddp_prior)
}

pub fn init_ensemble_with_tracker(n: usize, tracker: TrackerState, ddp_prior: DdpStats) -> Ensemble {
    assert!(n >= 1, "an ensemble needs at least one particle");
    let w = 1.0 / n as f64;
    let particles = (0..n)
        .map(|id| Particle {
            id,
            tracker: tracker.clone(),
            last_predicted_trace: tracker.belief.trace(),
            ddp: ddp_prior.clone(),
            weight: w,
        })
        .collect();
    let mut e = Ensemble {
        particles,
        revealed: Vec::new(),
        step: 0,
        ess: 0.0,
    };
    e.refresh_ess();
    e
}

/// Density of the least-squares scalar acceleration explaining `x_prev → x_k`.
///
/// The white-acceleration process noise is rank one, so the Gaussian
/// transition has no density on the plane; its density along the
/// acceleration direction is used instead.
pub fn transition_density(x_prev: &KinematicState, x_k: &KinematicState, m: &MotionModel) -> f64 {
    let sd = m.accel_noise_std();
    if sd == 0.0 {
        return 1.0;
    }
    let r = x_k.to_vector() - m.transition_matrix() * x_prev.to_vector();
    let g = m.accel_gain();
    let a = g.dot(&r) / g.dot(&g);
    (-(a * a) / (2.0 * sd * sd)).exp() / ((2.0 * std::f64::consts::PI).sqrt() * sd)
}

/// Run each particle's tracker on its own simulated measurement of `x_k`
/// and multiply its weight by `likelihood(particle, predicted feature)`.
fn propagate_particles<F>(
    e: &mut Ensemble,
    x_k: &KinematicState,
    motion: &MotionModel,
    observation: &ObservationModel,
    opts: &FilterOptions,
    rng: &mut dyn RngCore,
    likelihood: F,
) -> Result<()>
where
    F: Fn(&mut Particle, BeliefFeature, f64) -> Result<f64> + Sync,
{
    let seed = rng.next_u64();
    e.particles.par_iter_mut().enumerate().try_for_each(|(i, p)| {
        let mut prng = substream(seed, i as u64);
        let y = observe(x_k, observation, &mut prng);
        let out = p.tracker.step(&y, motion, observation)?;
        let trace = out.predicted.trace();
        let f = (opts.feature_map)(&out.predicted);
        let l = likelihood(p, f, trace)?;
        p.last_predicted_trace = trace;
        p.weight *= l;
        Ok(())
    })
}

fn normalize(e: &mut Ensemble, extra_factor: f64) -> Result<()> {
    let sum: f64 = e.particles.iter().map(|p| p.weight * extra_factor).sum();
    if !sum.is_finite() || sum < MIN_WEIGHT_SUM {
        return Err(Error::AllWeightsZero { sum });
    }
    for p in &mut e.particles {
        p.weight = p.weight * extra_factor / sum;
    }
    e.refresh_ess();
    Ok(())
}

fn reveal(e: &mut Ensemble, a: ActionLabel) {
    if !e.revealed.contains(&a) {
        e.revealed.push(a);
    }
}

/// One step of joint belief and policy inference from the observed target
/// transition `x_prev → x_k` and the radar's emitted action `a_k`.
///
/// On error the ensemble is left partially updated.
#[allow(clippy::too_many_arguments)]
pub fn ipfddp_step(
    e: &mut Ensemble,
    x_prev: &KinematicState,
    x_k: &KinematicState,
    a_k: ActionLabel,
    motion: &MotionModel,
    observation: &ObservationModel,
    opts: &FilterOptions,
    rng: &mut dyn RngCore,
) -> Result<StepReport> {
    let revealed = e.revealed.clone();
    propagate_particles(e, x_k, motion, observation, opts, rng, |p, f, _| {
        let l = p.ddp.predictive_prob(f, a_k, &revealed);
        p.ddp.record_observation(f, a_k)?;
        Ok(l)
    })?;
    let factor = if opts.include_transition_factor {
        transition_density(x_prev, x_k, motion)
    } else {
        1.0
    };
    normalize(e, factor)?;
    reveal(e, a_k);
    e.step += 1;
    let ess = e.ess;
    let resampled = resample_if_needed(e, opts.ess_threshold, rng);
    Ok(StepReport { ess, resampled })
}

/// Baseline step when the radar's policy is known; resamples every step.
#[allow(clippy::too_many_arguments)]
pub fn ipf_step_known_policy(
    e: &mut Ensemble,
    x_prev: &KinematicState,
    x_k: &KinematicState,
    a_k: ActionLabel,
    motion: &MotionModel,
    observation: &ObservationModel,
    known_policy: &PolicySpec,
    opts: &FilterOptions,
    rng: &mut dyn RngCore,
) -> Result<StepReport> {
    propagate_particles(e, x_k, motion, observation, opts, rng, |_, _, trace| {
        Ok(known_policy.prob_of(trace, a_k))
    })?;
    let factor = if opts.include_transition_factor {
        transition_density(x_prev, x_k, motion)
    } else {
        1.0
    };
    normalize(e, factor)?;
    reveal(e, a_k);
    e.step += 1;
    let ess = e.ess;
    resample_multinomial(e, rng);
    Ok(StepReport { ess, resampled: true })
}

/// Systematic offspring counts for a start offset `u0 ∈ [0, 1)`.
pub fn systematic_offspring(weights: &[f64], u0: f64) -> Vec<usize> {
    let n = weights.len();
    let mut counts = vec![0usize; n];
    let mut cum = 0.0;
    let mut j = 0usize;
    for (i, w) in weights.iter().enumerate() {
        cum += w;
        while j < n && (u0 + j as f64) / (n as f64) < cum {
            counts[i] += 1;
            j += 1;
        }
    }
    // Rounding can leave the last few positions unassigned.
    if j < n {
        let last = weights.iter().rposition(|w| *w > 0.0).unwrap_or(n - 1);
        counts[last] += n - j;
    }
    counts
}

fn rebuild(e: &mut Ensemble, counts: &[usize]) {
    let n = e.particles.len();
    let w = 1.0 / n as f64;
    let mut next = Vec::with_capacity(n);
    for (p, c) in e.particles.iter().zip(counts) {
        for _ in 0..*c {
            let mut child = p.clone();
            child.weight = w;
            next.push(child);
        }
    }
    e.particles = next;
    e.refresh_ess();
}

pub fn resample_systematic(e: &mut Ensemble, rng: &mut dyn RngCore) {
    let u0: f64 = rng.random();
    let counts = systematic_offspring(&e.weights(), u0);
    rebuild(e, &counts);
}

pub fn resample_multinomial(e: &mut Ensemble, rng: &mut dyn RngCore) {
    let weights = e.weights();
    let mut cum = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in &weights {
        acc += w;
        cum.push(acc);
    }
    let mut counts = vec![0usize; weights.len()];
    for _ in 0..weights.len() {
        let u: f64 = rng.random::<f64>() * acc;
        let i = cum.partition_point(|c| *c <= u).min(weights.len() - 1);
        counts[i] += 1;
    }
    rebuild(e, &counts);
}

/// Systematic resampling when ESS drops below `threshold_fraction · N`.
pub fn resample_if_needed(e: &mut Ensemble, threshold_fraction: f64, rng: &mut dyn RngCore) -> bool {
    if e.ess < threshold_fraction * e.len() as f64 {
        resample_systematic(e, rng);
        true
    } else {
        false
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalPolicyQuery {
    pub feature: BeliefFeature,
    pub mean: PolicyDistribution,
    pub variance: Vec<(ActionLabel, f64)>,
    /// Variance of the mass of any single unseen atom.
    pub unseen_atom_variance: f64,
    /// Weighted concentration `Σ w_i α_i(f)`.
    pub concentration: f64,
}

/// Weight-averaged policy at feature `f`, with its particle-independence
/// variance.
pub fn global_expected_policy(e: &Ensemble, f: BeliefFeature) -> GlobalPolicyQuery {
    let m = e.revealed.len();
    let mut mean = vec![0.0; m];
    let mut var = vec![0.0; m];
    let mut unseen = 0.0;
    let mut unseen_var = 0.0;
    let mut concentration = 0.0;
    for p in &e.particles {
        let post = p.ddp.posterior_at(f);
        let w = p.weight;
        let scale = w * w / (post.alpha + 1.0);
        for (j, a) in e.revealed.iter().enumerate() {
            let h = post.measure.prob(*a);
            mean[j] += w * h;
            var[j] += scale * h * (1.0 - h);
        }
        let hu = post.measure.unseen_atom_prob();
        unseen += w * hu;
        unseen_var += scale * hu * (1.0 - hu);
        concentration += w * post.alpha;
    }
    let cap = e.particles[0].ddp.base().universe_cap();
    let unseen_atoms = cap.saturating_sub(m);
    let mut unseen_prob = unseen * unseen_atoms as f64;
    let total: f64 = mean.iter().sum::<f64>() + unseen_prob;
    if total > 0.0 {
        mean.iter_mut().for_each(|v| *v /= total);
        unseen_prob /= total;
    }
    GlobalPolicyQuery {
        feature: f,
        mean: PolicyDistribution {
            probs: e.revealed.iter().copied().zip(mean).collect(),
            unseen_prob,
            unseen_atoms,
        },
        variance: e.revealed.iter().copied().zip(var).collect(),
        unseen_atom_variance: unseen_var,
        concentration,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefSummary {
    pub mean: Vec2,
    pub mean_cov: Mat2,
    pub mean_posterior_trace: f64,
    pub mean_predicted_trace: f64,
    /// Weighted standard deviation of the particle means.
    pub spread: Vec2,
}

pub fn belief_summary(e: &Ensemble) -> BeliefSummary {
    let mut mean = Vec2::zeros();
    let mut cov = Mat2::zeros();
    let mut post_trace = 0.0;
    let mut pred_trace = 0.0;
    for p in &e.particles {
        mean += p.weight * p.belief().mean;
        cov += p.weight * p.belief().cov;
        post_trace += p.weight * p.belief().trace();
        pred_trace += p.weight * p.last_predicted_trace;
    }
    let mut second = Vec2::zeros();
    for p in &e.particles {
        let d = p.belief().mean - mean;
        second += p.weight * d.component_mul(&d);
    }
    BeliefSummary {
        mean,
        mean_cov: cov,
        mean_posterior_trace: post_trace,
        mean_predicted_trace: pred_trace,
        spread: second.map(f64::sqrt),
    }
}

/// Learner's stand-in for the radar's tracker: the ensemble mean belief with
/// the innovation window and gain of the heaviest particle.
pub fn tracker_proxy(e: &Ensemble) -> TrackerState {
    let best = e
        .particles
        .iter()
        .enumerate()
        .fold(0usize, |best, (i, p)| if p.weight > e.particles[best].weight { i } else { best });
    let summary = belief_summary(e);
    let mut proxy = e.particles[best].tracker.clone();
    proxy.belief = GaussianBelief::posterior(summary.mean, summary.mean_cov);
    proxy
}
