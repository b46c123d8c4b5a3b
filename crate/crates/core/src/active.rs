//! Probe selection by predictive entropy per unit concentration, and the
//! target maneuver that steers the radar's adaptive tracker toward a probe.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ddp::BeliefFeature;
use crate::error::{ensure, Error, Result};
use crate::forward::{propagate_state, CognitiveRadar, KinematicState, MotionModel, ObservationModel, PolicySpec, TrackerState, Vec2};
use crate::inverse::{global_expected_policy, ipfddp_step, tracker_proxy, Ensemble, FilterOptions};
use crate::metrics::{kl_divergence, PolicyPair, DEFAULT_KL_EPSILON};
use crate::rng::{Purpose, Streams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateGrid {
    features: Vec<BeliefFeature>,
}

impl CandidateGrid {
    pub fn new(features: Vec<BeliefFeature>) -> Result<Self> {
        ensure(!features.is_empty(), || "candidate grid is empty".to_string())?;
        ensure(features.iter().all(|f| f.is_finite() && *f > 0.0), || {
            "candidate features must be positive".to_string()
        })?;
        ensure(features.windows(2).all(|w| w[0] < w[1]), || {
            "candidate features must be strictly increasing".to_string()
        })?;
        Ok(CandidateGrid { features })
    }

    /// `n` evenly spaced features over `[lo, hi]`.
    pub fn linspace(lo: f64, hi: f64, n: usize) -> Result<Self> {
        ensure(n >= 1, || "candidate grid needs at least one point".to_string())?;
        if n == 1 {
            return CandidateGrid::new(vec![lo]);
        }
        let step = (hi - lo) / (n - 1) as f64;
        CandidateGrid::new((0..n).map(|i| lo + step * i as f64).collect())
    }

    pub fn features(&self) -> &[BeliefFeature] {
        &self.features
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbePlan {
    pub target_feature: BeliefFeature,
    pub chosen_accel: f64,
    pub predicted_feature: BeliefFeature,
    pub acquisition_value: f64,
}

/// `γ(f) = H(p̄(·|f)) / Σ_i w_i α_i(f)`.
pub fn acquisition_score(e: &Ensemble, f: BeliefFeature) -> f64 {
    let q = global_expected_policy(e, f);
    q.mean.entropy() / q.concentration
}

/// Best-scoring grid feature; ties go to the smallest feature.
pub fn select_probe(e: &Ensemble, grid: &CandidateGrid) -> (BeliefFeature, f64) {
    let mut best = (grid.features[0], acquisition_score(e, grid.features[0]));
    for &f in &grid.features[1..] {
        let g = acquisition_score(e, f);
        if g > best.1 {
            best = (f, g);
        }
    }
    best
}

/// Standard-normal measurement noise shared by every candidate acceleration.
pub fn draw_rollout_noise<R: Rng + ?Sized>(rollouts: usize, rng: &mut R) -> Vec<Vec2> {
    (0..rollouts)
        .map(|_| Vec2::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect()
}

/// Expected predicted trace two revisits ahead if the target applies
/// `accel` now: the tracker sees the maneuvered state, adapts its process
/// noise from the new innovation, and predicts again.
pub fn rollout_trace(
    accel: f64,
    current: &KinematicState,
    proxy: &TrackerState,
    motion: &MotionModel,
    observation: &ObservationModel,
    noise: &[Vec2],
) -> Result<f64> {
    let x = motion.transition_matrix() * current.to_vector() + motion.accel_gain() * accel;
    let sd = observation.noise_std();
    let mut total = 0.0;
    for z in noise {
        let mut t = proxy.clone();
        t.step(&(x + sd.component_mul(z)), motion, observation)?;
        total += t.predicted(motion).trace();
    }
    Ok(total / noise.len().max(1) as f64)
}

/// Acceleration from `accel_grid` whose expected trace lands closest to
/// `f_star`; ties prefer the smallest magnitude.
#[allow(clippy::too_many_arguments)]
pub fn plan_maneuver<R: Rng + ?Sized>(
    f_star: BeliefFeature,
    gamma_star: f64,
    current: &KinematicState,
    proxy: &TrackerState,
    accel_grid: &[f64],
    motion: &MotionModel,
    observation: &ObservationModel,
    rollouts: usize,
    rng: &mut R,
) -> Result<ProbePlan> {
    ensure(!accel_grid.is_empty(), || "acceleration grid is empty".to_string())?;
    ensure(rollouts >= 1, || "at least one rollout is required".to_string())?;
    let noise = draw_rollout_noise(rollouts, rng);
    let mut best: Option<(f64, f64, f64)> = None;
    for &a in accel_grid {
        let trace = rollout_trace(a, current, proxy, motion, observation, &noise)?;
        let err = (trace - f_star).abs();
        let better = match best {
            None => true,
            Some((e, ba, _)) => err < e || (err == e && a.abs() < ba.abs()),
        };
        if better {
            best = Some((err, a, trace));
        }
    }
    let (_, chosen_accel, predicted_feature) = best.expect("non-empty grid");
    Ok(ProbePlan {
        target_feature: f_star,
        chosen_accel,
        predicted_feature,
        acquisition_value: gamma_star,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeMode {
    Active,
    Random,
}

impl fmt::Display for ProbeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProbeMode::Active => "active",
            ProbeMode::Random => "random",
        })
    }
}

impl FromStr for ProbeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "active" => Ok(ProbeMode::Active),
            "random" => Ok(ProbeMode::Random),
            other => Err(Error::Validation(format!("unknown probing mode {other:?}"))),
        }
    }
}

/// The simulated world during probing.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbingScene {
    pub target: KinematicState,
    pub radar: CognitiveRadar,
    /// Index of the last completed revisit; stream draws are keyed by it.
    pub step: u64,
}

#[derive(Clone, Debug)]
pub struct ProbingSetup {
    pub motion: MotionModel,
    pub observation: ObservationModel,
    pub grid: CandidateGrid,
    pub accel_grid: Vec<f64>,
    pub rollouts: usize,
    pub filter: FilterOptions,
    /// Score the ensemble against the radar's true policy every step, and
    /// log the acquisition optimum in random mode as well.
    pub diagnostics: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeLogRecord {
    pub k: u64,
    pub mode: ProbeMode,
    pub f_star: Option<f64>,
    pub gamma_star: Option<f64>,
    pub accel: f64,
    pub realized_trace: f64,
    pub kl_to_truth: Option<f64>,
}

/// Mean KL from the true policy to the ensemble's estimate over the grid.
pub fn grid_kl_to_truth(e: &Ensemble, grid: &CandidateGrid, truth: &PolicySpec) -> Result<f64> {
    let pairs: Vec<PolicyPair> = grid
        .features()
        .iter()
        .map(|&f| PolicyPair {
            feature: f,
            estimated: global_expected_policy(e, f).mean.restricted_to(truth.actions()),
            truth: truth.policy_at(f),
        })
        .collect();
    kl_divergence(&pairs, DEFAULT_KL_EPSILON)
}

pub fn run_probing_loop(
    mode: ProbeMode,
    horizon: usize,
    scene: &mut ProbingScene,
    e: &mut Ensemble,
    setup: &ProbingSetup,
    streams: &Streams,
) -> Result<Vec<ProbeLogRecord>> {
    let mut log = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let k = scene.step + 1;
        let probe = (mode == ProbeMode::Active || setup.diagnostics).then(|| select_probe(e, &setup.grid));
        let accel = match mode {
            ProbeMode::Active => {
                let (f_star, gamma_star) = probe.expect("computed in active mode");
                plan_maneuver(
                    f_star,
                    gamma_star,
                    &scene.target,
                    &tracker_proxy(e),
                    &setup.accel_grid,
                    &setup.motion,
                    &setup.observation,
                    setup.rollouts,
                    &mut streams.rng(Purpose::Planner, k),
                )?
                .chosen_accel
            }
            ProbeMode::Random => {
                let i = streams.rng(Purpose::Maneuver, k).random_range(0..setup.accel_grid.len());
                setup.accel_grid[i]
            }
        };
        let next = propagate_state(
            &scene.target,
            &setup.motion,
            &mut streams.rng(Purpose::TargetNoise, k),
            Some(accel),
        );
        let dwell = scene.radar.dwell(
            &next,
            &setup.motion,
            &mut streams.rng(Purpose::RadarMeasurement, k),
            &mut streams.rng(Purpose::RadarAction, k),
        )?;
        ipfddp_step(
            e,
            &scene.target,
            &next,
            dwell.action,
            &setup.motion,
            &setup.observation,
            &setup.filter,
            &mut streams.rng(Purpose::Learner, k),
        )?;
        let kl_to_truth = if setup.diagnostics {
            Some(grid_kl_to_truth(e, &setup.grid, &scene.radar.policy)?)
        } else {
            None
        };
        scene.target = next;
        scene.step = k;
        log.push(ProbeLogRecord {
            k,
            mode,
            f_star: probe.map(|p| p.0),
            gamma_star: probe.map(|p| p.1),
            accel,
            realized_trace: dwell.predicted_trace,
            kl_to_truth,
        });
    }
    Ok(log)
}
