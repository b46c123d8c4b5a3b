//! Target motion, radar measurement, the radar's Kalman tracker and its
//! belief-partitioned waveform policy.

use std::collections::VecDeque;
use std::fmt;

use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;

/// Innovation covariances worse conditioned than this are rejected.
pub const MAX_INNOVATION_CONDITION: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KinematicState {
    /// meters
    pub range: f64,
    /// meters / second
    pub range_rate: f64,
}

impl KinematicState {
    pub fn new(range: f64, range_rate: f64) -> Self {
        KinematicState { range, range_rate }
    }

    pub fn to_vector(&self) -> Vec2 {
        Vec2::new(self.range, self.range_rate)
    }

    pub fn from_vector(v: &Vec2) -> Self {
        KinematicState::new(v[0], v[1])
    }
}

/// Constant-velocity motion driven by white acceleration noise.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionModel {
    dt: f64,
    accel_noise_std: f64,
    transition_matrix: Mat2,
    process_noise: Mat2,
}

impl MotionModel {
    pub fn new(dt: f64, accel_noise_std: f64) -> Result<Self> {
        ensure(dt.is_finite() && dt > 0.0, || format!("dt must be positive, got {dt}"))?;
        ensure(accel_noise_std.is_finite() && accel_noise_std >= 0.0, || {
            format!("accel noise std must be non-negative, got {accel_noise_std}")
        })?;
        let var = accel_noise_std * accel_noise_std;
        Ok(MotionModel {
            dt,
            accel_noise_std,
            transition_matrix: Mat2::new(1.0, dt, 0.0, 1.0),
            process_noise: Mat2::new(
                var * dt.powi(4) / 4.0,
                var * dt.powi(3) / 2.0,
                var * dt.powi(3) / 2.0,
                var * dt * dt,
            ),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn accel_noise_std(&self) -> f64 {
        self.accel_noise_std
    }

    pub fn transition_matrix(&self) -> &Mat2 {
        &self.transition_matrix
    }

    pub fn process_noise(&self) -> &Mat2 {
        &self.process_noise
    }

    /// Maps a scalar acceleration over one interval into the state: `[dt²/2, dt]`.
    pub fn accel_gain(&self) -> Vec2 {
        Vec2::new(self.dt * self.dt / 2.0, self.dt)
    }
}

/// Identity observation of range and range rate with diagonal noise.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationModel {
    range_noise_std: f64,
    range_rate_noise_std: f64,
    obs_matrix: Mat2,
    obs_noise: Mat2,
}

impl ObservationModel {
    /// Noise is given as standard deviations. Zero is allowed for simulation,
    /// but a tracker then needs a non-singular predicted covariance.
    pub fn new(range_noise_std: f64, range_rate_noise_std: f64) -> Result<Self> {
        for (name, v) in [("range", range_noise_std), ("range rate", range_rate_noise_std)] {
            ensure(v.is_finite() && v >= 0.0, || {
                format!("{name} noise std must be non-negative, got {v}")
            })?;
        }
        Ok(ObservationModel {
            range_noise_std,
            range_rate_noise_std,
            obs_matrix: Mat2::identity(),
            obs_noise: Mat2::new(
                range_noise_std * range_noise_std,
                0.0,
                0.0,
                range_rate_noise_std * range_rate_noise_std,
            ),
        })
    }

    pub fn obs_matrix(&self) -> &Mat2 {
        &self.obs_matrix
    }

    pub fn obs_noise(&self) -> &Mat2 {
        &self.obs_noise
    }

    pub fn noise_std(&self) -> Vec2 {
        Vec2::new(self.range_noise_std, self.range_rate_noise_std)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BeliefKind {
    Predicted,
    Posterior,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianBelief {
    pub mean: Vec2,
    pub cov: Mat2,
    pub kind: BeliefKind,
}

impl GaussianBelief {
    pub fn posterior(mean: Vec2, cov: Mat2) -> Self {
        GaussianBelief {
            mean,
            cov,
            kind: BeliefKind::Posterior,
        }
    }

    pub fn trace(&self) -> f64 {
        self.cov.trace()
    }

    /// Symmetric, numerically PSD, positive trace.
    pub fn is_well_formed(&self) -> bool {
        let c = &self.cov;
        let scale = 1.0 + c.abs().max();
        if (c[(0, 1)] - c[(1, 0)]).abs() > 1e-9 * scale {
            return false;
        }
        let (lo, _) = sym_eigenvalues(c);
        lo >= -1e-12 * scale && self.trace() > 0.0 && self.mean.iter().all(|v| v.is_finite())
    }
}

/// Eigenvalues `(min, max)` of the symmetric part of a 2×2 matrix.
pub fn sym_eigenvalues(m: &Mat2) -> (f64, f64) {
    let a = m[(0, 0)];
    let d = m[(1, 1)];
    let b = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let mid = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    (mid - rad, mid + rad)
}

/// Opaque categorical waveform label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionLabel(pub u32);

impl fmt::Display for ActionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "u{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Phi1,
    Phi2,
    Phi3,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Phi1, Region::Phi2, Region::Phi3];

    pub fn index(self) -> usize {
        match self {
            Region::Phi1 => 0,
            Region::Phi2 => 1,
            Region::Phi3 => 2,
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "phi{}", self.index() + 1)
    }
}

/// Waveform policy that depends on the belief only through the predicted
/// covariance trace, piecewise constant over three regions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    thresholds: (f64, f64),
    region_policies: [[f64; 3]; 3],
    actions: [ActionLabel; 3],
}

impl PolicySpec {
    pub fn new(
        thresholds: (f64, f64),
        region_policies: [[f64; 3]; 3],
        actions: [ActionLabel; 3],
    ) -> Result<Self> {
        let (t1, t2) = thresholds;
        ensure(t1.is_finite() && t2.is_finite() && t1 < t2, || {
            format!("thresholds must satisfy t1 < t2, got ({t1}, {t2})")
        })?;
        for (i, row) in region_policies.iter().enumerate() {
            ensure(row.iter().all(|p| p.is_finite() && *p >= 0.0), || {
                format!("policy row {i} has a negative or non-finite entry")
            })?;
            let s: f64 = row.iter().sum();
            ensure((s - 1.0).abs() <= 1e-12, || format!("policy row {i} sums to {s}"))?;
        }
        ensure(
            actions[0] != actions[1] && actions[0] != actions[2] && actions[1] != actions[2],
            || "action labels must be distinct".to_string(),
        )?;
        Ok(PolicySpec {
            thresholds,
            region_policies,
            actions,
        })
    }

    /// Thresholds (0.49, 0.56) with rows favouring u1, u2, u3 in turn.
    pub fn nominal() -> Self {
        PolicySpec::new(
            (0.49, 0.56),
            [[0.6, 0.3, 0.1], [0.1, 0.6, 0.3], [0.3, 0.1, 0.6]],
            [ActionLabel(1), ActionLabel(2), ActionLabel(3)],
        )
        .expect("nominal policy is valid")
    }

    pub fn thresholds(&self) -> (f64, f64) {
        self.thresholds
    }

    pub fn actions(&self) -> &[ActionLabel; 3] {
        &self.actions
    }

    pub fn region_policies(&self) -> &[[f64; 3]; 3] {
        &self.region_policies
    }

    /// `Φ₁: σ ≤ τ₁`, `Φ₂: τ₁ < σ ≤ τ₂`, `Φ₃: σ > τ₂`.
    pub fn region_of(&self, trace: f64) -> Region {
        if trace <= self.thresholds.0 {
            Region::Phi1
        } else if trace <= self.thresholds.1 {
            Region::Phi2
        } else {
            Region::Phi3
        }
    }

    pub fn row(&self, region: Region) -> [f64; 3] {
        self.region_policies[region.index()]
    }

    pub fn policy_at(&self, trace: f64) -> [f64; 3] {
        self.row(self.region_of(trace))
    }

    /// Probability of emitting `action` at this trace; zero for labels
    /// outside the policy's action set.
    pub fn prob_of(&self, trace: f64, action: ActionLabel) -> f64 {
        self.actions
            .iter()
            .position(|a| *a == action)
            .map(|i| self.policy_at(trace)[i])
            .unwrap_or(0.0)
    }
}

pub fn propagate_state<R: Rng + ?Sized>(
    x: &KinematicState,
    m: &MotionModel,
    rng: &mut R,
    maneuver_accel: Option<f64>,
) -> KinematicState {
    let z: f64 = rng.sample(StandardNormal);
    let g = m.accel_gain();
    let mut next = m.transition_matrix() * x.to_vector() + g * (m.accel_noise_std() * z);
    if let Some(a) = maneuver_accel {
        next += g * a;
    }
    if next[0] < 0.0 {
        log::debug!("range {} clamped at 0", next[0]);
        next[0] = 0.0;
    }
    KinematicState::from_vector(&next)
}

pub fn observe<R: Rng + ?Sized>(x: &KinematicState, o: &ObservationModel, rng: &mut R) -> Vec2 {
    let z = Vec2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
    o.obs_matrix() * x.to_vector() + o.noise_std().component_mul(&z)
}

#[derive(Clone, Debug, PartialEq)]
pub struct KalmanOutput {
    pub predicted: GaussianBelief,
    pub posterior: GaussianBelief,
    pub innovation: Vec2,
    pub gain: Mat2,
}

/// Time update only.
pub fn predict(prior: &GaussianBelief, m: &MotionModel, q_override: Option<&Mat2>) -> GaussianBelief {
    let a = m.transition_matrix();
    let q = q_override.unwrap_or(m.process_noise());
    GaussianBelief {
        mean: a * prior.mean,
        cov: a * prior.cov * a.transpose() + q,
        kind: BeliefKind::Predicted,
    }
}

pub fn kalman_step(
    prior: &GaussianBelief,
    y: &Vec2,
    m: &MotionModel,
    o: &ObservationModel,
    q_override: Option<&Mat2>,
) -> Result<KalmanOutput> {
    debug_assert_eq!(prior.kind, BeliefKind::Posterior);
    let predicted = predict(prior, m, q_override);
    let h = o.obs_matrix();
    let s = h * predicted.cov * h.transpose() + o.obs_noise();
    let (lo, hi) = sym_eigenvalues(&s);
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if condition.is_nan() || condition > MAX_INNOVATION_CONDITION {
        return Err(Error::SingularInnovationCovariance { condition });
    }
    let s_inv = s
        .try_inverse()
        .ok_or(Error::SingularInnovationCovariance { condition })?;
    let gain = predicted.cov * h.transpose() * s_inv;
    let innovation = y - h * predicted.mean;
    let cov = (Mat2::identity() - gain * h) * predicted.cov;
    let posterior = GaussianBelief::posterior(predicted.mean + gain * innovation, 0.5 * (cov + cov.transpose()));
    Ok(KalmanOutput {
        predicted,
        posterior,
        innovation,
        gain,
    })
}

pub fn classify_and_policy(predicted: &GaussianBelief, spec: &PolicySpec) -> (Region, [f64; 3]) {
    debug_assert_eq!(predicted.kind, BeliefKind::Predicted);
    let region = spec.region_of(predicted.trace());
    (region, spec.row(region))
}

/// Categorical draw of one label, `policy[i]` being the mass of `actions[i]`.
pub fn sample_action<R: Rng + ?Sized>(
    policy: &[f64],
    actions: &[ActionLabel],
    rng: &mut R,
) -> Result<ActionLabel> {
    if policy.len() != actions.len() || policy.is_empty() {
        return Err(Error::DegeneratePolicy(format!(
            "{} probabilities for {} actions",
            policy.len(),
            actions.len()
        )));
    }
    if let Some(p) = policy.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(Error::DegeneratePolicy(format!("entry {p} is not a probability")));
    }
    let total: f64 = policy.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::DegeneratePolicy(format!("entries sum to {total}")));
    }
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (p, a) in policy.iter().zip(actions) {
        acc += p;
        if u < acc {
            return Ok(*a);
        }
    }
    let last = policy.iter().rposition(|p| *p > 0.0).unwrap_or(policy.len() - 1);
    Ok(actions[last])
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProcessNoiseEstimate {
    /// `K·C_ν·Kᵀ`, symmetrized.
    pub estimate: Mat2,
    /// The estimate with its diagonal floored at the nominal process noise.
    pub adapted: Mat2,
}

/// Covariance-matching process noise from a window of innovations.
pub fn adaptive_process_noise(innovations: &[Vec2], gain: &Mat2, nominal: &Mat2) -> ProcessNoiseEstimate {
    let mut c = Mat2::zeros();
    for v in innovations {
        c += v * v.transpose();
    }
    if !innovations.is_empty() {
        c /= innovations.len() as f64;
    }
    let q = gain * c * gain.transpose();
    let estimate = 0.5 * (q + q.transpose());
    let mut adapted = estimate;
    for i in 0..2 {
        adapted[(i, i)] = adapted[(i, i)].max(nominal[(i, i)]);
    }
    ProcessNoiseEstimate { estimate, adapted }
}

/// A Kalman tracker, optionally adapting its process noise from recent
/// innovations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackerState {
    pub belief: GaussianBelief,
    pub window: VecDeque<Vec2>,
    /// Zero means the nominal process noise is always used.
    pub window_len: usize,
    pub gain: Option<Mat2>,
}

impl TrackerState {
    pub fn fixed(belief: GaussianBelief) -> Self {
        TrackerState {
            belief,
            window: VecDeque::new(),
            window_len: 0,
            gain: None,
        }
    }

    pub fn adaptive(belief: GaussianBelief, window_len: usize) -> Self {
        TrackerState {
            belief,
            window: VecDeque::with_capacity(window_len + 1),
            window_len,
            gain: None,
        }
    }

    pub fn is_adaptive(&self) -> bool {
        self.window_len > 0
    }

    /// Process noise the next time update will use.
    pub fn process_noise(&self, m: &MotionModel) -> Mat2 {
        match (&self.gain, self.window.is_empty()) {
            (Some(k), false) if self.is_adaptive() => {
                let (a, b) = self.window.as_slices();
                let window: Vec<Vec2> = a.iter().chain(b).copied().collect();
                adaptive_process_noise(&window, k, m.process_noise()).adapted
            }
            _ => *m.process_noise(),
        }
    }

    pub fn predicted(&self, m: &MotionModel) -> GaussianBelief {
        if self.is_adaptive() {
            predict(&self.belief, m, Some(&self.process_noise(m)))
        } else {
            predict(&self.belief, m, None)
        }
    }

    pub fn step(&mut self, y: &Vec2, m: &MotionModel, o: &ObservationModel) -> Result<KalmanOutput> {
        let out = if self.is_adaptive() {
            let q = self.process_noise(m);
            kalman_step(&self.belief, y, m, o, Some(&q))?
        } else {
            kalman_step(&self.belief, y, m, o, None)?
        };
        self.belief = out.posterior.clone();
        if self.is_adaptive() {
            self.window.push_back(out.innovation);
            while self.window.len() > self.window_len {
                self.window.pop_front();
            }
            self.gain = Some(out.gain);
        }
        Ok(out)
    }
}

/// What the radar did during one revisit.
#[derive(Clone, Debug, PartialEq)]
pub struct RadarDwell {
    pub predicted_trace: f64,
    pub region: Region,
    pub action: ActionLabel,
    pub measurement: Vec2,
    pub kalman: KalmanOutput,
}

/// The simulated radar: a tracker plus its waveform policy.
#[derive(Clone, Debug, PartialEq)]
pub struct CognitiveRadar {
    pub tracker: TrackerState,
    pub policy: PolicySpec,
    pub observation: ObservationModel,
}

impl CognitiveRadar {
    /// Measure the target at its new state, pick a waveform from the
    /// predicted belief, and update the track.
    pub fn dwell<R1: Rng + ?Sized, R2: Rng + ?Sized>(
        &mut self,
        x: &KinematicState,
        motion: &MotionModel,
        measurement_rng: &mut R1,
        action_rng: &mut R2,
    ) -> Result<RadarDwell> {
        let measurement = observe(x, &self.observation, measurement_rng);
        let kalman = self.tracker.step(&measurement, motion, &self.observation)?;
        let (region, row) = classify_and_policy(&kalman.predicted, &self.policy);
        let action = sample_action(&row, self.policy.actions(), action_rng)?;
        Ok(RadarDwell {
            predicted_trace: kalman.predicted.trace(),
            region,
            action,
            measurement,
            kalman,
        })
    }
}

/// Steady-state predicted trace of a fixed-noise tracker revisiting every `dt`.
pub fn steady_state_trace(dt: f64, accel_noise_std: f64, o: &ObservationModel) -> Result<f64> {
    let m = MotionModel::new(dt, accel_noise_std)?;
    let mut belief = GaussianBelief::posterior(Vec2::zeros(), Mat2::identity());
    let mut trace = 0.0;
    for _ in 0..400 {
        let out = kalman_step(&belief, &Vec2::zeros(), &m, o, None)?;
        trace = out.predicted.trace();
        belief = out.posterior;
    }
    Ok(trace)
}

/// Revisit intervals of a radar that cycles through track-quality modes.
///
/// Mode `j` holds for `dwell[j]` consecutive revisits at interval `dts[j]`;
/// the cycle starts `phase` revisits in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevisitSchedule {
    pub dts: Vec<f64>,
    pub dwell: Vec<usize>,
    pub phase: usize,
}

impl RevisitSchedule {
    pub fn constant(dt: f64) -> Self {
        RevisitSchedule {
            dts: vec![dt],
            dwell: vec![1],
            phase: 0,
        }
    }

    /// Pick each mode's interval so a fixed-noise tracker settles at the
    /// requested predicted trace.
    pub fn for_trace_levels(
        levels: &[f64],
        dwell: &[usize],
        accel_noise_std: f64,
        o: &ObservationModel,
    ) -> Result<Self> {
        ensure(!levels.is_empty() && levels.len() == dwell.len(), || {
            "revisit levels and dwell lengths must be non-empty and equally long".to_string()
        })?;
        ensure(dwell.iter().all(|d| *d > 0), || "dwell lengths must be positive".to_string())?;
        let (lo_dt, hi_dt) = (1e-3, 20.0);
        let lo_tr = steady_state_trace(lo_dt, accel_noise_std, o)?;
        let hi_tr = steady_state_trace(hi_dt, accel_noise_std, o)?;
        let mut dts = Vec::with_capacity(levels.len());
        for &level in levels {
            ensure(level > lo_tr && level < hi_tr, || {
                format!("trace level {level} is outside the reachable range ({lo_tr}, {hi_tr})")
            })?;
            let (mut lo, mut hi) = (lo_dt, hi_dt);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if steady_state_trace(mid, accel_noise_std, o)? < level {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            dts.push(0.5 * (lo + hi));
        }
        Ok(RevisitSchedule {
            dts,
            dwell: dwell.to_vec(),
            phase: 0,
        })
    }

    pub fn with_phase(mut self, phase: usize) -> Self {
        self.phase = phase % self.period();
        self
    }

    pub fn period(&self) -> usize {
        self.dwell.iter().sum()
    }

    pub fn mode_at(&self, k: usize) -> usize {
        let mut pos = (k + self.phase) % self.period();
        for (j, d) in self.dwell.iter().enumerate() {
            if pos < *d {
                return j;
            }
            pos -= d;
        }
        unreachable!("position within period")
    }

    pub fn dt_at(&self, k: usize) -> f64 {
        self.dts[self.mode_at(k)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn nominal_models() -> (MotionModel, ObservationModel) {
        (MotionModel::new(1.0, 0.2).unwrap(), ObservationModel::new(0.5, 0.3).unwrap())
    }

    #[test]
    fn motion_matrices() {
        let m = MotionModel::new(0.5, 2.0).unwrap();
        assert_eq!(*m.transition_matrix(), Mat2::new(1.0, 0.5, 0.0, 1.0));
        let q = m.process_noise();
        assert_relative_eq!(q[(0, 0)], 4.0 * 0.0625 / 4.0);
        assert_relative_eq!(q[(0, 1)], 4.0 * 0.125 / 2.0);
        assert_relative_eq!(q[(1, 1)], 4.0 * 0.25);
        assert_eq!(q[(0, 1)], q[(1, 0)]);
        assert!(MotionModel::new(0.0, 1.0).is_err());
        assert!(MotionModel::new(1.0, -1.0).is_err());
    }

    #[test]
    fn noiseless_propagation() {
        let m = MotionModel::new(1.0, 0.0).unwrap();
        let mut rng = substream(1, 0);
        let x = propagate_state(&KinematicState::new(1000.0, -5.0), &m, &mut rng, None);
        assert_eq!(x, KinematicState::new(995.0, -5.0));
        let x = propagate_state(&KinematicState::new(1000.0, 0.0), &m, &mut rng, Some(2.0));
        assert_eq!(x, KinematicState::new(1001.0, 2.0));
    }

    #[test]
    fn range_is_clamped_at_zero() {
        let m = MotionModel::new(1.0, 0.0).unwrap();
        let x = propagate_state(&KinematicState::new(3.0, -5.0), &m, &mut substream(1, 0), None);
        assert_eq!(x.range, 0.0);
        assert_eq!(x.range_rate, -5.0);
    }

    #[test]
    fn propagation_mean_monte_carlo() {
        let m = MotionModel::new(0.5, 1.0).unwrap();
        let x0 = KinematicState::new(1000.0, -5.0);
        let mut rng = substream(7, 0);
        let n = 100_000;
        let mut sum = Vec2::zeros();
        for _ in 0..n {
            sum += propagate_state(&x0, &m, &mut rng, None).to_vector();
        }
        let mean = sum / n as f64;
        let q = m.process_noise();
        let se = Vec2::new((q[(0, 0)] / n as f64).sqrt(), (q[(1, 1)] / n as f64).sqrt());
        assert!((mean[0] - 997.5).abs() <= 3.0 * se[0], "{mean}");
        assert!((mean[1] + 5.0).abs() <= 3.0 * se[1], "{mean}");
    }

    #[test]
    fn noiseless_observation_is_exact() {
        let o = ObservationModel::new(0.0, 0.0).unwrap();
        let x = KinematicState::new(12.5, -3.25);
        assert_eq!(observe(&x, &o, &mut substream(3, 0)), x.to_vector());
    }

    #[test]
    fn observation_variance_monte_carlo() {
        let o = ObservationModel::new(2.0, 1.0).unwrap();
        let x = KinematicState::new(100.0, 1.0);
        let mut rng = substream(11, 0);
        let n = 100_000;
        let ys: Vec<Vec2> = (0..n).map(|_| observe(&x, &o, &mut rng)).collect();
        let mean = ys.iter().sum::<Vec2>() / n as f64;
        let var = ys
            .iter()
            .map(|y| (y - mean).component_mul(&(y - mean)))
            .sum::<Vec2>()
            / (n - 1) as f64;
        assert!((var[0] / 4.0 - 1.0).abs() < 0.05, "{var}");
        assert!((var[1] - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn observation_is_deterministic_per_seed() {
        let (_, o) = nominal_models();
        let x = KinematicState::new(100.0, 1.0);
        let a = observe(&x, &o, &mut substream(5, 2));
        let b = observe(&x, &o, &mut substream(5, 2));
        assert_eq!(a[0].to_bits(), b[0].to_bits());
        assert_eq!(a[1].to_bits(), b[1].to_bits());
    }

    #[test]
    fn uninformative_measurement_keeps_prediction() {
        let m = MotionModel::new(1.0, 0.0).unwrap();
        let o = ObservationModel::new(1e6, 1e6).unwrap();
        let prior = GaussianBelief::posterior(Vec2::new(10.0, 1.0), Mat2::identity());
        let out = kalman_step(&prior, &Vec2::new(500.0, -50.0), &m, &o, None).unwrap();
        assert!(out.gain.abs().max() < 1e-11);
        assert!((out.posterior.mean - out.predicted.mean).abs().max() < 1e-9);
        assert!((out.posterior.cov - out.predicted.cov).abs().max() < 1e-11);
    }

    #[test]
    fn perfect_measurement_pins_mean() {
        let (m, _) = nominal_models();
        let o = ObservationModel::new(1e-6, 1e-6).unwrap();
        let prior = GaussianBelief::posterior(Vec2::new(10.0, 1.0), Mat2::identity());
        let y = Vec2::new(12.0, 0.5);
        let out = kalman_step(&prior, &y, &m, &o, None).unwrap();
        assert!((out.posterior.mean - y).abs().max() < 1e-9);
    }

    #[test]
    fn singular_innovation_covariance_is_rejected() {
        let m = MotionModel::new(1.0, 0.0).unwrap();
        let o = ObservationModel::new(0.0, 0.0).unwrap();
        let prior = GaussianBelief::posterior(Vec2::zeros(), Mat2::zeros());
        let err = kalman_step(&prior, &Vec2::zeros(), &m, &o, None).unwrap_err();
        assert!(matches!(err, Error::SingularInnovationCovariance { .. }));
    }

    #[test]
    fn q_override_replaces_nominal_noise() {
        let (m, o) = nominal_models();
        let prior = GaussianBelief::posterior(Vec2::zeros(), Mat2::identity());
        let q = Mat2::new(2.0, 0.0, 0.0, 3.0);
        let out = kalman_step(&prior, &Vec2::zeros(), &m, &o, Some(&q)).unwrap();
        let a = m.transition_matrix();
        assert_eq!(out.predicted.cov, a * a.transpose() + q);
    }

    #[test]
    fn region_boundaries() {
        let spec = PolicySpec::nominal();
        assert_eq!(spec.region_of(0.2), Region::Phi1);
        assert_eq!(spec.policy_at(0.2), [0.6, 0.3, 0.1]);
        assert_eq!(spec.region_of(0.5), Region::Phi2);
        assert_eq!(spec.policy_at(0.5), [0.1, 0.6, 0.3]);
        assert_eq!(spec.region_of(0.49), Region::Phi1);
        assert_eq!(spec.region_of(0.56), Region::Phi2);
        assert_eq!(spec.region_of(0.5600001), Region::Phi3);
        let b = GaussianBelief {
            mean: Vec2::zeros(),
            cov: Mat2::new(0.1, 0.0, 0.0, 0.1),
            kind: BeliefKind::Predicted,
        };
        assert_eq!(classify_and_policy(&b, &spec), (Region::Phi1, [0.6, 0.3, 0.1]));
    }

    #[test]
    fn policy_validation() {
        let acts = [ActionLabel(1), ActionLabel(2), ActionLabel(3)];
        let rows = *PolicySpec::nominal().region_policies();
        assert!(PolicySpec::new((0.56, 0.49), rows, acts).is_err());
        let mut bad = rows;
        bad[1] = [0.5, 0.5, 0.1];
        assert!(PolicySpec::new((0.49, 0.56), bad, acts).is_err());
        bad[1] = [1.2, -0.2, 0.0];
        assert!(PolicySpec::new((0.49, 0.56), bad, acts).is_err());
        let dup = [ActionLabel(1), ActionLabel(1), ActionLabel(3)];
        assert!(PolicySpec::new((0.49, 0.56), rows, dup).is_err());
    }

    #[test]
    fn deterministic_policy_always_first_action() {
        let acts = [ActionLabel(1), ActionLabel(2), ActionLabel(3)];
        let mut rng = substream(9, 0);
        for _ in 0..1000 {
            assert_eq!(sample_action(&[1.0, 0.0, 0.0], &acts, &mut rng).unwrap(), ActionLabel(1));
        }
    }

    #[test]
    fn action_frequencies_monte_carlo() {
        let acts = [ActionLabel(1), ActionLabel(2), ActionLabel(3)];
        let p = [0.6, 0.3, 0.1];
        let mut rng = substream(13, 0);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            let a = sample_action(&p, &acts, &mut rng).unwrap();
            counts[(a.0 - 1) as usize] += 1;
        }
        for i in 0..3 {
            assert!((counts[i] as f64 / n as f64 - p[i]).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn per_region_histograms_match_rows() {
        let spec = PolicySpec::nominal();
        let mut rng = substream(17, 0);
        for (trace, region) in [(0.3, Region::Phi1), (0.52, Region::Phi2), (0.9, Region::Phi3)] {
            let row = spec.row(region);
            let n = 20_000;
            let mut counts = [0usize; 3];
            for _ in 0..n {
                let a = sample_action(&spec.policy_at(trace), spec.actions(), &mut rng).unwrap();
                counts[(a.0 - 1) as usize] += 1;
            }
            for i in 0..3 {
                assert!((counts[i] as f64 / n as f64 - row[i]).abs() < 0.02);
            }
        }
    }

    #[test]
    fn action_sequence_is_deterministic() {
        let acts = [ActionLabel(1), ActionLabel(2), ActionLabel(3)];
        let draw = |seed| {
            let mut rng = substream(seed, 0);
            (0..50)
                .map(|_| sample_action(&[0.2, 0.5, 0.3], &acts, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(21), draw(21));
    }

    #[test]
    fn negative_policy_entry_is_degenerate() {
        let acts = [ActionLabel(1), ActionLabel(2), ActionLabel(3)];
        let err = sample_action(&[1.1, -0.1, 0.0], &acts, &mut substream(1, 0)).unwrap_err();
        assert!(matches!(err, Error::DegeneratePolicy(_)));
    }

    #[test]
    fn zero_innovations_give_nominal_floor() {
        let (m, _) = nominal_models();
        let est = adaptive_process_noise(&[Vec2::zeros(); 10], &Mat2::identity(), m.process_noise());
        assert_eq!(est.estimate, Mat2::zeros());
        assert_eq!(est.adapted[(0, 0)], m.process_noise()[(0, 0)]);
        assert_eq!(est.adapted[(1, 1)], m.process_noise()[(1, 1)]);
    }

    #[test]
    fn single_innovation_identity_gain() {
        let est = adaptive_process_noise(&[Vec2::new(1.0, 0.0)], &Mat2::identity(), &Mat2::zeros());
        assert_eq!(est.estimate, Mat2::new(1.0, 0.0, 0.0, 0.0));
        assert_eq!(est.adapted, est.estimate);
    }

    #[test]
    fn sustained_acceleration_inflates_process_noise() {
        let (m, o) = nominal_models();
        let mut x = KinematicState::new(20_000.0, -5.0);
        let mut tracker = TrackerState::adaptive(
            GaussianBelief::posterior(x.to_vector(), Mat2::identity()),
            10,
        );
        let mut total = 0.0;
        for k in 0..100u64 {
            x = propagate_state(&x, &m, &mut substream(3, k), Some(3.0));
            total += tracker.process_noise(&m).trace();
            let y = observe(&x, &o, &mut substream(4, k));
            tracker.step(&y, &m, &o).unwrap();
        }
        assert!(total / 100.0 > m.process_noise().trace());
    }

    #[test]
    fn window_is_bounded() {
        let (m, o) = nominal_models();
        let mut tracker = TrackerState::adaptive(GaussianBelief::posterior(Vec2::zeros(), Mat2::identity()), 4);
        for k in 0..12u64 {
            let y = observe(&KinematicState::new(0.0, 0.0), &o, &mut substream(2, k));
            tracker.step(&y, &m, &o).unwrap();
            assert!(tracker.window.len() <= 4);
        }
        assert_eq!(tracker.window.len(), 4);
    }

    #[test]
    fn covariance_does_not_depend_on_measurements() {
        let (m, o) = nominal_models();
        let run = |seed: u64| {
            let mut tracker = TrackerState::fixed(GaussianBelief::posterior(Vec2::zeros(), Mat2::identity()));
            let mut covs = Vec::new();
            let mut x = KinematicState::new(1000.0, -5.0);
            for k in 0..60 {
                x = propagate_state(&x, &m, &mut substream(seed, k), None);
                let y = observe(&x, &o, &mut substream(seed + 1, k));
                let out = tracker.step(&y, &m, &o).unwrap();
                covs.push((out.predicted.cov, out.posterior.cov));
            }
            covs
        };
        assert_eq!(run(1), run(99));
    }

    #[test]
    fn revisit_schedule_hits_levels() {
        let o = ObservationModel::new(0.5, 0.3).unwrap();
        let s = RevisitSchedule::for_trace_levels(&[0.2, 0.5, 0.8], &[4, 2, 4], 0.2, &o).unwrap();
        for (dt, level) in s.dts.iter().zip([0.2, 0.5, 0.8]) {
            assert_relative_eq!(steady_state_trace(*dt, 0.2, &o).unwrap(), level, epsilon = 1e-9);
        }
        assert!(s.dts[0] < s.dts[1] && s.dts[1] < s.dts[2]);
        let modes: Vec<usize> = (0..10).map(|k| s.mode_at(k)).collect();
        assert_eq!(modes, vec![0, 0, 0, 0, 1, 1, 2, 2, 2, 2]);
        let shifted = s.clone().with_phase(5);
        assert_eq!(shifted.mode_at(0), 1);
        assert_eq!(shifted.mode_at(1), 2);
        assert!(RevisitSchedule::for_trace_levels(&[0.0], &[1], 0.2, &o).is_err());
        assert!(RevisitSchedule::for_trace_levels(&[1e6], &[1], 0.2, &o).is_err());
    }

    proptest! {
        #[test]
        fn exactly_one_region(trace in 0.0f64..5.0) {
            let spec = PolicySpec::nominal();
            let (t1, t2) = spec.thresholds();
            let hits = [trace <= t1, trace > t1 && trace <= t2, trace > t2];
            prop_assert_eq!(hits.iter().filter(|h| **h).count(), 1);
            prop_assert!(hits[spec.region_of(trace).index()]);
        }

        #[test]
        fn posterior_trace_never_exceeds_predicted(
            p00 in 0.01f64..10.0, p11 in 0.01f64..10.0, rho in -0.95f64..0.95,
            sr in 0.01f64..3.0, srd in 0.01f64..3.0, dt in 0.1f64..3.0, sa in 0.0f64..2.0,
        ) {
            let m = MotionModel::new(dt, sa).unwrap();
            let o = ObservationModel::new(sr, srd).unwrap();
            let off = rho * (p00 * p11).sqrt();
            let prior = GaussianBelief::posterior(Vec2::zeros(), Mat2::new(p00, off, off, p11));
            let out = kalman_step(&prior, &Vec2::new(1.0, -1.0), &m, &o, None).unwrap();
            prop_assert!(out.posterior.trace() <= out.predicted.trace() + 1e-12);
            prop_assert!(out.posterior.is_well_formed());
            prop_assert!(out.predicted.is_well_formed());
        }

        #[test]
        fn adapted_noise_is_psd_and_floored(
            vs in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..12),
            k in proptest::array::uniform4(-1.0f64..1.0),
        ) {
            let window: Vec<Vec2> = vs.iter().map(|(a, b)| Vec2::new(*a, *b)).collect();
            let gain = Mat2::new(k[0], k[1], k[2], k[3]);
            let nominal = MotionModel::new(1.0, 0.2).unwrap().process_noise().clone_owned();
            let est = adaptive_process_noise(&window, &gain, &nominal);
            let (lo, _) = sym_eigenvalues(&est.adapted);
            prop_assert!(lo >= -1e-12);
            prop_assert!(est.adapted[(0, 0)] >= nominal[(0, 0)]);
            prop_assert!(est.adapted[(1, 1)] >= nominal[(1, 1)]);
            prop_assert_eq!(est.adapted[(0, 1)], est.adapted[(1, 0)]);
        }
    }
}
