//! Scenario configuration: JSON loading, validation, presets and the model
//! objects derived from it.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::active::{CandidateGrid, ProbeMode};
use crate::ddp::{DdpStats, KernelParams};
use crate::error::{ensure, Error, Result};
use crate::forward::{
    ActionLabel, GaussianBelief, Mat2, MotionModel, ObservationModel, PolicySpec, RevisitSchedule, TrackerState,
    Vec2,
};
use crate::inverse::FilterOptions;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionConfig {
    pub dt: f64,
    pub accel_noise_std: f64,
    pub initial_state: [f64; 2],
    pub initial_cov: [[f64; 2]; 2],
    /// Cycle the revisit interval through track-quality modes instead of
    /// revisiting every `dt`.
    #[serde(default)]
    pub revisit: Option<RevisitConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RevisitConfig {
    pub trace_levels: Vec<f64>,
    pub dwell: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationConfig {
    pub range_noise_std: f64,
    pub range_rate_noise_std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub thresholds: [f64; 2],
    pub rows: [[f64; 3]; 3],
    pub actions: [u32; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DdpConfig {
    pub alpha0: f64,
    pub length_scale: f64,
    pub signal_var: f64,
    pub universe_cap: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub particles: usize,
    pub ess_threshold: f64,
    pub include_transition_factor: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbingConfig {
    /// Radar adapts its process noise from recent innovations.
    pub adaptive: bool,
    pub window: usize,
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_points: usize,
    pub accel_min: f64,
    pub accel_max: f64,
    pub accel_points: usize,
    pub rollouts: usize,
    pub warmstart: usize,
    pub horizon: usize,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub train_steps: usize,
    pub test_points: usize,
    pub seeds: Vec<u64>,
    pub bandwidths: Vec<f64>,
    pub train_sizes: Vec<usize>,
    pub mode: ProbeMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub motion: MotionConfig,
    pub observation: ObservationConfig,
    pub policy: PolicyConfig,
    pub ddp: DdpConfig,
    pub filter: FilterConfig,
    pub probing: ProbingConfig,
    pub experiment: ExperimentConfig,
}

impl ScenarioConfig {
    /// One-second revisits, σ_a = 0.2, σ_r = 0.5, σ_ṙ = 0.3.
    pub fn nominal() -> Self {
        ScenarioConfig {
            motion: MotionConfig {
                dt: 1.0,
                accel_noise_std: 0.2,
                initial_state: [1000.0, -5.0],
                initial_cov: [[1.0, 0.0], [0.0, 1.0]],
                revisit: None,
            },
            observation: ObservationConfig {
                range_noise_std: 0.5,
                range_rate_noise_std: 0.3,
            },
            policy: PolicyConfig {
                thresholds: [0.49, 0.56],
                rows: [[0.6, 0.3, 0.1], [0.1, 0.6, 0.3], [0.3, 0.1, 0.6]],
                actions: [1, 2, 3],
            },
            ddp: DdpConfig {
                alpha0: 20.0,
                length_scale: 1e-4,
                signal_var: 1.0,
                universe_cap: 8,
            },
            filter: FilterConfig {
                particles: 100,
                ess_threshold: 0.5,
                include_transition_factor: false,
            },
            probing: ProbingConfig {
                adaptive: false,
                window: 10,
                grid_min: 0.1,
                grid_max: 1.0,
                grid_points: 50,
                accel_min: -5.0,
                accel_max: 5.0,
                accel_points: 21,
                rollouts: 32,
                warmstart: 200,
                horizon: 200,
                trials: 100,
            },
            experiment: ExperimentConfig {
                train_steps: 2000,
                test_points: 200,
                seeds: (0..10).collect(),
                bandwidths: vec![1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0],
                train_sizes: vec![30, 500, 2000],
                mode: ProbeMode::Random,
            },
        }
    }

    /// The radar cycles its revisit interval so its predicted trace settles
    /// at 0.2, 0.5 and 0.8 for 40, 20 and 40 revisits.
    pub fn policy_benchmark() -> Self {
        let mut c = ScenarioConfig::nominal();
        c.motion.initial_state = [50_000.0, -5.0];
        c.motion.revisit = Some(RevisitConfig {
            trace_levels: vec![0.2, 0.5, 0.8],
            dwell: vec![40, 20, 40],
        });
        c
    }

    /// Adaptive radar on a quiet target, steerable by accelerations up to
    /// 1 m/s².
    pub fn probing_benchmark() -> Self {
        let mut c = ScenarioConfig::nominal();
        c.motion.accel_noise_std = 0.05;
        c.motion.initial_state = [50_000.0, -5.0];
        c.observation = ObservationConfig {
            range_noise_std: 0.05,
            range_rate_noise_std: 0.05,
        };
        c.ddp.length_scale = 0.04;
        c.filter.particles = 20;
        c.probing.adaptive = true;
        c.probing.accel_min = -1.0;
        c.probing.accel_max = 1.0;
        c.probing.trials = 50;
        c.experiment.mode = ProbeMode::Active;
        c
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "nominal" => Ok(ScenarioConfig::nominal()),
            "policy_benchmark" => Ok(ScenarioConfig::policy_benchmark()),
            "probing_benchmark" => Ok(ScenarioConfig::probing_benchmark()),
            other => Err(Error::Validation(format!("unknown preset {other:?}"))),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let c: ScenarioConfig = serde_json::from_str(s).map_err(|e| Error::Validation(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ScenarioConfig::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON encoding, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn validate(&self) -> Result<()> {
        MotionModel::new(self.motion.dt, self.motion.accel_noise_std)?;
        ensure(self.motion.initial_state.iter().all(|v| v.is_finite()), || {
            "initial state must be finite".to_string()
        })?;
        let belief = self.initial_belief();
        ensure(belief.is_well_formed(), || {
            "initial covariance must be symmetric positive semi-definite with positive trace".to_string()
        })?;
        self.observation_model()?;
        if let Some(r) = &self.motion.revisit {
            ensure(!r.trace_levels.is_empty() && r.trace_levels.len() == r.dwell.len(), || {
                "revisit trace levels and dwell lengths must be non-empty and equally long".to_string()
            })?;
        }
        self.policy_spec()?;
        self.kernel()?;
        ensure(self.ddp.universe_cap >= 3, || {
            format!(
                "universe cap {} is smaller than the 3 simulated actions",
                self.ddp.universe_cap
            )
        })?;
        DdpStats::new(self.ddp.alpha0, self.ddp.universe_cap, self.kernel()?)?;
        ensure(self.filter.particles >= 1, || "at least one particle is required".to_string())?;
        ensure((0.0..=1.0).contains(&self.filter.ess_threshold), || {
            "ESS threshold must lie in [0, 1]".to_string()
        })?;
        let p = &self.probing;
        ensure(!p.adaptive || p.window >= 1, || "adaptive tracking needs a window of at least 1".to_string())?;
        ensure(p.grid_points >= 1 && p.grid_min > 0.0 && p.grid_min < p.grid_max, || {
            "candidate grid needs 0 < grid_min < grid_max and at least one point".to_string()
        })?;
        ensure(
            p.accel_points >= 1 && p.accel_min <= p.accel_max && p.accel_min.is_finite() && p.accel_max.is_finite(),
            || "acceleration grid needs accel_min ≤ accel_max and at least one point".to_string(),
        )?;
        ensure(p.rollouts >= 1, || "at least one planner rollout is required".to_string())?;
        ensure(p.trials >= 1, || "at least one probing trial is required".to_string())?;
        let x = &self.experiment;
        ensure(x.test_points >= 1, || "test set must be non-empty".to_string())?;
        ensure(!x.seeds.is_empty(), || "seed list must be non-empty".to_string())?;
        for l in &x.bandwidths {
            ensure(l.is_finite() && *l > 0.0, || format!("bandwidth {l} must be positive"))?;
        }
        Ok(())
    }

    pub fn motion_model(&self, dt: f64) -> Result<MotionModel> {
        MotionModel::new(dt, self.motion.accel_noise_std)
    }

    pub fn observation_model(&self) -> Result<ObservationModel> {
        ObservationModel::new(self.observation.range_noise_std, self.observation.range_rate_noise_std)
    }

    pub fn policy_spec(&self) -> Result<PolicySpec> {
        let p = &self.policy;
        PolicySpec::new(
            (p.thresholds[0], p.thresholds[1]),
            p.rows,
            p.actions.map(ActionLabel),
        )
    }

    pub fn kernel(&self) -> Result<KernelParams> {
        KernelParams::new(self.ddp.signal_var, self.ddp.length_scale)
    }

    pub fn ddp_prior(&self) -> Result<DdpStats> {
        DdpStats::new(self.ddp.alpha0, self.ddp.universe_cap, self.kernel()?)
    }

    pub fn initial_belief(&self) -> GaussianBelief {
        let c = self.motion.initial_cov;
        GaussianBelief::posterior(
            Vec2::new(self.motion.initial_state[0], self.motion.initial_state[1]),
            Mat2::new(c[0][0], c[0][1], c[1][0], c[1][1]),
        )
    }

    /// A tracker at the initial belief, adaptive when the scenario says so.
    pub fn tracker(&self) -> TrackerState {
        if self.probing.adaptive {
            TrackerState::adaptive(self.initial_belief(), self.probing.window)
        } else {
            TrackerState::fixed(self.initial_belief())
        }
    }

    /// Revisit schedule before its per-trajectory phase is applied.
    pub fn revisit_schedule(&self) -> Result<RevisitSchedule> {
        match &self.motion.revisit {
            None => Ok(RevisitSchedule::constant(self.motion.dt)),
            Some(r) => RevisitSchedule::for_trace_levels(
                &r.trace_levels,
                &r.dwell,
                self.motion.accel_noise_std,
                &self.observation_model()?,
            ),
        }
    }

    pub fn candidate_grid(&self) -> Result<CandidateGrid> {
        CandidateGrid::linspace(self.probing.grid_min, self.probing.grid_max, self.probing.grid_points)
    }

    pub fn accel_grid(&self) -> Vec<f64> {
        let p = &self.probing;
        if p.accel_points == 1 {
            return vec![0.5 * (p.accel_min + p.accel_max)];
        }
        let step = (p.accel_max - p.accel_min) / (p.accel_points - 1) as f64;
        (0..p.accel_points).map(|i| p.accel_min + step * i as f64).collect()
    }

    pub fn filter_options(&self) -> FilterOptions {
        FilterOptions {
            include_transition_factor: self.filter.include_transition_factor,
            ess_threshold: self.filter.ess_threshold,
            ..FilterOptions::default()
        }
    }

    pub fn with_bandwidth(&self, length_scale: f64) -> Self {
        let mut c = self.clone();
        c.ddp.length_scale = length_scale;
        c
    }

    pub fn with_train_steps(&self, steps: usize) -> Self {
        let mut c = self.clone();
        c.experiment.train_steps = steps;
        c
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig::nominal()
    }
}
