//! Seeded experiment orchestration and CSV / JSON-lines export.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::active::{grid_kl_to_truth, run_probing_loop, ProbeLogRecord, ProbeMode, ProbingScene, ProbingSetup};
use crate::config::ScenarioConfig;
use crate::ddp::BeliefFeature;
use crate::error::{ensure, Error, Result};
use crate::forward::{propagate_state, ActionLabel, CognitiveRadar, KinematicState, PolicySpec, Region};
use crate::inverse::{global_expected_policy, init_ensemble_with_tracker, ipfddp_step, Ensemble};
use crate::metrics::{MetricsReport, PolicyPair};
use crate::rng::{Purpose, Streams};

const TEST_SET_SALT: u64 = 0x7E57;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub k: u64,
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub trace_pred: f64,
    pub region: Region,
    pub action: ActionLabel,
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub initial: KinematicState,
    pub records: Vec<TrajectoryRecord>,
}

impl Trajectory {
    pub fn state(&self, k: usize) -> KinematicState {
        if k == 0 {
            self.initial
        } else {
            let x = self.records[k - 1].x;
            KinematicState::new(x[0], x[1])
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunLogRecord {
    pub k: u64,
    pub ess: f64,
    pub revealed: usize,
    pub weight_entropy: f64,
}

/// One row per (configuration variant, seed).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub bandwidth: f64,
    #[serde(rename = "T")]
    pub train_steps: usize,
    pub seed: u64,
    pub mse: f64,
    pub kl: f64,
    pub rank_acc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub bandwidth: f64,
    #[serde(rename = "T")]
    pub train_steps: usize,
    pub n_seeds: usize,
    pub mse_mean: f64,
    pub mse_std: f64,
    pub kl_mean: f64,
    pub kl_std: f64,
    pub rank_acc_mean: f64,
    pub rank_acc_std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub step: usize,
    pub active_mean: f64,
    pub active_std: f64,
    pub random_mean: f64,
    pub random_std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalvingRow {
    pub trial: usize,
    pub seed: u64,
    pub active_steps: usize,
    pub random_steps: usize,
}

/// Fixed CSV column order for exported row types.
pub trait CsvRecord: Serialize {
    const HEADER: &'static [&'static str];
}

impl CsvRecord for MetricsRow {
    const HEADER: &'static [&'static str] = &["bandwidth", "T", "seed", "mse", "kl", "rank_acc"];
}

impl CsvRecord for AggregateRow {
    const HEADER: &'static [&'static str] = &[
        "bandwidth",
        "T",
        "n_seeds",
        "mse_mean",
        "mse_std",
        "kl_mean",
        "kl_std",
        "rank_acc_mean",
        "rank_acc_std",
    ];
}

impl CsvRecord for CurveRow {
    const HEADER: &'static [&'static str] = &["step", "active_mean", "active_std", "random_mean", "random_std"];
}

impl CsvRecord for HalvingRow {
    const HEADER: &'static [&'static str] = &["trial", "seed", "active_steps", "random_steps"];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub seed: u64,
    pub bandwidth: f64,
    pub train_steps: usize,
    pub trajectory: Vec<TrajectoryRecord>,
    pub run_log: Vec<RunLogRecord>,
    pub report: MetricsReport,
}

impl RunRecord {
    pub fn metrics_row(&self) -> MetricsRow {
        MetricsRow {
            bandwidth: self.bandwidth,
            train_steps: self.train_steps,
            seed: self.seed,
            mse: self.report.mse,
            kl: self.report.kl,
            rank_acc: self.report.rank_acc,
        }
    }
}

/// Which belief features a run is scored on.
#[derive(Clone, Debug, PartialEq)]
pub enum TestSet {
    /// Predicted traces from an independent simulated trajectory.
    Simulated,
    Fixed(Vec<BeliefFeature>),
}

/// Everything a run produces, including the trained ensemble.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub record: RunRecord,
    pub ensemble: Ensemble,
    pub pairs: Vec<PolicyPair>,
}

/// Simulate `steps` revisits of the radar against the target.
///
/// The revisit schedule gets a random phase per trajectory. When the radar
/// adapts its process noise the target also maneuvers with accelerations
/// drawn uniformly from the acceleration grid.
pub fn simulate_trajectory(cfg: &ScenarioConfig, streams: &Streams, steps: usize) -> Result<Trajectory> {
    let base = cfg.revisit_schedule()?;
    let phase = streams.rng(Purpose::Schedule, 0).random_range(0..base.period());
    let schedule = base.with_phase(phase);
    let observation = cfg.observation_model()?;
    let mut radar = CognitiveRadar {
        tracker: cfg.tracker(),
        policy: cfg.policy_spec()?,
        observation,
    };
    let accel_grid = cfg.accel_grid();
    let initial = KinematicState::new(cfg.motion.initial_state[0], cfg.motion.initial_state[1]);
    let mut x = initial;
    let mut records = Vec::with_capacity(steps);
    for i in 0..steps {
        let k = i as u64 + 1;
        let dt = schedule.dt_at(i);
        let motion = cfg.motion_model(dt)?;
        let accel = cfg.probing.adaptive.then(|| {
            let j = streams.rng(Purpose::Maneuver, k).random_range(0..accel_grid.len());
            accel_grid[j]
        });
        x = propagate_state(&x, &motion, &mut streams.rng(Purpose::TargetNoise, k), accel);
        let dwell = radar.dwell(
            &x,
            &motion,
            &mut streams.rng(Purpose::RadarMeasurement, k),
            &mut streams.rng(Purpose::RadarAction, k),
        )?;
        records.push(TrajectoryRecord {
            k,
            x: [x.range, x.range_rate],
            y: [dwell.measurement[0], dwell.measurement[1]],
            trace_pred: dwell.predicted_trace,
            region: dwell.region,
            action: dwell.action,
            dt,
        });
    }
    Ok(Trajectory { initial, records })
}

/// Feed a trajectory's `(x, a)` pairs to a fresh ensemble.
pub fn train_on_trajectory(
    cfg: &ScenarioConfig,
    traj: &Trajectory,
    streams: &Streams,
) -> Result<(Ensemble, Vec<RunLogRecord>)> {
    let observation = cfg.observation_model()?;
    let opts = cfg.filter_options();
    let mut e = init_ensemble_with_tracker(cfg.filter.particles, cfg.tracker(), cfg.ddp_prior()?);
    let mut log = Vec::with_capacity(traj.records.len());
    for (i, r) in traj.records.iter().enumerate() {
        let motion = cfg.motion_model(r.dt)?;
        ipfddp_step(
            &mut e,
            &traj.state(i),
            &traj.state(i + 1),
            r.action,
            &motion,
            &observation,
            &opts,
            &mut streams.rng(Purpose::Learner, r.k),
        )?;
        log.push(RunLogRecord {
            k: r.k,
            ess: e.ess,
            revealed: e.revealed.len(),
            weight_entropy: e.weight_entropy(),
        });
    }
    Ok((e, log))
}

/// Predicted traces of an independent trajectory of `test_points` revisits.
pub fn simulated_test_features(cfg: &ScenarioConfig, streams: &Streams) -> Result<Vec<BeliefFeature>> {
    let traj = simulate_trajectory(cfg, &streams.derive(TEST_SET_SALT), cfg.experiment.test_points)?;
    Ok(traj.records.iter().map(|r| r.trace_pred).collect())
}

/// Ensemble estimate versus truth at each feature, on the true action set.
pub fn policy_pairs(e: &Ensemble, features: &[BeliefFeature], truth: &PolicySpec) -> Vec<PolicyPair> {
    features
        .par_iter()
        .map(|&f| PolicyPair {
            feature: f,
            estimated: global_expected_policy(e, f).mean.restricted_to(truth.actions()),
            truth: truth.policy_at(f),
        })
        .collect()
}

pub fn run_random_probing_detailed(cfg: &ScenarioConfig, seed: u64, test: &TestSet) -> Result<RunOutput> {
    cfg.validate()?;
    let streams = Streams::new(seed);
    let traj = simulate_trajectory(cfg, &streams, cfg.experiment.train_steps)?;
    let (ensemble, run_log) = train_on_trajectory(cfg, &traj, &streams)?;
    let features = match test {
        TestSet::Simulated => simulated_test_features(cfg, &streams)?,
        TestSet::Fixed(f) => f.clone(),
    };
    let pairs = policy_pairs(&ensemble, &features, &cfg.policy_spec()?);
    let report = MetricsReport::evaluate(&pairs)?;
    Ok(RunOutput {
        record: RunRecord {
            config_hash: cfg.hash(),
            seed,
            bandwidth: cfg.ddp.length_scale,
            train_steps: cfg.experiment.train_steps,
            trajectory: traj.records,
            run_log,
            report,
        },
        ensemble,
        pairs,
    })
}

/// Train on `T` simulated revisits and score on `K` held-out features.
pub fn run_random_probing(cfg: &ScenarioConfig, seed: u64) -> Result<RunRecord> {
    Ok(run_random_probing_detailed(cfg, seed, &TestSet::Simulated)?.record)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn aggregate(rows: &[MetricsRow]) -> Vec<AggregateRow> {
    let mut keys: Vec<(f64, usize)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|k| k.0 == r.bandwidth && k.1 == r.train_steps) {
            keys.push((r.bandwidth, r.train_steps));
        }
    }
    keys.into_iter()
        .map(|(bandwidth, train_steps)| {
            let group: Vec<&MetricsRow> = rows
                .iter()
                .filter(|r| r.bandwidth == bandwidth && r.train_steps == train_steps)
                .collect();
            let col = |f: fn(&MetricsRow) -> f64| mean_std(&group.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (mse_mean, mse_std) = col(|r| r.mse);
            let (kl_mean, kl_std) = col(|r| r.kl);
            let (rank_acc_mean, rank_acc_std) = col(|r| r.rank_acc);
            AggregateRow {
                bandwidth,
                train_steps,
                n_seeds: group.len(),
                mse_mean,
                mse_std,
                kl_mean,
                kl_std,
                rank_acc_mean,
                rank_acc_std,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub runs: Vec<MetricsRow>,
    pub summary: Vec<AggregateRow>,
}

fn sweep(variants: Vec<ScenarioConfig>, seeds: &[u64]) -> Result<SweepTable> {
    ensure(!seeds.is_empty(), || "seed list must be non-empty".to_string())?;
    let jobs: Vec<(&ScenarioConfig, u64)> = variants
        .iter()
        .flat_map(|c| seeds.iter().map(move |s| (c, *s)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|(c, s)| run_random_probing(c, *s).map(|r| r.metrics_row()))
        .collect::<Result<Vec<_>>>()?;
    let summary = aggregate(&runs);
    Ok(SweepTable { runs, summary })
}

/// Every bandwidth crossed with every seed.
pub fn sweep_bandwidth(cfg: &ScenarioConfig, bandwidths: &[f64], seeds: &[u64]) -> Result<SweepTable> {
    ensure(!bandwidths.is_empty(), || "bandwidth list must be non-empty".to_string())?;
    sweep(bandwidths.iter().map(|l| cfg.with_bandwidth(*l)).collect(), seeds)
}

/// Every training length crossed with every seed.
pub fn sweep_training_size(cfg: &ScenarioConfig, sizes: &[usize], seeds: &[u64]) -> Result<SweepTable> {
    ensure(!sizes.is_empty(), || "training size list must be non-empty".to_string())?;
    sweep(sizes.iter().map(|t| cfg.with_train_steps(*t)).collect(), seeds)
}

/// First step at which the curve reaches half its starting value, or
/// `len` (one past the horizon) if it never does.
pub fn steps_to_halve(curve: &[f64]) -> usize {
    let target = curve[0] / 2.0;
    (1..curve.len()).find(|&h| curve[h] <= target).unwrap_or(curve.len())
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub seed: u64,
    /// KL to truth at the fork point followed by one value per step.
    pub active_curve: Vec<f64>,
    pub random_curve: Vec<f64>,
    pub active_log: Vec<ProbeLogRecord>,
    pub random_log: Vec<ProbeLogRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbingComparison {
    pub trials: Vec<TrialOutcome>,
    pub curves: Vec<CurveRow>,
    pub halving: Vec<HalvingRow>,
    pub median_halving_active: f64,
    pub median_halving_random: f64,
    /// Fraction of post-fork steps where the active mean KL is at or below
    /// the random mean KL.
    pub dominance: f64,
}

fn probing_world(cfg: &ScenarioConfig) -> Result<(ProbingScene, Ensemble, ProbingSetup)> {
    ensure(cfg.motion.revisit.is_none(), || {
        "probing runs use a constant revisit interval".to_string()
    })?;
    let observation = cfg.observation_model()?;
    let scene = ProbingScene {
        target: KinematicState::new(cfg.motion.initial_state[0], cfg.motion.initial_state[1]),
        radar: CognitiveRadar {
            tracker: cfg.tracker(),
            policy: cfg.policy_spec()?,
            observation: observation.clone(),
        },
        step: 0,
    };
    let ensemble = init_ensemble_with_tracker(cfg.filter.particles, cfg.tracker(), cfg.ddp_prior()?);
    let setup = ProbingSetup {
        motion: cfg.motion_model(cfg.motion.dt)?,
        observation,
        grid: cfg.candidate_grid()?,
        accel_grid: cfg.accel_grid(),
        rollouts: cfg.probing.rollouts,
        filter: cfg.filter_options(),
        diagnostics: false,
    };
    Ok((scene, ensemble, setup))
}

/// Warm-start with random maneuvers, then continue in `mode`, logging
/// every post-warm-start step.
pub fn run_probing(
    cfg: &ScenarioConfig,
    seed: u64,
    mode: ProbeMode,
    warmstart: usize,
    horizon: usize,
) -> Result<(Ensemble, Vec<ProbeLogRecord>)> {
    cfg.validate()?;
    let streams = Streams::new(seed);
    let (mut scene, mut e, mut setup) = probing_world(cfg)?;
    run_probing_loop(ProbeMode::Random, warmstart, &mut scene, &mut e, &setup, &streams)?;
    setup.diagnostics = true;
    let log = run_probing_loop(mode, horizon, &mut scene, &mut e, &setup, &streams)?;
    Ok((e, log))
}

fn probing_trial(cfg: &ScenarioConfig, seed: u64, warmstart: usize, horizon: usize) -> Result<TrialOutcome> {
    let streams = Streams::new(seed);
    let (mut scene, mut e, mut setup) = probing_world(cfg)?;
    run_probing_loop(ProbeMode::Random, warmstart, &mut scene, &mut e, &setup, &streams)?;
    setup.diagnostics = true;
    let kl0 = grid_kl_to_truth(&e, &setup.grid, &scene.radar.policy)?;
    let fork = |mode| -> Result<(Vec<f64>, Vec<ProbeLogRecord>)> {
        let mut s = scene.clone();
        let mut en = e.clone();
        let log = run_probing_loop(mode, horizon, &mut s, &mut en, &setup, &streams)?;
        let mut curve = vec![kl0];
        curve.extend(log.iter().map(|r| r.kl_to_truth.expect("diagnostics on")));
        Ok((curve, log))
    };
    let (active_curve, active_log) = fork(ProbeMode::Active)?;
    let (random_curve, random_log) = fork(ProbeMode::Random)?;
    Ok(TrialOutcome {
        seed,
        active_curve,
        random_curve,
        active_log,
        random_log,
    })
}

/// Paired active and random probing from shared warm starts; trial `i`
/// uses seed `base_seed + i`.
pub fn active_vs_random(
    cfg: &ScenarioConfig,
    trials: usize,
    warmstart: usize,
    horizon: usize,
    base_seed: u64,
) -> Result<ProbingComparison> {
    cfg.validate()?;
    ensure(trials >= 1, || "at least one trial is required".to_string())?;
    let outcomes = (0..trials as u64)
        .into_par_iter()
        .map(|i| probing_trial(cfg, base_seed.wrapping_add(i), warmstart, horizon))
        .collect::<Result<Vec<_>>>()?;
    let curves: Vec<CurveRow> = (0..=horizon)
        .map(|h| {
            let (active_mean, active_std) = mean_std(&outcomes.iter().map(|t| t.active_curve[h]).collect::<Vec<_>>());
            let (random_mean, random_std) = mean_std(&outcomes.iter().map(|t| t.random_curve[h]).collect::<Vec<_>>());
            CurveRow {
                step: h,
                active_mean,
                active_std,
                random_mean,
                random_std,
            }
        })
        .collect();
    let halving: Vec<HalvingRow> = outcomes
        .iter()
        .enumerate()
        .map(|(i, t)| HalvingRow {
            trial: i,
            seed: t.seed,
            active_steps: steps_to_halve(&t.active_curve),
            random_steps: steps_to_halve(&t.random_curve),
        })
        .collect();
    let dominance = if horizon == 0 {
        1.0
    } else {
        curves[1..].iter().filter(|c| c.active_mean <= c.random_mean).count() as f64 / horizon as f64
    };
    Ok(ProbingComparison {
        median_halving_active: median(&halving.iter().map(|h| h.active_steps as f64).collect::<Vec<_>>()),
        median_halving_random: median(&halving.iter().map(|h| h.random_steps as f64).collect::<Vec<_>>()),
        trials: outcomes,
        curves,
        halving,
        dominance,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Jsonl,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "jsonl" => Ok(ExportFormat::Jsonl),
            other => Err(Error::Validation(format!("unknown export format {other:?}"))),
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Header row then one row per record, even when `rows` is empty.
pub fn write_csv<T: CsvRecord>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(create(path)?);
    w.write_record(T::HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_jsonl<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    for r in rows {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(f)
        .lines()
        .map(|line| {
            let line = line.map_err(|e| Error::io(path, e))?;
            Ok(serde_json::from_str(&line)?)
        })
        .collect()
}

/// Write run records under `dir`: one metrics CSV for all records, or a
/// trajectory and a run log JSON-lines file per record.
pub fn export(records: &[RunRecord], format: ExportFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    match format {
        ExportFormat::Csv => {
            let path = dir.join("metrics.csv");
            let rows: Vec<MetricsRow> = records.iter().map(RunRecord::metrics_row).collect();
            write_csv(&rows, &path)?;
            Ok(vec![path])
        }
        ExportFormat::Jsonl => {
            let mut paths = Vec::new();
            for r in records {
                let traj = dir.join(format!("trajectory_seed{}.jsonl", r.seed));
                write_jsonl(&r.trajectory, &traj)?;
                let log = dir.join(format!("run_log_seed{}.jsonl", r.seed));
                write_jsonl(&r.run_log, &log)?;
                paths.extend([traj, log]);
            }
            Ok(paths)
        }
    }
}
