//! Kinematic clearance-estimation benchmark.
//!
//! Each episode drops an agent into free space and walks it straight toward
//! a goal in fixed-length steps. Before every step the agent predicts its
//! forward clearance with the estimator under test; it takes the step only
//! when the prediction exceeds the safety threshold. A taken step whose true
//! clearance was at or below the threshold is a collision; a skipped step
//! still consumes horizon. The benchmark isolates the estimator: motion is
//! kinematic, and the agent's path toward the goal never depends on what it
//! senses, only on which steps it dares to take.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::Scene;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub n_episodes: usize,
    /// Actions per episode; both taken and skipped steps consume it.
    pub horizon: usize,
    /// Forward step length, meters.
    pub step_length: f64,
    /// Safety threshold on clearance, meters.
    pub clearance_threshold: f64,
    /// Minimum planar start/goal separation, meters.
    pub min_separation: f64,
    /// Success requires progress_moves / max(oracle_safe_moves, 1) at or
    /// above this fraction, with zero collisions.
    pub progress_success_fraction: f64,
    /// Clearance cap: rays that hit nothing report this range.
    pub clearance_max_range: f64,
    /// Height of the agent's motion plane; `None` uses the vertical midpoint
    /// of the scene bounds.
    pub agent_z: Option<f64>,
    /// Count collisions per attempted step instead of per taken step in the
    /// Col/100 metric.
    pub collisions_per_attempt: bool,
    pub seed: u64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            n_episodes: 1000,
            horizon: 12,
            step_length: 0.25,
            clearance_threshold: 1.2,
            min_separation: 1.5,
            progress_success_fraction: 0.8,
            clearance_max_range: 10.0,
            agent_z: None,
            collisions_per_attempt: false,
            seed: 0,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_episodes == 0 {
            return Err(Error::param("n_episodes", "must be positive"));
        }
        if self.horizon == 0 {
            return Err(Error::param("horizon", "must be positive"));
        }
        if !(self.step_length > 0.0 && self.step_length.is_finite()) {
            return Err(Error::param("step_length", "must be finite and positive"));
        }
        if !(self.clearance_threshold > 0.0 && self.clearance_threshold.is_finite()) {
            return Err(Error::param(
                "clearance_threshold",
                "must be finite and positive",
            ));
        }
        if !(self.min_separation >= 0.0 && self.min_separation.is_finite()) {
            return Err(Error::param("min_separation", "must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.progress_success_fraction) {
            return Err(Error::param(
                "progress_success_fraction",
                "must be in [0, 1]",
            ));
        }
        if !(self.clearance_max_range > 0.0 && self.clearance_max_range.is_finite()) {
            return Err(Error::param(
                "clearance_max_range",
                "must be finite and positive",
            ));
        }
        Ok(())
    }
}

/// Scripted predictions keyed by (episode, step); steps without an entry
/// fall back to the true clearance.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScriptedTable {
    entries: BTreeMap<(u64, u64), f64>,
}

impl ScriptedTable {
    pub fn from_entries(entries: impl IntoIterator<Item = (u64, u64, f64)>) -> Self {
        ScriptedTable {
            entries: entries
                .into_iter()
                .map(|(e, s, v)| ((e, s), v))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, episode: u64, step: u64) -> Option<f64> {
        self.entries.get(&(episode, step)).copied()
    }
}

/// Clearance estimator under test.
#[derive(Clone, Debug, PartialEq)]
pub enum ClearanceEstimator {
    /// Predicts the true clearance.
    Oracle,
    /// True clearance plus a constant bias plus Gaussian noise. One noise
    /// draw per attempted step (taken or skipped) when sigma is nonzero.
    AdditiveNoise { sigma: f64, bias: f64 },
    /// True clearance scaled by a constant factor.
    MultiplicativeBias { factor: f64 },
    /// Table lookup by (episode, step); missing entries are oracle.
    Scripted { table: ScriptedTable },
}

impl ClearanceEstimator {
    fn predict(
        &self,
        true_clearance: f64,
        episode: u64,
        step: u64,
        noise_rng: &mut rand_chacha::ChaCha8Rng,
    ) -> f64 {
        match self {
            ClearanceEstimator::Oracle => true_clearance,
            ClearanceEstimator::AdditiveNoise { sigma, bias } => {
                let noise = if *sigma != 0.0 {
                    let z: f64 = noise_rng.sample(StandardNormal);
                    sigma * z
                } else {
                    0.0
                };
                true_clearance + bias + noise
            }
            ClearanceEstimator::MultiplicativeBias { factor } => factor * true_clearance,
            ClearanceEstimator::Scripted { table } => {
                table.get(episode, step).unwrap_or(true_clearance)
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ClearanceEstimator::Oracle => "oracle",
            ClearanceEstimator::AdditiveNoise { .. } => "additive_noise",
            ClearanceEstimator::MultiplicativeBias { .. } => "multiplicative_bias",
            ClearanceEstimator::Scripted { .. } => "scripted",
        }
    }
}

/// Distance to the nearest surface along a horizontal heading, capped at
/// `max_range`; rays that hit nothing report the cap.
pub fn true_clearance(
    scene: &Scene,
    position: Vector3<f64>,
    heading: Vector3<f64>,
    max_range: f64,
) -> f64 {
    let norm = heading.norm();
    if norm == 0.0 {
        return max_range;
    }
    let dir = heading / norm;
    match scene.nearest_hit(position, dir) {
        Some(hit) => hit.t.min(max_range),
        None => max_range,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveRecord {
    pub step: usize,
    pub predicted: f64,
    pub true_clearance: f64,
    pub taken: bool,
    pub collision: bool,
    pub progress_gain: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Counters {
    pub steps_attempted: usize,
    pub steps_taken: usize,
    pub collisions: usize,
    pub progress_moves: usize,
    pub oracle_safe_moves: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Failure,
    Skipped { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub start: [f64; 3],
    pub goal: [f64; 3],
    pub moves: Vec<MoveRecord>,
    pub counters: Counters,
    pub outcome: Outcome,
}

const ARRIVAL_EPS: f64 = 1e-9;
const SAMPLE_RETRIES: usize = 100;

/// Parity test along +x: a point inside a closed mesh sees an odd number of
/// surface crossings. Samples on a face or edge are measure-zero for the
/// uniform endpoint draws and are not special-cased.
fn in_free_space(scene: &Scene, p: Vector3<f64>) -> bool {
    let dir = Vector3::new(1.0, 0.0, 0.0);
    let mut crossings = 0usize;
    for tri in scene.triangles() {
        if crate::geometry::ray_crossing(p, dir, tri) {
            crossings += 1;
        }
    }
    crossings % 2 == 0
}

/// Walks one episode between fixed endpoints. The agent heads straight for
/// the goal; the final step is shortened to land exactly on it.
pub fn run_episode_between(
    scene: &Scene,
    cfg: &EpisodeConfig,
    estimator: &ClearanceEstimator,
    episode: usize,
    start: Vector3<f64>,
    goal: Vector3<f64>,
) -> EpisodeLog {
    let mut noise_rng = rng::stream("episode-noise", cfg.seed, episode as u64);
    let mut pos = start;
    let mut moves = Vec::new();
    let mut counters = Counters::default();
    for step in 0..cfg.horizon {
        let to_goal = goal - pos;
        let dist = to_goal.norm();
        if dist <= ARRIVAL_EPS {
            break;
        }
        let dir = to_goal / dist;
        let tc = true_clearance(scene, pos, dir, cfg.clearance_max_range);
        let predicted = estimator.predict(tc, episode as u64, step as u64, &mut noise_rng);
        counters.steps_attempted += 1;
        let safe = tc > cfg.clearance_threshold;
        if safe {
            counters.oracle_safe_moves += 1;
        }
        if predicted > cfg.clearance_threshold {
            let move_len = cfg.step_length.min(dist);
            let new_pos = pos + dir * move_len;
            let progress_gain = dist - (goal - new_pos).norm();
            let collision = !safe;
            counters.steps_taken += 1;
            if collision {
                counters.collisions += 1;
            }
            if progress_gain > 0.0 {
                counters.progress_moves += 1;
            }
            moves.push(MoveRecord {
                step,
                predicted,
                true_clearance: tc,
                taken: true,
                collision,
                progress_gain,
            });
            pos = new_pos;
        } else {
            moves.push(MoveRecord {
                step,
                predicted,
                true_clearance: tc,
                taken: false,
                collision: false,
                progress_gain: 0.0,
            });
        }
    }
    let ratio = counters.progress_moves as f64 / counters.oracle_safe_moves.max(1) as f64;
    let outcome = if counters.collisions == 0 && ratio >= cfg.progress_success_fraction {
        Outcome::Success
    } else {
        Outcome::Failure
    };
    EpisodeLog {
        episode,
        start: [start.x, start.y, start.z],
        goal: [goal.x, goal.y, goal.z],
        moves,
        counters,
        outcome,
    }
}

/// Samples endpoints in free space and walks the episode. Endpoint draws
/// come from the `episode-sample` stream of `(seed, episode)`; sampling
/// failure after the retry cap skips the episode with a reason.
pub fn run_episode(
    scene: &Scene,
    cfg: &EpisodeConfig,
    estimator: &ClearanceEstimator,
    episode: usize,
) -> EpisodeLog {
    let mut rng = rng::stream("episode-sample", cfg.seed, episode as u64);
    let bounds = scene.bounds();
    let z = cfg
        .agent_z
        .unwrap_or_else(|| 0.5 * (bounds.min.z + bounds.max.z));
    let sample_point = |rng: &mut rand_chacha::ChaCha8Rng| {
        Vector3::new(
            rng.random_range(bounds.min.x..=bounds.max.x),
            rng.random_range(bounds.min.y..=bounds.max.y),
            z,
        )
    };
    let skipped = |reason: &str| EpisodeLog {
        episode,
        start: [f64::NAN; 3],
        goal: [f64::NAN; 3],
        moves: Vec::new(),
        counters: Counters::default(),
        outcome: Outcome::Skipped {
            reason: reason.to_string(),
        },
    };
    let mut start = None;
    for _ in 0..SAMPLE_RETRIES {
        let p = sample_point(&mut rng);
        if in_free_space(scene, p) {
            start = Some(p);
            break;
        }
    }
    let Some(start) = start else {
        return skipped("no free start position within retry cap");
    };
    let mut goal = None;
    for _ in 0..SAMPLE_RETRIES {
        let p = sample_point(&mut rng);
        let planar = Vector3::new(p.x - start.x, p.y - start.y, 0.0).norm();
        if planar >= cfg.min_separation && in_free_space(scene, p) {
            goal = Some(p);
            break;
        }
    }
    let Some(goal) = goal else {
        return skipped("no free goal position within retry cap");
    };
    run_episode_between(scene, cfg, estimator, episode, start, goal)
}

/// Mean with a symmetric 95% normal-approximation confidence half-width.
/// The half-width needs at least two samples and is `None` otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricCi {
    pub mean: f64,
    pub ci95: Option<f64>,
    pub n: usize,
}

pub fn metric_ci(values: &[f64]) -> MetricCi {
    let n = values.len();
    if n == 0 {
        return MetricCi {
            mean: 0.0,
            ci95: None,
            n,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return MetricCi {
            mean,
            ci95: None,
            n,
        };
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    MetricCi {
        mean,
        ci95: Some(1.96 * (var / n as f64).sqrt()),
        n,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkMetrics {
    /// Fraction of episodes that succeed.
    pub succ: MetricCi,
    /// Collisions per 100 steps (taken, or attempted under the config flag).
    pub col_per_100: MetricCi,
    /// Collisions per failed episode; 0 with no failures.
    pub col_per_fail: MetricCi,
    /// progress_moves / max(oracle_safe_moves, 1).
    pub path_ratio: MetricCi,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub config: EpisodeConfig,
    pub estimator: String,
    pub metrics: BenchmarkMetrics,
    pub episodes_run: usize,
    pub episodes_skipped: usize,
    pub total_collisions: usize,
    pub total_steps_taken: usize,
}

/// Aggregates per-episode logs into benchmark metrics. Skipped episodes are
/// excluded everywhere.
pub fn aggregate_metrics(logs: &[EpisodeLog], cfg: &EpisodeConfig) -> BenchmarkMetrics {
    let run: Vec<&EpisodeLog> = logs
        .iter()
        .filter(|l| !matches!(l.outcome, Outcome::Skipped { .. }))
        .collect();
    let succ: Vec<f64> = run
        .iter()
        .map(|l| (l.outcome == Outcome::Success) as u8 as f64)
        .collect();
    let col100: Vec<f64> = run
        .iter()
        .map(|l| {
            let steps = if cfg.collisions_per_attempt {
                l.counters.steps_attempted
            } else {
                l.counters.steps_taken
            };
            100.0 * l.counters.collisions as f64 / steps.max(1) as f64
        })
        .collect();
    let col_fail: Vec<f64> = run
        .iter()
        .filter(|l| l.outcome == Outcome::Failure)
        .map(|l| l.counters.collisions as f64)
        .collect();
    let path: Vec<f64> = run
        .iter()
        .map(|l| l.counters.progress_moves as f64 / l.counters.oracle_safe_moves.max(1) as f64)
        .collect();
    BenchmarkMetrics {
        succ: metric_ci(&succ),
        col_per_100: metric_ci(&col100),
        col_per_fail: metric_ci(&col_fail),
        path_ratio: metric_ci(&path),
    }
}

/// Runs every configured episode. Episodes are independent streams, so the
/// run is parallel yet bit-reproducible: logs come back in episode order
/// regardless of thread count.
pub fn run_episodes(
    scene: &Scene,
    cfg: &EpisodeConfig,
    estimator: &ClearanceEstimator,
) -> Result<Vec<EpisodeLog>> {
    cfg.validate()?;
    if scene.is_empty() {
        return Err(Error::param("scene", "benchmark needs a non-empty scene"));
    }
    Ok((0..cfg.n_episodes)
        .into_par_iter()
        .map(|i| run_episode(scene, cfg, estimator, i))
        .collect())
}

/// Aggregates finished logs into the benchmark result.
pub fn benchmark_from_logs(
    cfg: &EpisodeConfig,
    estimator: &ClearanceEstimator,
    logs: &[EpisodeLog],
) -> BenchmarkResult {
    let metrics = aggregate_metrics(logs, cfg);
    let episodes_skipped = logs
        .iter()
        .filter(|l| matches!(l.outcome, Outcome::Skipped { .. }))
        .count();
    BenchmarkResult {
        config: *cfg,
        estimator: estimator.kind().to_string(),
        metrics,
        episodes_run: logs.len() - episodes_skipped,
        episodes_skipped,
        total_collisions: logs.iter().map(|l| l.counters.collisions).sum(),
        total_steps_taken: logs.iter().map(|l| l.counters.steps_taken).sum(),
    }
}

/// Runs the full benchmark end to end.
pub fn run_benchmark(
    scene: &Scene,
    cfg: &EpisodeConfig,
    estimator: &ClearanceEstimator,
) -> Result<BenchmarkResult> {
    let logs = run_episodes(scene, cfg, estimator)?;
    Ok(benchmark_from_logs(cfg, estimator, &logs))
}

/// JSON for a benchmark result, stable field order, trailing newline.
pub fn benchmark_to_json(result: &BenchmarkResult) -> Result<String> {
    let mut s = serde_json::to_string_pretty(result)?;
    s.push('\n');
    Ok(s)
}
