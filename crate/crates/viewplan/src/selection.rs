//! Budgeted viewpoint selection.
//!
//! The objective is new-voxel coverage. Each candidate `T` has a visibility
//! set `V(T)`; given already-covered voxels `U`, its gain is
//! `delta(T) = |V(T) \ U|` and its score is `delta(T) * pi(T)` where the
//! novelty weight `pi(T) = exp(-d(T, train) / sigma)` is fixed per candidate.
//! Because `pi` does not depend on the selection, scores have diminishing
//! returns, and a stale-score priority queue (lazy greedy) returns exactly
//! the same selections as the exhaustive argmax at each round.
//!
//! Ties at equal score resolve to the lowest pool index; zero-score
//! candidates still fill the budget in index order.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{union_of, VisibilitySet, VoxelId};
use crate::pose::{wrap_angle, Pose};
use crate::rng;
use crate::sampling::{CandidatePool, Provenance};

pub const DEFAULT_SIGMA: f64 = 0.35;
pub const DEFAULT_LAMBDA_YAW: f64 = 0.20;
pub const DEFAULT_UNIQUE_CAP: usize = 500;
pub const DEFAULT_STOCH_EPSILON: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// First budget-many jitter-sampled candidates in pool order.
    Random,
    /// First budget-many arc-sampled candidates in pool order.
    Robot,
    /// Greedy on coverage gain alone.
    Coverage,
    /// Greedy on coverage gain times novelty weight.
    CnCoverage,
    /// Greedy on coverage gain over a per-round uniform subsample.
    StochGreedyCoverage,
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Random => "random",
            Policy::Robot => "robot",
            Policy::Coverage => "coverage",
            Policy::CnCoverage => "cn_coverage",
            Policy::StochGreedyCoverage => "stoch_greedy_coverage",
        }
    }
}

impl std::str::FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Policy> {
        match s {
            "random" => Ok(Policy::Random),
            "robot" => Ok(Policy::Robot),
            "coverage" => Ok(Policy::Coverage),
            "cn_coverage" => Ok(Policy::CnCoverage),
            "stoch_greedy_coverage" => Ok(Policy::StochGreedyCoverage),
            other => Err(Error::param("policy", format!("unknown policy `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionParams {
    pub policy: Policy,
    /// Requested training-stream length N.
    pub budget: usize,
    /// Novelty decay scale; `f64::INFINITY` disables novelty weighting.
    pub sigma: f64,
    /// Meters-per-radian exchange rate in the novelty distance.
    pub lambda_yaw: f64,
    /// Cap on unique selections; the stream is resampled beyond it.
    pub unique_cap: usize,
    /// Subsample accuracy parameter for the stochastic policy.
    pub stoch_epsilon: f64,
    /// Algorithm switch: stale-score queue vs exhaustive argmax. Both
    /// produce identical selections; the queue is the fast default.
    pub use_lazy: bool,
}

impl SelectionParams {
    pub fn new(policy: Policy, budget: usize) -> Self {
        SelectionParams {
            policy,
            budget,
            sigma: DEFAULT_SIGMA,
            lambda_yaw: DEFAULT_LAMBDA_YAW,
            unique_cap: DEFAULT_UNIQUE_CAP,
            stoch_epsilon: DEFAULT_STOCH_EPSILON,
            use_lazy: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::param("sigma", "must be positive (may be infinite)"));
        }
        if !self.lambda_yaw.is_finite() || self.lambda_yaw < 0.0 {
            return Err(Error::param("lambda_yaw", "must be finite and >= 0"));
        }
        if self.unique_cap == 0 {
            return Err(Error::param("unique_cap", "must be positive"));
        }
        if !(self.stoch_epsilon > 0.0 && self.stoch_epsilon < 1.0) {
            return Err(Error::param("stoch_epsilon", "must be in (0, 1)"));
        }
        Ok(())
    }

    /// Unique selections to make: `min(budget, unique_cap)`.
    pub fn unique_budget(&self) -> usize {
        self.budget.min(self.unique_cap)
    }
}

/// Novelty distance from a pose to the training trajectory:
/// `min over train of ||t - t'|| + lambda_yaw * |wrap(yaw - yaw')|`.
pub fn novelty_distance(pose: &Pose, train_poses: &[Pose], lambda_yaw: f64) -> Result<f64> {
    if train_poses.is_empty() {
        return Err(Error::EmptyTrainPoses);
    }
    let mut best = f64::INFINITY;
    for t in train_poses {
        let dt = (pose.position() - t.position()).norm();
        let dyaw = wrap_angle(pose.yaw() - t.yaw()).abs();
        let d = dt + lambda_yaw * dyaw;
        if d < best {
            best = d;
        }
    }
    Ok(best)
}

/// Novelty weight `exp(-d / sigma)`, in (0, 1]. With `sigma = inf` the
/// weight is exactly 1 for every finite distance.
pub fn novelty_weight(distance: f64, sigma: f64) -> f64 {
    (-distance / sigma).exp()
}

/// Fixed novelty weights for every candidate in a pool.
pub fn pool_novelty_weights(
    pool: &CandidatePool,
    train_poses: &[Pose],
    sigma: f64,
    lambda_yaw: f64,
) -> Result<Vec<f64>> {
    pool.candidates
        .iter()
        .map(|c| Ok(novelty_weight(novelty_distance(&c.pose, train_poses, lambda_yaw)?, sigma)))
        .collect()
}

/// One selection step: pool index, new voxels gained at selection time, and
/// the scoring weight in effect for that candidate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub pool_index: usize,
    pub gain: usize,
    pub novelty_weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub policy: Policy,
    pub budget: usize,
    pub seed: u64,
    /// Unique selections in selection order.
    pub selected: Vec<Selection>,
    /// Union of the selected visibility sets.
    pub covered_union: VisibilitySet,
    /// Cumulative union size after each selection; nondecreasing.
    pub covered_size_trace: Vec<usize>,
    /// Cumulative coverage fraction normalized by the pool union.
    pub coverage_fraction_trace: Vec<f64>,
    /// Pool indices of the length-N training stream (unique selections
    /// followed by resampled duplicates when N exceeds the unique cap).
    pub training_stream: Vec<usize>,
    /// Union size over the entire candidate pool (the fraction denominator).
    pub pool_union_size: usize,
}

impl SelectionResult {
    pub fn final_fraction(&self) -> f64 {
        self.coverage_fraction_trace.last().copied().unwrap_or(0.0)
    }
}

/// Candidate visibility sets remapped to dense universe indices, for fast
/// gain counting against a covered bitmask.
struct DenseSets {
    universe: Vec<VoxelId>,
    sets: Vec<Vec<u32>>,
}

impl DenseSets {
    fn build(vis_sets: &[VisibilitySet]) -> DenseSets {
        let mut universe: Vec<VoxelId> = Vec::new();
        for s in vis_sets {
            universe.extend_from_slice(s.voxels());
        }
        universe.sort_unstable();
        universe.dedup();
        let sets = vis_sets
            .iter()
            .map(|s| {
                s.voxels()
                    .iter()
                    .map(|v| universe.binary_search(v).expect("voxel in universe") as u32)
                    .collect()
            })
            .collect();
        DenseSets { universe, sets }
    }

    fn universe_len(&self) -> usize {
        self.universe.len()
    }
}

/// Covered-voxel bitmask over dense universe indices.
struct Covered {
    words: Vec<u64>,
    count: usize,
}

impl Covered {
    fn new(len: usize) -> Covered {
        Covered {
            words: vec![0u64; len.div_ceil(64)],
            count: 0,
        }
    }

    #[inline]
    fn contains(&self, id: u32) -> bool {
        self.words[(id / 64) as usize] & (1u64 << (id % 64)) != 0
    }

    fn gain(&self, set: &[u32]) -> usize {
        set.iter().filter(|&&id| !self.contains(id)).count()
    }

    fn insert_all(&mut self, set: &[u32]) -> usize {
        let mut added = 0;
        for &id in set {
            let w = (id / 64) as usize;
            let bit = 1u64 << (id % 64);
            if self.words[w] & bit == 0 {
                self.words[w] |= bit;
                added += 1;
            }
        }
        self.count += added;
        added
    }
}

fn better(score: f64, index: usize, best: Option<(f64, usize)>) -> bool {
    match best {
        None => true,
        Some((bs, bi)) => score > bs || (score == bs && index < bi),
    }
}

/// Exhaustive greedy: recomputes every remaining candidate's score each
/// round. Reference implementation for the stale-score queue.
fn greedy_naive(dense: &DenseSets, weights: &[f64], n_sel: usize) -> Vec<(usize, usize)> {
    let n = dense.sets.len();
    let mut covered = Covered::new(dense.universe_len());
    let mut selected_mask = vec![false; n];
    let mut picks = Vec::with_capacity(n_sel);
    for _ in 0..n_sel {
        let mut best: Option<(f64, usize)> = None;
        for i in 0..n {
            if selected_mask[i] {
                continue;
            }
            let score = covered.gain(&dense.sets[i]) as f64 * weights[i];
            if better(score, i, best) {
                best = Some((score, i));
            }
        }
        let (_, idx) = best.expect("n_sel <= pool size");
        let gained = covered.insert_all(&dense.sets[idx]);
        selected_mask[idx] = true;
        picks.push((idx, gained));
    }
    picks
}

#[derive(PartialEq)]
struct QueueEntry {
    score: f64,
    index: usize,
    round: usize,
}

impl Eq for QueueEntry {}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Max-heap on score; lowest index wins ties. Scores are finite.
        self.score
            .partial_cmp(&other.score)
            .expect("scores are never NaN")
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Stale-score queue greedy. Scores only shrink as coverage grows, so a
/// queue entry is an upper bound; an entry rescored in the current round and
/// still on top is the exact argmax, with the same index tie rule as the
/// exhaustive scan.
fn greedy_lazy(dense: &DenseSets, weights: &[f64], n_sel: usize) -> Vec<(usize, usize)> {
    use std::collections::BinaryHeap;
    let mut covered = Covered::new(dense.universe_len());
    let mut heap: BinaryHeap<QueueEntry> = dense
        .sets
        .iter()
        .enumerate()
        .map(|(i, s)| QueueEntry {
            score: s.len() as f64 * weights[i],
            index: i,
            round: 0,
        })
        .collect();
    let mut picks = Vec::with_capacity(n_sel);
    for round in 0..n_sel {
        loop {
            let top = heap.pop().expect("n_sel <= pool size");
            if top.round == round {
                let gained = covered.insert_all(&dense.sets[top.index]);
                picks.push((top.index, gained));
                break;
            }
            let score = covered.gain(&dense.sets[top.index]) as f64 * weights[top.index];
            heap.push(QueueEntry {
                score,
                index: top.index,
                round,
            });
        }
    }
    picks
}

/// Per-round uniform subsample greedy (pure coverage). Subsample size is
/// `ceil((pool / n_sel) * ln(1 / epsilon))`, clamped to the remaining
/// candidates; when it covers all of them a round is exact greedy.
fn greedy_stochastic(
    dense: &DenseSets,
    n_sel: usize,
    epsilon: f64,
    seed: u64,
) -> Vec<(usize, usize)> {
    let n = dense.sets.len();
    if n_sel == 0 {
        return Vec::new();
    }
    let m = ((n as f64 / n_sel as f64) * (1.0 / epsilon).ln()).ceil() as usize;
    let m = m.max(1);
    let mut rng = rng::stream("stoch-greedy", seed, 0);
    let mut covered = Covered::new(dense.universe_len());
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut picks = Vec::with_capacity(n_sel);
    for _ in 0..n_sel {
        let k = m.min(remaining.len());
        // Partial Fisher-Yates: the first k entries become the subsample.
        for j in 0..k {
            let pick = j + rng.random_range(0..remaining.len() - j);
            remaining.swap(j, pick);
        }
        let mut best: Option<(f64, usize, usize)> = None;
        for (pos, &idx) in remaining[..k].iter().enumerate() {
            let score = covered.gain(&dense.sets[idx]) as f64;
            if better(score, idx, best.map(|(s, i, _)| (s, i))) {
                best = Some((score, idx, pos));
            }
        }
        let (_, idx, pos) = best.expect("subsample nonempty");
        let gained = covered.insert_all(&dense.sets[idx]);
        picks.push((idx, gained));
        remaining.swap_remove(pos);
    }
    picks
}

/// Extends unique selections to a length-`budget` training stream. Up to
/// `budget` entries the stream is the selection prefix; beyond it, entries
/// are drawn uniformly with replacement from the unique selections using the
/// `resample` stream of `seed`.
pub fn resample_to_budget(selected: &[usize], budget: usize, seed: u64) -> Result<Vec<usize>> {
    if budget == 0 {
        return Ok(Vec::new());
    }
    if selected.is_empty() {
        return Err(Error::EmptySelection);
    }
    if budget <= selected.len() {
        return Ok(selected[..budget].to_vec());
    }
    let mut stream = selected.to_vec();
    let mut rng = rng::stream("resample", seed, 0);
    for _ in selected.len()..budget {
        stream.push(selected[rng.random_range(0..selected.len())]);
    }
    Ok(stream)
}

/// Fraction of a reference union covered by a selection's union.
pub fn coverage_fraction(covered: &VisibilitySet, scene_union: &VisibilitySet) -> Result<f64> {
    if scene_union.is_empty() {
        return Err(Error::EmptySceneUnion);
    }
    debug_assert!(covered.is_subset_of(scene_union));
    Ok(covered.len() as f64 / scene_union.len() as f64)
}

/// Runs the configured policy over a pool and its visibility sets.
///
/// `seed` feeds the stochastic subsampler and the stream resampler; the
/// greedy policies themselves are deterministic. The fraction trace is
/// normalized by the union over the whole pool.
pub fn select(
    pool: &CandidatePool,
    vis_sets: &[VisibilitySet],
    train_poses: &[Pose],
    params: &SelectionParams,
    seed: u64,
) -> Result<SelectionResult> {
    params.validate()?;
    if vis_sets.len() != pool.len() {
        return Err(Error::param(
            "vis_sets",
            format!("{} sets for {} candidates", vis_sets.len(), pool.len()),
        ));
    }
    let n_sel = params.unique_budget();
    let dense = DenseSets::build(vis_sets);

    let (picks, weights): (Vec<(usize, usize)>, Vec<f64>) = match params.policy {
        Policy::Random | Policy::Robot => {
            let provenance = if params.policy == Policy::Random {
                Provenance::Random
            } else {
                Provenance::Robot
            };
            let eligible = pool.indices_with_provenance(provenance);
            if n_sel > eligible.len() {
                return Err(Error::BudgetExceedsPool {
                    budget: n_sel,
                    available: eligible.len(),
                });
            }
            let mut covered = Covered::new(dense.universe_len());
            let picks = eligible[..n_sel]
                .iter()
                .map(|&idx| (idx, covered.insert_all(&dense.sets[idx])))
                .collect();
            (picks, vec![1.0; pool.len()])
        }
        Policy::Coverage => {
            if n_sel > pool.len() {
                return Err(Error::BudgetExceedsPool {
                    budget: n_sel,
                    available: pool.len(),
                });
            }
            let weights = vec![1.0; pool.len()];
            let picks = if params.use_lazy {
                greedy_lazy(&dense, &weights, n_sel)
            } else {
                greedy_naive(&dense, &weights, n_sel)
            };
            (picks, weights)
        }
        Policy::CnCoverage => {
            if n_sel > pool.len() {
                return Err(Error::BudgetExceedsPool {
                    budget: n_sel,
                    available: pool.len(),
                });
            }
            let weights =
                pool_novelty_weights(pool, train_poses, params.sigma, params.lambda_yaw)?;
            let picks = if params.use_lazy {
                greedy_lazy(&dense, &weights, n_sel)
            } else {
                greedy_naive(&dense, &weights, n_sel)
            };
            (picks, weights)
        }
        Policy::StochGreedyCoverage => {
            if n_sel > pool.len() {
                return Err(Error::BudgetExceedsPool {
                    budget: n_sel,
                    available: pool.len(),
                });
            }
            let picks = greedy_stochastic(&dense, n_sel, params.stoch_epsilon, seed);
            (picks, vec![1.0; pool.len()])
        }
    };

    let mut selected = Vec::with_capacity(picks.len());
    let mut covered_size_trace = Vec::with_capacity(picks.len());
    let mut running = 0usize;
    for &(idx, gain) in &picks {
        running += gain;
        covered_size_trace.push(running);
        selected.push(Selection {
            pool_index: idx,
            gain,
            novelty_weight: weights[idx],
        });
    }
    let pool_union_size = dense.universe_len();
    let coverage_fraction_trace = covered_size_trace
        .iter()
        .map(|&c| {
            if pool_union_size == 0 {
                0.0
            } else {
                c as f64 / pool_union_size as f64
            }
        })
        .collect();
    let covered_union = union_of(picks.iter().map(|&(idx, _)| &vis_sets[idx]));
    let indices: Vec<usize> = picks.iter().map(|&(idx, _)| idx).collect();
    let training_stream = if params.budget == 0 {
        Vec::new()
    } else {
        resample_to_budget(&indices, params.budget, seed)?
    };

    Ok(SelectionResult {
        policy: params.policy,
        budget: params.budget,
        seed,
        selected,
        covered_union,
        covered_size_trace,
        coverage_fraction_trace,
        training_stream,
        pool_union_size,
    })
}

/// JSON for a selection result, stable field order, trailing newline.
pub fn result_to_json(result: &SelectionResult) -> Result<String> {
    let mut s = serde_json::to_string_pretty(result)?;
    s.push('\n');
    Ok(s)
}
