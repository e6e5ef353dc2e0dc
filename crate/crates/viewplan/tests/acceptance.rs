//! Acceptance battery: ten end-to-end checks covering greedy near-optimality
//! against a brute-force oracle, lazy/naive exactness, selection throughput,
//! gate arithmetic, the capped-resampling regime, novelty distances, the
//! control proxy, the stability and significance statistics, and budget-sweep
//! sanity. Every check prints one `[PASS]`/`[FAIL]` line; the test fails at
//! the end if any check failed.
//!
//! Run `cargo test --test acceptance -- --nocapture` to see the lines. The
//! checks run sequentially inside a single test so the throughput timings
//! are not distorted by sibling tests.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{FRAC_PI_2, PI};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use viewplan::diagnostics::{paired_wilcoxon, stability_summary, wilcoxon_enumeration_p};
use viewplan::gating::{gate_probability, quality_score, GateParams, SceneQuality};
use viewplan::geometry::{
    scene_from_boxes, visibility_from_pose, BoxSpec, CoverageParams, Intrinsics, Scene,
    VisibilitySet,
};
use viewplan::pose::Pose;
use viewplan::proxy::{
    benchmark_from_logs, benchmark_to_json, run_episodes, ClearanceEstimator, EpisodeConfig,
};
use viewplan::rng;
use viewplan::sampling::{
    build_candidate_pool, Candidate, CandidatePool, Provenance, SamplerParams,
};
use viewplan::selection::{select, Policy, SelectionParams};

const LAMBDA_YAW: f64 = 0.20;
const SIGMA: f64 = 0.35;

/// Synthetic pool: candidate `i` sits at `[dist[i], 0, 0]` with yaw 0, so its
/// novelty distance to the single origin train pose is exactly `dist[i]`.
fn synthetic_pool(dists: &[f64]) -> (CandidatePool, Vec<Pose>) {
    let train = vec![Pose::from_position_yaw([0.0, 0.0, 0.0], 0.0)];
    let candidates = dists
        .iter()
        .enumerate()
        .map(|(i, &d)| Candidate {
            pose: Pose::from_position_yaw([d, 0.0, 0.0], 0.0),
            provenance: if i % 2 == 0 {
                Provenance::Random
            } else {
                Provenance::Robot
            },
            anchor_index: 0,
        })
        .collect();
    let pool = CandidatePool {
        scene_id: "synthetic".to_string(),
        seed: 0,
        params: SamplerParams {
            pool_size: dists.len(),
            ..SamplerParams::default()
        },
        candidates,
    };
    (pool, train)
}

fn to_vis(sets: &[Vec<u64>]) -> Vec<VisibilitySet> {
    sets.iter()
        .map(|s| VisibilitySet::from_voxels(s.iter().map(|&v| [v as i64, 0, 0]).collect()))
        .collect()
}

/// Random voxel sets over `0..n_vox`; set 0 is forced nonempty so the pool
/// union is never empty.
fn random_sets(rng: &mut impl Rng, n: usize, n_vox: u64, max_len: usize) -> Vec<Vec<u64>> {
    (0..n)
        .map(|j| {
            let lo = usize::from(j == 0);
            let len = rng.random_range(lo..=max_len);
            let mut s: Vec<u64> = (0..len).map(|_| rng.random_range(0..n_vox)).collect();
            s.sort_unstable();
            s.dedup();
            s
        })
        .collect()
}

/// Visits every k-combination of `0..n` in lexicographic order.
fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + (i - 1) {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Weighted coverage of a subset: every covered voxel counts once at the
/// largest weight among its coverers, which is what the per-round
/// gain-times-weight objective sums to when the subset is taken in
/// best (descending-weight) order. With unit weights this is `|union|`.
fn weighted_coverage(sets: &[Vec<u64>], weights: &[f64], subset: &[usize]) -> f64 {
    let mut best: BTreeMap<u64, f64> = BTreeMap::new();
    for &i in subset {
        for &v in &sets[i] {
            let w = best.entry(v).or_insert(0.0);
            if weights[i] > *w {
                *w = weights[i];
            }
        }
    }
    best.values().sum()
}

fn union_size(sets: &[Vec<u64>], subset: &[usize]) -> usize {
    let mut u: BTreeSet<u64> = BTreeSet::new();
    for &i in subset {
        u.extend(sets[i].iter().copied());
    }
    u.len()
}

/// Procedural room used by the realistic-scale checks: four walls, a floor,
/// and a handful of furniture boxes, with a four-pose training loop inside.
struct RoomFixture {
    scene: Scene,
    train: Vec<Pose>,
    pool: CandidatePool,
    vis: Vec<VisibilitySet>,
}

fn room_fixture() -> RoomFixture {
    let boxes = [
        BoxSpec { center: [0.0, 4.1, 1.5], size: [10.4, 0.2, 3.0], yaw_deg: 0.0 },
        BoxSpec { center: [0.0, -4.1, 1.5], size: [10.4, 0.2, 3.0], yaw_deg: 0.0 },
        BoxSpec { center: [5.1, 0.0, 1.5], size: [0.2, 8.4, 3.0], yaw_deg: 0.0 },
        BoxSpec { center: [-5.1, 0.0, 1.5], size: [0.2, 8.4, 3.0], yaw_deg: 0.0 },
        BoxSpec { center: [0.0, 0.0, -0.1], size: [10.4, 8.4, 0.2], yaw_deg: 0.0 },
        BoxSpec { center: [1.5, -2.0, 0.4], size: [1.2, 0.7, 0.8], yaw_deg: 0.0 },
        BoxSpec { center: [-2.0, 1.5, 1.5], size: [0.4, 0.4, 3.0], yaw_deg: 0.0 },
        BoxSpec { center: [4.2, 2.0, 1.0], size: [0.5, 1.8, 2.0], yaw_deg: 0.0 },
        BoxSpec { center: [-3.5, -2.5, 0.3], size: [0.8, 0.8, 0.6], yaw_deg: 0.0 },
        BoxSpec { center: [0.5, 1.0, 1.25], size: [2.0, 0.15, 2.5], yaw_deg: 30.0 },
    ];
    let scene = scene_from_boxes("acceptance-room", &boxes);
    let intr = Intrinsics::new(525.0, 525.0, 319.5, 239.5, 640, 480).expect("valid intrinsics");
    let cov = CoverageParams::default();
    let train = vec![
        Pose::from_position_yaw([-2.0, -1.5, 1.4], 0.0),
        Pose::from_position_yaw([2.0, -1.5, 1.4], FRAC_PI_2),
        Pose::from_position_yaw([2.0, 1.5, 1.4], PI),
        Pose::from_position_yaw([-2.0, 1.5, 1.4], -FRAC_PI_2),
    ];
    let pool = build_candidate_pool("acceptance-room", &train, &SamplerParams::default(), 7)
        .expect("pool builds");
    let vis: Vec<VisibilitySet> = pool
        .candidates
        .par_iter()
        .map(|c| visibility_from_pose(&scene, &intr, &c.pose, &cov))
        .collect();
    RoomFixture {
        scene,
        train,
        pool,
        vis,
    }
}

/// Greedy near-optimality against a brute-force subset oracle, for the pure
/// objective and the novelty-weighted objective.
fn criterion_1() -> String {
    let start = Instant::now();
    let bound = 0.632;
    let mut worst_pure = f64::INFINITY;
    let mut worst_weighted = f64::INFINITY;
    for i in 0..50 {
        let mut gen = rng::stream("acceptance-c1", 1, i);
        let n = gen.random_range(6..=15usize);
        let n_vox = gen.random_range(8..=64u64);
        let sets = random_sets(&mut gen, n, n_vox, 10);
        let dists: Vec<f64> = (0..n).map(|_| gen.random_range(0.0..1.0)).collect();
        let weights: Vec<f64> = dists
            .iter()
            .map(|&d| (-((d * d).sqrt()) / SIGMA).exp())
            .collect();
        let (pool, train) = synthetic_pool(&dists);
        let vis = to_vis(&sets);

        for k in 2..=4usize {
            let mut opt_pure = 0usize;
            let mut opt_weighted = 0.0f64;
            for_each_combination(n, k, |subset| {
                opt_pure = opt_pure.max(union_size(&sets, subset));
                let fw = weighted_coverage(&sets, &weights, subset);
                if fw > opt_weighted {
                    opt_weighted = fw;
                }
            });

            let pure = select(
                &pool,
                &vis,
                &train,
                &SelectionParams::new(Policy::Coverage, k),
                0,
            )
            .expect("pure greedy runs");
            let picks: Vec<usize> = pure.selected.iter().map(|s| s.pool_index).collect();
            let got_pure = union_size(&sets, &picks);
            let ratio = got_pure as f64 / opt_pure as f64;
            assert!(
                got_pure as f64 >= bound * opt_pure as f64,
                "pure greedy {got_pure} below {bound} of optimum {opt_pure} (instance {i}, k {k})"
            );
            worst_pure = worst_pure.min(ratio);

            let cn = select(
                &pool,
                &vis,
                &train,
                &SelectionParams::new(Policy::CnCoverage, k),
                0,
            )
            .expect("weighted greedy runs");
            for s in &cn.selected {
                assert!(
                    (s.novelty_weight - weights[s.pool_index]).abs() < 1e-12,
                    "oracle weight disagrees at pool index {}",
                    s.pool_index
                );
            }
            let picks: Vec<usize> = cn.selected.iter().map(|s| s.pool_index).collect();
            let got_weighted = weighted_coverage(&sets, &weights, &picks);
            let ratio = got_weighted / opt_weighted;
            assert!(
                got_weighted >= bound * opt_weighted,
                "weighted greedy {got_weighted:.6} below {bound} of optimum {opt_weighted:.6} \
                 (instance {i}, k {k})"
            );
            worst_weighted = worst_weighted.min(ratio);
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    format!(
        "worst ratios: pure {worst_pure:.3}, weighted {worst_weighted:.3}; {elapsed:.2?}"
    )
}

/// Lazy greedy returns bit-identical results to the exhaustive rescan on 100
/// random instances up to 1000 candidates.
fn criterion_2() -> String {
    let start = Instant::now();
    let mut max_n = 0;
    for i in 0..100u64 {
        let mut gen = rng::stream("acceptance-c2", 2, i);
        let n = 10 + 10 * i as usize;
        max_n = max_n.max(n);
        let sets = random_sets(&mut gen, n, 2000, 60);
        let dists: Vec<f64> = (0..n).map(|_| gen.random_range(0.0..1.0)).collect();
        let budget = gen.random_range(1..=n.min(250));
        let sigma = [SIGMA, 2.0, f64::INFINITY][i as usize % 3];
        let (pool, train) = synthetic_pool(&dists);
        let vis = to_vis(&sets);
        for policy in [Policy::Coverage, Policy::CnCoverage] {
            let mut params = SelectionParams::new(policy, budget);
            params.sigma = sigma;
            let lazy = select(&pool, &vis, &train, &params, 0).expect("lazy runs");
            params.use_lazy = false;
            let naive = select(&pool, &vis, &train, &params, 0).expect("naive runs");
            assert_eq!(lazy, naive, "instance {i}, policy {policy:?}");
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    format!("100 instances up to {max_n} candidates; {elapsed:.2?}")
}

/// Selecting 500 unique poses from the 1000-candidate room pool stays under
/// 5 s single-threaded, and lazy beats the exhaustive rescan by at least 2x.
/// Each variant is timed twice and the faster run counts, so a one-off
/// scheduler stall cannot decide the comparison.
fn criterion_3(fx: &RoomFixture) -> String {
    let mut params = SelectionParams::new(Policy::CnCoverage, 500);
    let timed = |params: &SelectionParams| {
        let mut best = Duration::MAX;
        let mut result = None;
        for _ in 0..2 {
            let t = Instant::now();
            let r = select(&fx.pool, &fx.vis, &fx.train, params, 0).expect("select runs");
            best = best.min(t.elapsed());
            result = Some(r);
        }
        (result.expect("ran at least once"), best)
    };
    let (lazy, t_lazy) = timed(&params);
    params.use_lazy = false;
    let (naive, t_naive) = timed(&params);

    assert_eq!(lazy, naive);
    assert_eq!(lazy.selected.len(), 500);
    let unique: BTreeSet<usize> = lazy.selected.iter().map(|s| s.pool_index).collect();
    assert_eq!(unique.len(), 500, "selections must be distinct");
    assert!(t_lazy <= Duration::from_secs(5), "lazy took {t_lazy:?}");
    assert!(
        t_naive >= 2 * t_lazy,
        "naive {t_naive:?} not 2x slower than lazy {t_lazy:?}"
    );
    format!("lazy {t_lazy:.2?}, naive {t_naive:.2?}")
}

/// Gate arithmetic: midpoint probability, the all-ratios-at-threshold quality
/// score, and monotonicity over 1000 random score pairs.
fn criterion_4() -> String {
    let params = GateParams::default();
    let g = gate_probability(1.0, &params);
    assert!((g - 0.5).abs() <= 1e-12, "g(1.0) = {g}");

    let q = SceneQuality {
        scene_id: "acceptance".to_string(),
        psnr_db: 10.0,
        ssim: 0.20,
        lpips: 0.80,
    };
    let score = quality_score(&q, &params).expect("valid quality");
    assert_eq!(score, 1.0, "q_s(10.0, 0.20, 0.80) = {score}");

    let mut gen = rng::stream("acceptance-c4", 4, 0);
    for _ in 0..1000 {
        let a: f64 = gen.random_range(-2.0..4.0);
        let b: f64 = gen.random_range(-2.0..4.0);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        assert!(
            gate_probability(lo, &params) <= gate_probability(hi, &params),
            "gate not monotone between {lo} and {hi}"
        );
    }
    "g(1.0) = 0.5, q_s at thresholds = 1, monotone over 1000 pairs".to_string()
}

/// Capped resampling: budget 2000 with a 500-unique cap yields a full-length
/// stream whose resampled tail is uniform over the selections (chi-square at
/// the 1% level).
fn criterion_5(fx: &RoomFixture) -> String {
    let params = SelectionParams::new(Policy::CnCoverage, 2000);
    assert_eq!(params.unique_cap, 500);
    let r = select(&fx.pool, &fx.vis, &fx.train, &params, 11).expect("select runs");
    assert_eq!(r.training_stream.len(), 2000);
    assert_eq!(r.selected.len(), 500);
    let unique: BTreeSet<usize> = r.training_stream.iter().copied().collect();
    assert!(unique.len() <= 500, "{} unique indices", unique.len());

    let stream_prefix: Vec<usize> = r.selected.iter().map(|s| s.pool_index).collect();
    assert_eq!(&r.training_stream[..500], &stream_prefix[..]);

    let slot: BTreeMap<usize, usize> = stream_prefix
        .iter()
        .enumerate()
        .map(|(pos, &idx)| (idx, pos))
        .collect();
    let tail = &r.training_stream[500..];
    let mut counts = vec![0usize; 500];
    for idx in tail {
        counts[slot[idx]] += 1;
    }
    let expected = tail.len() as f64 / 500.0;
    let chi2: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    let dist = ChiSquared::new(499.0).expect("valid dof");
    let threshold = dist.inverse_cdf(0.99);
    assert!(
        chi2 < threshold,
        "chi-square {chi2:.1} exceeds the 1% critical value {threshold:.1}"
    );
    format!("chi-square {chi2:.1} < {threshold:.1} over 500 cells")
}

/// Novelty distance: the yaw wrap case, and infinite sigma making the
/// weighted policy equal the pure one on 20 random instances.
fn criterion_6() -> String {
    use viewplan::selection::novelty_distance;
    let train = vec![Pose::from_position_yaw([1.0, 2.0, 0.5], -3.0 * PI / 4.0)];
    let pose = Pose::from_position_yaw([1.0, 2.0, 0.5], 3.0 * PI / 4.0);
    // Raw yaw difference 3pi/2 wraps to -pi/2; same position, so the whole
    // distance is the yaw term.
    let d = novelty_distance(&pose, &train, LAMBDA_YAW).expect("train nonempty");
    let expected = LAMBDA_YAW * (PI / 2.0);
    assert!(
        (d - expected).abs() <= 1e-12,
        "wrap distance {d} vs {expected}"
    );

    for i in 0..20u64 {
        let mut gen = rng::stream("acceptance-c6", 6, i);
        let n = gen.random_range(20..=200usize);
        let sets = random_sets(&mut gen, n, 500, 30);
        let dists: Vec<f64> = (0..n).map(|_| gen.random_range(0.0..1.0)).collect();
        let budget = gen.random_range(1..=n.min(60));
        let (pool, train) = synthetic_pool(&dists);
        let vis = to_vis(&sets);

        let mut params = SelectionParams::new(Policy::CnCoverage, budget);
        params.sigma = f64::INFINITY;
        let cn = select(&pool, &vis, &train, &params, 0).expect("weighted runs");
        let cov = select(
            &pool,
            &vis,
            &train,
            &SelectionParams::new(Policy::Coverage, budget),
            0,
        )
        .expect("pure runs");
        assert_eq!(cn.selected, cov.selected, "instance {i}");
        assert_eq!(cn.covered_union, cov.covered_union);
        assert_eq!(cn.covered_size_trace, cov.covered_size_trace);
        assert_eq!(cn.coverage_fraction_trace, cov.coverage_fraction_trace);
        assert_eq!(cn.training_stream, cov.training_stream);
        assert_eq!(cn.pool_union_size, cov.pool_union_size);
    }
    "wrap case to 1e-12; infinite sigma equals pure coverage on 20 instances".to_string()
}

/// Oracle episodes never collide, and the benchmark JSON is byte-identical
/// across reruns.
fn criterion_7(fx: &RoomFixture) -> String {
    let start = Instant::now();
    let cfg = EpisodeConfig {
        seed: 5,
        ..EpisodeConfig::default()
    };
    assert_eq!(cfg.n_episodes, 1000);
    let run = || {
        let logs = run_episodes(&fx.scene, &cfg, &ClearanceEstimator::Oracle).expect("runs");
        let result = benchmark_from_logs(&cfg, &ClearanceEstimator::Oracle, &logs);
        let json = benchmark_to_json(&result).expect("serializes");
        (logs, json)
    };
    let (logs, json_a) = run();
    let collisions: usize = logs.iter().map(|l| l.counters.collisions).sum();
    assert_eq!(collisions, 0, "oracle episodes must never collide");
    let (_, json_b) = run();
    assert_eq!(json_a, json_b, "rerun JSON differs");
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    format!("1000 episodes, zero collisions, identical rerun; {elapsed:.2?}")
}

/// The budget-stability summary reproduces the published gated-run numbers
/// from their per-budget values within two-decimal rounding tolerance.
fn criterion_8() -> String {
    let values = BTreeMap::from([(200, 0.31), (500, 0.31), (1000, 0.33), (2000, 0.32)]);
    let s = stability_summary(&values, 200).expect("nonempty");
    assert!((s.mean - 0.317).abs() <= 0.01, "mean {}", s.mean);
    assert!((s.worst - 0.328).abs() <= 0.01, "worst {}", s.worst);
    assert!((s.range - 0.020).abs() <= 0.01, "range {}", s.range);
    format!(
        "mean {:.4}, worst {:.2}, range {:.2} within 0.01 of (0.317, 0.328, 0.020)",
        s.mean, s.worst, s.range
    )
}

/// Exact signed-rank p-values match full sign enumeration on 240 random
/// inputs with up to 12 paired deltas, including zeros and ties.
fn criterion_9() -> String {
    let mut trials = 0;
    for t in 0..240u64 {
        let mut gen = rng::stream("acceptance-c9", 9, t);
        let n = gen.random_range(1..=12usize);
        let deltas: Vec<f64> = (0..n)
            .map(|_| match gen.random_range(0..10u32) {
                0 => 0.0,
                1..=5 => f64::from(gen.random_range(-6..=6i32)) * 0.5,
                _ => gen.random_range(-1.0..1.0),
            })
            .collect();
        let fast = paired_wilcoxon(&deltas).expect("valid deltas");
        let slow = wilcoxon_enumeration_p(&deltas).expect("within enumeration cap");
        assert!(fast.exact, "n <= 12 must use the exact path");
        assert!(
            (fast.p_value - slow).abs() <= 1e-12,
            "trial {t}: {} vs {} for {deltas:?}",
            fast.p_value,
            slow
        );
        trials += 1;
    }
    format!("{trials} trials, exact p == enumeration p")
}

/// Coverage fraction is nondecreasing in the budget and never exceeds 1 for
/// every policy over the full budget sweep on the room pool.
fn criterion_10(fx: &RoomFixture) -> String {
    let budgets = [0usize, 25, 50, 100, 200, 500, 1000, 2000];
    let policies = [
        Policy::Random,
        Policy::Robot,
        Policy::Coverage,
        Policy::CnCoverage,
        Policy::StochGreedyCoverage,
    ];
    for policy in policies {
        let mut prev = 0.0f64;
        for &budget in &budgets {
            let params = SelectionParams::new(policy, budget);
            let r = select(&fx.pool, &fx.vis, &fx.train, &params, 3).expect("select runs");
            let f = r.final_fraction();
            assert!(f <= 1.0, "{policy:?} at {budget}: fraction {f}");
            assert!(
                f >= prev,
                "{policy:?}: fraction fell from {prev} to {f} at budget {budget}"
            );
            prev = f;
        }
    }
    format!("{} policies x {} budgets monotone and <= 1", policies.len(), budgets.len())
}

fn run_criterion(
    number: usize,
    label: &str,
    failures: &mut Vec<String>,
    f: impl FnOnce() -> String,
) {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(detail) => println!("[PASS] criterion {number}: {label} ({detail})"),
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".to_string());
            println!("[FAIL] criterion {number}: {label}: {msg}");
            failures.push(format!("criterion {number} ({label}): {msg}"));
        }
    }
}

#[test]
fn acceptance() {
    let fx = room_fixture();
    let mut failures = Vec::new();
    run_criterion(1, "greedy within 0.632 of brute force", &mut failures, criterion_1);
    run_criterion(2, "lazy greedy equals exhaustive rescan", &mut failures, criterion_2);
    run_criterion(3, "500-of-1000 selection throughput", &mut failures, || {
        criterion_3(&fx)
    });
    run_criterion(4, "gate arithmetic and monotonicity", &mut failures, criterion_4);
    run_criterion(5, "capped stream resamples uniformly", &mut failures, || {
        criterion_5(&fx)
    });
    run_criterion(6, "novelty wrap and infinite-sigma equality", &mut failures, criterion_6);
    run_criterion(7, "oracle proxy is safe and deterministic", &mut failures, || {
        criterion_7(&fx)
    });
    run_criterion(8, "stability summary matches published row", &mut failures, criterion_8);
    run_criterion(9, "signed-rank p matches enumeration", &mut failures, criterion_9);
    run_criterion(10, "coverage fraction monotone in budget", &mut failures, || {
        criterion_10(&fx)
    });
    assert!(
        failures.is_empty(),
        "{} acceptance criteria failed:\n{}",
        failures.len(),
        failures.join("\n")
    );
}
