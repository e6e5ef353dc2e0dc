//! Candidate pose pools around a training trajectory.
//!
//! Two samplers share the pool: an isotropic jitter sampler (`random`) and a
//! reachability-shaped arc sampler (`robot`). Each candidate draws from its
//! own stream keyed by `(scene_id, seed, candidate index)`, so the pool is a
//! pure function of its inputs and can be rebuilt candidate-by-candidate.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::{deg_to_rad, wrap_angle, Pose, PoseRecord};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Random,
    Robot,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerParams {
    /// Per-axis standard deviation of the translation jitter, meters.
    pub trans_sigma: [f64; 3],
    /// Standard deviation of the yaw jitter, degrees.
    pub yaw_sigma_deg: f64,
    /// Planar displacement radius range for the arc sampler, meters.
    pub arc_radius_range: [f64; 2],
    /// Heading offset range for the arc sampler, degrees.
    pub arc_heading_range_deg: [f64; 2],
    /// Symmetric vertical jitter bound for the arc sampler, meters.
    pub z_jitter: f64,
    /// Number of candidates in the pool.
    pub pool_size: usize,
    /// Fraction of the pool drawn by the jitter sampler; the rest is arc.
    pub random_fraction: f64,
}

impl Default for SamplerParams {
    fn default() -> Self {
        SamplerParams {
            trans_sigma: [0.12, 0.12, 0.05],
            yaw_sigma_deg: 10.0,
            arc_radius_range: [0.15, 0.35],
            arc_heading_range_deg: [-45.0, 45.0],
            z_jitter: 0.05,
            pool_size: 1000,
            random_fraction: 0.5,
        }
    }
}

impl SamplerParams {
    pub fn validate(&self) -> Result<()> {
        if self.trans_sigma.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::param("trans_sigma", "must be finite and >= 0"));
        }
        if !self.yaw_sigma_deg.is_finite() || self.yaw_sigma_deg < 0.0 {
            return Err(Error::param("yaw_sigma_deg", "must be finite and >= 0"));
        }
        let [r0, r1] = self.arc_radius_range;
        if !(r0.is_finite() && r1.is_finite()) || r0 < 0.0 || r1 < r0 {
            return Err(Error::param(
                "arc_radius_range",
                "must satisfy 0 <= min <= max",
            ));
        }
        let [h0, h1] = self.arc_heading_range_deg;
        if !(h0.is_finite() && h1.is_finite()) || h1 < h0 {
            return Err(Error::param(
                "arc_heading_range_deg",
                "must satisfy min <= max",
            ));
        }
        if !self.z_jitter.is_finite() || self.z_jitter < 0.0 {
            return Err(Error::param("z_jitter", "must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.random_fraction) {
            return Err(Error::param("random_fraction", "must be in [0, 1]"));
        }
        Ok(())
    }

    /// Number of jitter-sampled candidates: `round(pool_size * fraction)`.
    pub fn random_count(&self) -> usize {
        ((self.pool_size as f64) * self.random_fraction).round() as usize
    }
}

#[derive(Clone, Debug)]
pub struct Candidate {
    pub pose: Pose,
    pub provenance: Provenance,
    /// Index of the train pose this candidate was anchored to.
    pub anchor_index: usize,
}

/// Candidate pool: generation order is all jitter candidates, then all arc
/// candidates, with indices `0..pool_size` matching the stream index used to
/// draw each candidate.
#[derive(Clone, Debug)]
pub struct CandidatePool {
    pub scene_id: String,
    pub seed: u64,
    pub params: SamplerParams,
    pub candidates: Vec<Candidate>,
}

impl CandidatePool {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Pool indices with the given provenance, in pool order.
    pub fn indices_with_provenance(&self, p: Provenance) -> Vec<usize> {
        self.candidates
            .iter()
            .enumerate()
            .filter(|(_, c)| c.provenance == p)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Jitter sampler: anchor position plus per-axis Gaussian translation, yaw
/// rotated by a Gaussian offset about the world up axis (roll and pitch kept).
/// Draw order: x, y, z translation, then yaw.
pub fn sample_random_candidate(anchor: &Pose, params: &SamplerParams, rng: &mut ChaCha8Rng) -> Pose {
    let zx: f64 = rng.sample(StandardNormal);
    let zy: f64 = rng.sample(StandardNormal);
    let zz: f64 = rng.sample(StandardNormal);
    let zyaw: f64 = rng.sample(StandardNormal);
    let delta = nalgebra::Vector3::new(
        params.trans_sigma[0] * zx,
        params.trans_sigma[1] * zy,
        params.trans_sigma[2] * zz,
    );
    let yaw = wrap_angle(anchor.yaw() + deg_to_rad(params.yaw_sigma_deg) * zyaw);
    anchor.translated(delta).with_yaw(yaw)
}

/// Arc sampler: displaces the anchor by a uniform radius along the heading
/// `anchor.yaw + theta` (theta uniform in the heading range), jitters z
/// uniformly, and turns the camera to face along the displaced heading.
/// Draw order: radius, heading offset, z jitter.
pub fn sample_robot_candidate(anchor: &Pose, params: &SamplerParams, rng: &mut ChaCha8Rng) -> Pose {
    let [r0, r1] = params.arc_radius_range;
    let rho: f64 = rng.random_range(r0..=r1);
    let [h0, h1] = params.arc_heading_range_deg;
    let theta = deg_to_rad(rng.random_range(h0..=h1));
    let dz: f64 = if params.z_jitter > 0.0 {
        rng.random_range(-params.z_jitter..=params.z_jitter)
    } else {
        0.0
    };
    let heading = wrap_angle(anchor.yaw() + theta);
    let delta = nalgebra::Vector3::new(rho * heading.cos(), rho * heading.sin(), dz);
    anchor.translated(delta).with_yaw(heading)
}

/// Builds the candidate pool. Candidate `i` draws its anchor (uniform over
/// train poses) and its jitter from the stream keyed `(scene_id, seed, i)`;
/// indices below `round(pool_size * random_fraction)` use the jitter sampler
/// and the rest use the arc sampler.
pub fn build_candidate_pool(
    scene_id: &str,
    train_poses: &[Pose],
    params: &SamplerParams,
    seed: u64,
) -> Result<CandidatePool> {
    params.validate()?;
    if train_poses.is_empty() {
        return Err(Error::EmptyTrainPoses);
    }
    let n_random = params.random_count();
    let mut candidates = Vec::with_capacity(params.pool_size);
    for i in 0..params.pool_size {
        let mut rng = rng::stream(scene_id, seed, i as u64);
        let anchor_index = rng.random_range(0..train_poses.len());
        let anchor = &train_poses[anchor_index];
        let (pose, provenance) = if i < n_random {
            (
                sample_random_candidate(anchor, params, &mut rng),
                Provenance::Random,
            )
        } else {
            (
                sample_robot_candidate(anchor, params, &mut rng),
                Provenance::Robot,
            )
        };
        candidates.push(Candidate {
            pose,
            provenance,
            anchor_index,
        });
    }
    Ok(CandidatePool {
        scene_id: scene_id.to_string(),
        seed,
        params: *params,
        candidates,
    })
}

/// Serialized pool: params echo plus per-candidate pose records.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PoolRecord {
    pub scene_id: String,
    pub seed: u64,
    pub params: SamplerParams,
    pub candidates: Vec<CandidateRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CandidateRecord {
    #[serde(flatten)]
    pub pose: PoseRecord,
    pub provenance: Provenance,
    pub anchor_index: usize,
}

impl From<&CandidatePool> for PoolRecord {
    fn from(pool: &CandidatePool) -> Self {
        PoolRecord {
            scene_id: pool.scene_id.clone(),
            seed: pool.seed,
            params: pool.params,
            candidates: pool
                .candidates
                .iter()
                .map(|c| CandidateRecord {
                    pose: PoseRecord::from(&c.pose),
                    provenance: c.provenance,
                    anchor_index: c.anchor_index,
                })
                .collect(),
        }
    }
}

/// Pool JSON, stable field order, trailing newline.
pub fn pool_to_json(pool: &CandidatePool) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&PoolRecord::from(pool))?;
    s.push('\n');
    Ok(s)
}

/// Parses a serialized pool back into pose records, revalidating each pose.
pub fn pool_from_json(text: &str) -> Result<PoolRecord> {
    let record: PoolRecord = serde_json::from_str(text)?;
    for c in &record.candidates {
        Pose::try_from(&c.pose)?;
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn train() -> Vec<Pose> {
        vec![
            Pose::from_position_yaw([0.0, 0.0, 1.0], 0.0),
            Pose::from_position_yaw([1.0, 0.5, 1.1], 0.8),
            Pose::from_position_yaw([2.0, -0.5, 0.9], -1.4),
        ]
    }

    #[test]
    fn zero_sigma_jitter_reproduces_anchor() {
        let params = SamplerParams {
            trans_sigma: [0.0; 3],
            yaw_sigma_deg: 0.0,
            pool_size: 16,
            random_fraction: 1.0,
            ..Default::default()
        };
        let pool = build_candidate_pool("scene", &train(), &params, 7).unwrap();
        let anchors = train();
        for c in &pool.candidates {
            let a = &anchors[c.anchor_index];
            assert_eq!(c.pose.position(), a.position());
            assert_abs_diff_eq!(c.pose.yaw(), a.yaw(), epsilon = 1e-12);
        }
    }

    #[test]
    fn degenerate_arc_ranges_give_exact_displacement() {
        let params = SamplerParams {
            arc_radius_range: [0.15, 0.15],
            arc_heading_range_deg: [0.0, 0.0],
            z_jitter: 0.0,
            pool_size: 8,
            random_fraction: 0.0,
            ..Default::default()
        };
        let anchors = train();
        let pool = build_candidate_pool("scene", &anchors, &params, 3).unwrap();
        for c in &pool.candidates {
            let a = &anchors[c.anchor_index];
            let d = c.pose.position() - a.position();
            assert_abs_diff_eq!(d.norm(), 0.15, epsilon = 1e-12);
            // Displacement is along the anchor heading; yaw matches it.
            assert_abs_diff_eq!(d.y.atan2(d.x), a.yaw(), epsilon = 1e-12);
            assert_abs_diff_eq!(c.pose.yaw(), a.yaw(), epsilon = 1e-12);
            assert_eq!(d.z, 0.0);
        }
    }

    #[test]
    fn arc_displacement_stays_in_radius_band() {
        let params = SamplerParams {
            pool_size: 256,
            random_fraction: 0.0,
            ..Default::default()
        };
        let anchors = train();
        let pool = build_candidate_pool("scene", &anchors, &params, 11).unwrap();
        for c in &pool.candidates {
            let a = &anchors[c.anchor_index];
            let d = c.pose.position() - a.position();
            let planar = (d.x * d.x + d.y * d.y).sqrt();
            assert!((0.15..=0.35).contains(&planar), "planar {planar}");
            assert!(d.z.abs() <= 0.05 + 1e-12);
        }
    }

    #[test]
    fn pool_split_matches_fraction_and_order() {
        let params = SamplerParams {
            pool_size: 1000,
            random_fraction: 0.5,
            ..Default::default()
        };
        let pool = build_candidate_pool("scene", &train(), &params, 5).unwrap();
        assert_eq!(pool.len(), 1000);
        let randoms = pool.indices_with_provenance(Provenance::Random);
        let robots = pool.indices_with_provenance(Provenance::Robot);
        assert_eq!(randoms.len(), 500);
        assert_eq!(robots.len(), 500);
        assert_eq!(randoms, (0..500).collect::<Vec<_>>());
        assert_eq!(robots, (500..1000).collect::<Vec<_>>());
    }

    #[test]
    fn single_candidate_pool() {
        let params = SamplerParams {
            pool_size: 1,
            ..Default::default()
        };
        let pool = build_candidate_pool("scene", &train(), &params, 5).unwrap();
        assert_eq!(pool.len(), 1);
    }

    #[test]
    fn empty_train_poses_rejected() {
        let params = SamplerParams::default();
        assert!(matches!(
            build_candidate_pool("scene", &[], &params, 5),
            Err(Error::EmptyTrainPoses)
        ));
    }

    #[test]
    fn yaw_always_wrapped() {
        let params = SamplerParams {
            pool_size: 200,
            ..Default::default()
        };
        let anchors = vec![Pose::from_position_yaw([0.0; 3], PI - 1e-3)];
        let pool = build_candidate_pool("scene", &anchors, &params, 2).unwrap();
        for c in &pool.candidates {
            let y = c.pose.yaw();
            assert!(y > -PI && y <= PI, "yaw {y} out of range");
        }
    }

    #[test]
    fn pool_serialization_is_byte_identical_across_rebuilds() {
        let params = SamplerParams {
            pool_size: 64,
            ..Default::default()
        };
        let a = build_candidate_pool("scene", &train(), &params, 9).unwrap();
        let b = build_candidate_pool("scene", &train(), &params, 9).unwrap();
        assert_eq!(pool_to_json(&a).unwrap(), pool_to_json(&b).unwrap());
        let c = build_candidate_pool("scene", &train(), &params, 10).unwrap();
        assert_ne!(pool_to_json(&a).unwrap(), pool_to_json(&c).unwrap());
    }

    #[test]
    fn pool_json_roundtrips() {
        let params = SamplerParams {
            pool_size: 16,
            ..Default::default()
        };
        let pool = build_candidate_pool("scene", &train(), &params, 9).unwrap();
        let text = pool_to_json(&pool).unwrap();
        let record = pool_from_json(&text).unwrap();
        assert_eq!(record.candidates.len(), 16);
        assert_eq!(record.scene_id, "scene");
    }

    #[test]
    fn jitter_moments_match_parameters() {
        // 10k draws from a single anchor: sample std within 5% of sigma.
        let params = SamplerParams {
            pool_size: 10_000,
            random_fraction: 1.0,
            ..Default::default()
        };
        let anchors = vec![Pose::from_position_yaw([0.0; 3], 0.3)];
        let pool = build_candidate_pool("moments", &anchors, &params, 13).unwrap();
        let dx: Vec<f64> = pool.candidates.iter().map(|c| c.pose.position().x).collect();
        let dz: Vec<f64> = pool.candidates.iter().map(|c| c.pose.position().z).collect();
        let dyaw: Vec<f64> = pool
            .candidates
            .iter()
            .map(|c| wrap_angle(c.pose.yaw() - 0.3))
            .collect();
        let std = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
        };
        assert_abs_diff_eq!(std(&dx), 0.12, epsilon = 0.12 * 0.05);
        assert_abs_diff_eq!(std(&dz), 0.05, epsilon = 0.05 * 0.05);
        assert_abs_diff_eq!(std(&dyaw), deg_to_rad(10.0), epsilon = deg_to_rad(10.0) * 0.05);
    }

    #[test]
    fn arc_headings_uniform_by_ks_test() {
        // Headings (relative to the anchor yaw) should be uniform on
        // [-45, 45] degrees; one-sample KS against the uniform CDF at
        // alpha = 0.01 (critical value 1.63 / sqrt(n)).
        let params = SamplerParams {
            pool_size: 4000,
            random_fraction: 0.0,
            ..Default::default()
        };
        let anchors = vec![Pose::from_position_yaw([0.0; 3], 0.0)];
        let pool = build_candidate_pool("ks", &anchors, &params, 17).unwrap();
        let mut u: Vec<f64> = pool
            .candidates
            .iter()
            .map(|c| (c.pose.yaw().to_degrees() + 45.0) / 90.0)
            .collect();
        u.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = u.len() as f64;
        let mut d: f64 = 0.0;
        for (i, x) in u.iter().enumerate() {
            let lo = i as f64 / n;
            let hi = (i + 1) as f64 / n;
            d = d.max((x - lo).abs()).max((hi - x).abs());
        }
        assert!(d < 1.63 / n.sqrt(), "KS statistic {d} too large");
    }
}
