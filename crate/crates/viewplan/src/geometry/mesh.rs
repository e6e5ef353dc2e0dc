//! Triangle scenes and axis-aligned bounds.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::raycast::{Bvh, Hit};
use crate::pose::deg_to_rad;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triangle {
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
    pub c: Vector3<f64>,
}

impl Triangle {
    pub fn new(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> Self {
        Triangle {
            a: Vector3::from(a),
            b: Vector3::from(b),
            c: Vector3::from(c),
        }
    }

    pub fn bounds(&self) -> Aabb {
        let mut bb = Aabb::empty();
        bb.grow(self.a);
        bb.grow(self.b);
        bb.grow(self.c);
        bb
    }

    pub fn centroid(&self) -> Vector3<f64> {
        (self.a + self.b + self.c) / 3.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Vector3::repeat(f64::INFINITY),
            max: Vector3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x
    }

    pub fn grow(&mut self, p: Vector3<f64>) {
        self.min = self.min.inf(&p);
        self.max = self.max.sup(&p);
    }

    pub fn merge(&mut self, other: &Aabb) {
        self.min = self.min.inf(&other.min);
        self.max = self.max.sup(&other.max);
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn contains(&self, p: Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// Slab-test entry parameter of a ray against the box, or `None` when the
    /// ray misses. The entry is clamped to 0 for rays starting inside.
    pub fn ray_entry(&self, origin: Vector3<f64>, inv_dir: Vector3<f64>) -> Option<f64> {
        let mut t_near = 0.0f64;
        let mut t_far = f64::INFINITY;
        for i in 0..3 {
            let t0 = (self.min[i] - origin[i]) * inv_dir[i];
            let t1 = (self.max[i] - origin[i]) * inv_dir[i];
            let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
            // NaN from 0 * inf (ray parallel, origin on slab plane): treat the
            // axis as unconstrained rather than rejecting.
            if lo.is_nan() || hi.is_nan() {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            t_near = t_near.max(lo);
            t_far = t_far.min(hi);
            if t_near > t_far {
                return None;
            }
        }
        Some(t_near)
    }
}

/// Immutable triangle scene with a prebuilt traversal index.
///
/// The accelerated and linear nearest-hit queries return identical results,
/// including the tie rule: equal-distance hits resolve to the lowest triangle
/// index.
#[derive(Clone, Debug)]
pub struct Scene {
    id: String,
    triangles: Vec<Triangle>,
    bounds: Aabb,
    bvh: Bvh,
}

impl Scene {
    pub fn new(id: impl Into<String>, triangles: Vec<Triangle>) -> Self {
        let mut bounds = Aabb::empty();
        for t in &triangles {
            bounds.merge(&t.bounds());
        }
        let bvh = Bvh::build(&triangles);
        Scene {
            id: id.into(),
            triangles,
            bounds,
            bvh,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Nearest hit along `origin + t * dir` for `t > 0`, accelerated.
    pub fn nearest_hit(&self, origin: Vector3<f64>, dir: Vector3<f64>) -> Option<Hit> {
        self.bvh.nearest(&self.triangles, origin, dir)
    }

    /// Nearest hit by exhaustive scan. Reference implementation for tests.
    pub fn nearest_hit_linear(&self, origin: Vector3<f64>, dir: Vector3<f64>) -> Option<Hit> {
        super::raycast::nearest_hit_linear(&self.triangles, origin, dir)
    }
}

/// Axis-aligned box, optionally rotated about the world up axis, used to
/// describe procedural scenes (walls are thin boxes).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub center: [f64; 3],
    pub size: [f64; 3],
    #[serde(default)]
    pub yaw_deg: f64,
}

/// Twelve triangles for a box: faces in -x, +x, -y, +y, -z, +z order, two
/// triangles each, corners rotated about the box center by `yaw_deg`.
pub fn box_triangles(spec: &BoxSpec) -> Vec<Triangle> {
    let c = Vector3::from(spec.center);
    let h = Vector3::from(spec.size) * 0.5;
    let yaw = deg_to_rad(spec.yaw_deg);
    let (sin, cos) = yaw.sin_cos();
    let corner = |sx: f64, sy: f64, sz: f64| {
        let local = Vector3::new(sx * h.x, sy * h.y, sz * h.z);
        let rotated = Vector3::new(
            cos * local.x - sin * local.y,
            sin * local.x + cos * local.y,
            local.z,
        );
        c + rotated
    };
    // Corner index = bits (x, y, z), negative first.
    let p: Vec<Vector3<f64>> = (0..8)
        .map(|i| {
            corner(
                if i & 1 == 0 { -1.0 } else { 1.0 },
                if i & 2 == 0 { -1.0 } else { 1.0 },
                if i & 4 == 0 { -1.0 } else { 1.0 },
            )
        })
        .collect();
    let quads = [
        [0, 2, 6, 4], // -x
        [1, 5, 7, 3], // +x
        [0, 4, 5, 1], // -y
        [2, 3, 7, 6], // +y
        [0, 1, 3, 2], // -z
        [4, 6, 7, 5], // +z
    ];
    let mut tris = Vec::with_capacity(12);
    for q in quads {
        tris.push(Triangle {
            a: p[q[0]],
            b: p[q[1]],
            c: p[q[2]],
        });
        tris.push(Triangle {
            a: p[q[0]],
            b: p[q[2]],
            c: p[q[3]],
        });
    }
    tris
}

/// Scene assembled from box specs in order; triangles follow the box order,
/// twelve per box.
pub fn scene_from_boxes(id: impl Into<String>, boxes: &[BoxSpec]) -> Scene {
    let mut tris = Vec::with_capacity(boxes.len() * 12);
    for b in boxes {
        tris.extend(box_triangles(b));
    }
    Scene::new(id, tris)
}
