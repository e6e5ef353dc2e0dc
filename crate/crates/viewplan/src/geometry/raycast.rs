//! Ray-triangle intersection and a bounding-volume hierarchy.
//!
//! The BVH is purely an optimization: `Bvh::nearest` and
//! `nearest_hit_linear` return identical hits on every input, including the
//! lowest-triangle-index rule for equal-distance hits (rays through shared
//! edges). Traversal therefore only prunes nodes whose entry parameter is
//! strictly beyond the current best hit.

use nalgebra::Vector3;

use super::mesh::{Aabb, Triangle};

/// Parameter `t` must exceed this to count as a hit, which rejects
/// origin-on-surface self hits.
const T_MIN: f64 = 1e-9;

/// Determinant cutoff below which a ray is treated as parallel to the plane.
const DET_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    /// Ray parameter of the hit: `point = origin + t * dir`.
    pub t: f64,
    /// Index of the hit triangle in the scene's triangle list.
    pub tri: usize,
}

/// Moller-Trumbore with inclusive edges, so shared-edge rays hit both
/// adjacent triangles and the index tie rule picks one deterministically.
pub fn ray_triangle(origin: Vector3<f64>, dir: Vector3<f64>, tri: &Triangle) -> Option<f64> {
    let e1 = tri.b - tri.a;
    let e2 = tri.c - tri.a;
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    if det.abs() < DET_EPS {
        return None;
    }
    let inv_det = 1.0 / det;
    let tvec = origin - tri.a;
    let u = tvec.dot(&pvec) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(&e1);
    let v = dir.dot(&qvec) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&qvec) * inv_det;
    (t > T_MIN).then_some(t)
}

/// Whether the ray crosses the triangle at any `t > 0`. Inside/outside
/// parity tests count crossings over all triangles instead of ranking them.
pub fn ray_crossing(origin: Vector3<f64>, dir: Vector3<f64>, tri: &Triangle) -> bool {
    ray_triangle(origin, dir, tri).is_some()
}

fn closer(t: f64, tri: usize, best: &Option<Hit>) -> bool {
    match best {
        None => true,
        Some(b) => t < b.t || (t == b.t && tri < b.tri),
    }
}

/// Exhaustive nearest hit; ties resolve to the lowest triangle index.
pub fn nearest_hit_linear(
    triangles: &[Triangle],
    origin: Vector3<f64>,
    dir: Vector3<f64>,
) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for (i, tri) in triangles.iter().enumerate() {
        if let Some(t) = ray_triangle(origin, dir, tri) {
            if closer(t, i, &best) {
                best = Some(Hit { t, tri: i });
            }
        }
    }
    best
}

#[derive(Clone, Debug)]
enum NodeKind {
    Leaf { start: u32, end: u32 },
    Internal { left: u32, right: u32 },
}

#[derive(Clone, Debug)]
struct Node {
    bounds: Aabb,
    kind: NodeKind,
}

const LEAF_SIZE: usize = 4;

/// Median-split BVH over triangle indices.
#[derive(Clone, Debug, Default)]
pub struct Bvh {
    nodes: Vec<Node>,
    /// Original triangle indices, permuted so each leaf owns a range.
    items: Vec<u32>,
}

impl Bvh {
    pub fn build(triangles: &[Triangle]) -> Bvh {
        let mut bvh = Bvh {
            nodes: Vec::new(),
            items: (0..triangles.len() as u32).collect(),
        };
        if triangles.is_empty() {
            return bvh;
        }
        let centroids: Vec<Vector3<f64>> = triangles.iter().map(|t| t.centroid()).collect();
        bvh.build_range(triangles, &centroids, 0, triangles.len());
        bvh
    }

    fn build_range(
        &mut self,
        triangles: &[Triangle],
        centroids: &[Vector3<f64>],
        start: usize,
        end: usize,
    ) -> u32 {
        let mut bounds = Aabb::empty();
        for &i in &self.items[start..end] {
            bounds.merge(&triangles[i as usize].bounds());
        }
        let node_id = self.nodes.len() as u32;
        self.nodes.push(Node {
            bounds,
            kind: NodeKind::Leaf {
                start: start as u32,
                end: end as u32,
            },
        });
        if end - start <= LEAF_SIZE {
            return node_id;
        }
        let mut cb = Aabb::empty();
        for &i in &self.items[start..end] {
            cb.grow(centroids[i as usize]);
        }
        let ext = cb.extent();
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let mid = (start + end) / 2;
        // Tie-break on index keeps the ordering total and the build
        // deterministic for degenerate centroid distributions.
        self.items[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a as usize][axis]
                .partial_cmp(&centroids[b as usize][axis])
                .unwrap()
                .then(a.cmp(&b))
        });
        let left = self.build_range(triangles, centroids, start, mid);
        let right = self.build_range(triangles, centroids, mid, end);
        self.nodes[node_id as usize].kind = NodeKind::Internal { left, right };
        node_id
    }

    /// Nearest hit; identical to `nearest_hit_linear` on every input.
    pub fn nearest(
        &self,
        triangles: &[Triangle],
        origin: Vector3<f64>,
        dir: Vector3<f64>,
    ) -> Option<Hit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv_dir = dir.map(|v| 1.0 / v);
        let mut best: Option<Hit> = None;
        let mut stack = vec![0u32];
        while let Some(node_id) = stack.pop() {
            let node = &self.nodes[node_id as usize];
            let entry = match node.bounds.ray_entry(origin, inv_dir) {
                Some(t) => t,
                None => continue,
            };
            if let Some(b) = &best {
                // Strict: a node entered exactly at the best distance can
                // still contain an equal-t, lower-index triangle.
                if entry > b.t {
                    continue;
                }
            }
            match node.kind {
                NodeKind::Leaf { start, end } => {
                    for &i in &self.items[start as usize..end as usize] {
                        let tri = i as usize;
                        if let Some(t) = ray_triangle(origin, dir, &triangles[tri]) {
                            if closer(t, tri, &best) {
                                best = Some(Hit { t, tri });
                            }
                        }
                    }
                }
                NodeKind::Internal { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wall_z(z: f64) -> [Triangle; 2] {
        [
            Triangle::new([-5.0, -5.0, z], [5.0, -5.0, z], [5.0, 5.0, z]),
            Triangle::new([-5.0, -5.0, z], [5.0, 5.0, z], [-5.0, 5.0, z]),
        ]
    }

    #[test]
    fn axis_ray_hits_wall_at_exact_depth() {
        let tris = wall_z(2.0);
        let t = ray_triangle(Vector3::zeros(), Vector3::new(0.0, 0.0, 1.0), &tris[0]);
        assert_eq!(t, Some(2.0));
    }

    #[test]
    fn shared_edge_resolves_to_lowest_index() {
        let tris = wall_z(2.0).to_vec();
        // The diagonal x == y is shared by both triangles.
        let hit = nearest_hit_linear(&tris, Vector3::new(1.0, 1.0, 0.0), Vector3::new(0.0, 0.0, 1.0))
            .unwrap();
        assert_eq!(hit.tri, 0);
        assert_eq!(hit.t, 2.0);
    }

    #[test]
    fn nearer_surface_wins() {
        let mut tris = wall_z(2.0).to_vec();
        tris.extend(wall_z(1.0));
        let hit = nearest_hit_linear(&tris, Vector3::zeros(), Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(hit.t, 1.0);
        assert_eq!(hit.tri, 2);
    }

    #[test]
    fn behind_origin_is_not_hit() {
        let tris = wall_z(-1.0).to_vec();
        assert!(nearest_hit_linear(&tris, Vector3::zeros(), Vector3::new(0.0, 0.0, 1.0)).is_none());
    }

    #[test]
    fn bvh_matches_linear_on_shared_edges() {
        let tris = wall_z(2.0).to_vec();
        let bvh = Bvh::build(&tris);
        let origin = Vector3::new(1.0, 1.0, 0.0);
        let dir = Vector3::new(0.0, 0.0, 1.0);
        assert_eq!(
            bvh.nearest(&tris, origin, dir),
            nearest_hit_linear(&tris, origin, dir)
        );
    }
}
