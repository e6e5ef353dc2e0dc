//! Scenes, depth rendering, and voxel visibility.
//!
//! Depth is the camera-z (projective) component of the hit point, not the
//! Euclidean ray length. A pixel is valid when its ray hits a triangle whose
//! hit point lies within `max_range` meters of the camera center. Visible
//! voxels come from backprojecting valid depth samples on a fixed pixel
//! stride and flooring world coordinates into a grid anchored at the world
//! origin: `id_axis = floor(coord / voxel_size)`.

mod mesh;
mod raycast;
mod render;

pub use mesh::{box_triangles, scene_from_boxes, Aabb, BoxSpec, Scene, Triangle};
pub use raycast::{nearest_hit_linear, ray_crossing, Bvh, Hit};
pub use render::{render_depth, visibility_from_pose, visibility_set};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pinhole intrinsics. `fx, fy` in pixels, principal point `(cx, cy)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        if !(fx.is_finite() && fy.is_finite() && cx.is_finite() && cy.is_finite()) {
            return Err(Error::InvalidIntrinsics("non-finite entries".into()));
        }
        if fx <= 0.0 || fy <= 0.0 {
            return Err(Error::InvalidIntrinsics(format!(
                "focal lengths must be positive, got fx={fx}, fy={fy}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidIntrinsics(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        Ok(Intrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }
}

/// Voxelization and sampling parameters for visibility extraction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageParams {
    /// Grid pitch in meters.
    pub voxel_size: f64,
    /// Pixel stride for backprojection; the sample grid starts at pixel (0, 0).
    pub depth_stride: u32,
    /// Maximum distance from the camera center to a counted surface point.
    pub max_range: f64,
}

impl CoverageParams {
    pub fn new(voxel_size: f64, depth_stride: u32, max_range: f64) -> Result<Self> {
        if !(voxel_size.is_finite() && voxel_size > 0.0) {
            return Err(Error::param("voxel_size", "must be finite and positive"));
        }
        if depth_stride == 0 {
            return Err(Error::param("depth_stride", "must be positive"));
        }
        if !(max_range.is_finite() && max_range > 0.0) {
            return Err(Error::param("max_range", "must be finite and positive"));
        }
        Ok(CoverageParams {
            voxel_size,
            depth_stride,
            max_range,
        })
    }
}

impl Default for CoverageParams {
    fn default() -> Self {
        CoverageParams {
            voxel_size: 0.100,
            depth_stride: 12,
            max_range: 10.0,
        }
    }
}

/// Dense depth image. Invalid pixels hold exactly 0.0; valid pixels hold a
/// finite positive camera-z depth.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthImage {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl DepthImage {
    /// All-invalid image.
    pub fn new(width: u32, height: u32) -> Self {
        DepthImage {
            width,
            height,
            data: vec![0.0; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Depth at a pixel, or `None` when the pixel is invalid.
    pub fn get(&self, x: u32, y: u32) -> Option<f64> {
        let d = self.data[self.index(x, y)];
        (d > 0.0).then_some(d)
    }

    /// Marks a pixel valid with the given positive finite depth.
    pub fn set(&mut self, x: u32, y: u32, depth: f64) {
        assert!(
            depth.is_finite() && depth > 0.0,
            "valid depth must be finite and positive"
        );
        let i = self.index(x, y);
        self.data[i] = depth;
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|d| **d > 0.0).count()
    }

    fn index(&self, x: u32, y: u32) -> usize {
        assert!(x < self.width && y < self.height, "pixel out of bounds");
        y as usize * self.width as usize + x as usize
    }
}

/// Integer voxel id per axis: `floor(coord / voxel_size)`.
pub type VoxelId = [i64; 3];

/// Sorted, deduplicated set of voxel ids observed from one viewpoint.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisibilitySet {
    voxels: Vec<VoxelId>,
}

impl VisibilitySet {
    pub fn empty() -> Self {
        VisibilitySet { voxels: Vec::new() }
    }

    pub fn from_voxels(mut voxels: Vec<VoxelId>) -> Self {
        voxels.sort_unstable();
        voxels.dedup();
        VisibilitySet { voxels }
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn contains(&self, v: &VoxelId) -> bool {
        self.voxels.binary_search(v).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = &VoxelId> {
        self.voxels.iter()
    }

    pub fn voxels(&self) -> &[VoxelId] {
        &self.voxels
    }

    pub fn is_subset_of(&self, other: &VisibilitySet) -> bool {
        self.voxels.iter().all(|v| other.contains(v))
    }
}

/// Union of a family of visibility sets.
pub fn union_of<'a>(sets: impl IntoIterator<Item = &'a VisibilitySet>) -> VisibilitySet {
    let mut all: Vec<VoxelId> = Vec::new();
    for s in sets {
        all.extend_from_slice(&s.voxels);
    }
    VisibilitySet::from_voxels(all)
}

/// Coverage objective: number of distinct voxels in the union.
pub fn coverage_value<'a>(sets: impl IntoIterator<Item = &'a VisibilitySet>) -> usize {
    union_of(sets).len()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vs(ids: &[[i64; 3]]) -> VisibilitySet {
        VisibilitySet::from_voxels(ids.to_vec())
    }

    #[test]
    fn coverage_of_empty_family_is_zero() {
        assert_eq!(coverage_value([]), 0);
    }

    #[test]
    fn coverage_adds_disjoint_sets() {
        let a = vs(&[[0, 0, 0], [1, 0, 0], [2, 0, 0]]);
        let b = vs(&[[5, 5, 5], [6, 5, 5], [7, 5, 5], [8, 5, 5]]);
        assert_eq!(coverage_value([&a, &b]), 7);
    }

    #[test]
    fn coverage_counts_overlap_once() {
        let a = vs(&[[0, 0, 0], [1, 0, 0], [2, 0, 0]]);
        let b = vs(&[[1, 0, 0], [2, 0, 0], [3, 0, 0]]);
        assert_eq!(coverage_value([&a, &b]), 4);
    }

    #[test]
    fn from_voxels_sorts_and_dedups() {
        let s = vs(&[[3, 0, 0], [1, 0, 0], [3, 0, 0]]);
        assert_eq!(s.voxels(), &[[1, 0, 0], [3, 0, 0]]);
    }

    #[test]
    fn depth_image_starts_invalid() {
        let d = DepthImage::new(4, 3);
        assert_eq!(d.valid_count(), 0);
        assert_eq!(d.get(0, 0), None);
    }

    #[test]
    fn intrinsics_reject_bad_values() {
        assert!(Intrinsics::new(0.0, 1.0, 0.0, 0.0, 4, 4).is_err());
        assert!(Intrinsics::new(1.0, 1.0, 0.0, 0.0, 0, 4).is_err());
        assert!(Intrinsics::new(1.0, 1.0, 0.0, 0.0, 4, 4).is_ok());
    }

    #[test]
    fn coverage_params_reject_bad_values() {
        assert!(CoverageParams::new(0.0, 12, 10.0).is_err());
        assert!(CoverageParams::new(0.1, 0, 10.0).is_err());
        assert!(CoverageParams::new(0.1, 12, 0.0).is_err());
        let p = CoverageParams::default();
        assert_eq!(p.voxel_size, 0.100);
        assert_eq!(p.depth_stride, 12);
    }
}
