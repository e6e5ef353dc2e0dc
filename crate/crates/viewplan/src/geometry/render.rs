//! Depth rendering and voxel visibility extraction.

use nalgebra::Vector3;

use super::{CoverageParams, DepthImage, Intrinsics, Scene, VisibilitySet, VoxelId};
use crate::pose::Pose;

/// Camera-frame ray direction through integer pixel `(px, py)`; the z
/// component is 1, so the ray parameter of a hit equals its camera-z depth.
fn pixel_dir_cam(intr: &Intrinsics, px: u32, py: u32) -> Vector3<f64> {
    Vector3::new(
        (px as f64 - intr.cx) / intr.fx,
        (py as f64 - intr.cy) / intr.fy,
        1.0,
    )
}

/// Backprojects a valid depth sample into a voxel id. The grid is anchored at
/// the world origin: `id_axis = floor(coord / voxel_size)`.
fn backproject_voxel(
    intr: &Intrinsics,
    pose: &Pose,
    px: u32,
    py: u32,
    z: f64,
    voxel_size: f64,
) -> VoxelId {
    let d = pixel_dir_cam(intr, px, py);
    let p_cam = Vector3::new(d.x * z, d.y * z, z);
    let p_world = pose.orientation() * p_cam + pose.position();
    [
        (p_world.x / voxel_size).floor() as i64,
        (p_world.y / voxel_size).floor() as i64,
        (p_world.z / voxel_size).floor() as i64,
    ]
}

/// Casts one pixel ray and returns the camera-z depth of the nearest surface
/// whose hit point lies within `max_range` of the camera center.
fn cast_pixel(
    scene: &Scene,
    intr: &Intrinsics,
    pose: &Pose,
    max_range: f64,
    px: u32,
    py: u32,
) -> Option<f64> {
    let dir_cam = pixel_dir_cam(intr, px, py);
    let dir_world = pose.orientation() * dir_cam;
    let hit = scene.nearest_hit(pose.position(), dir_world)?;
    // Euclidean distance to the hit point; dir_cam and dir_world share a norm.
    let dist = hit.t * dir_cam.norm();
    (dist <= max_range).then_some(hit.t)
}

/// Z-buffer depth render: nearest hit per pixel, camera-z depth, pixels with
/// no hit within `max_range` left invalid (0.0).
pub fn render_depth(scene: &Scene, intr: &Intrinsics, pose: &Pose, max_range: f64) -> DepthImage {
    let mut img = DepthImage::new(intr.width, intr.height);
    if scene.is_empty() {
        return img;
    }
    for py in 0..intr.height {
        for px in 0..intr.width {
            if let Some(z) = cast_pixel(scene, intr, pose, max_range, px, py) {
                img.set(px, py, z);
            }
        }
    }
    img
}

/// Voxels observed by a depth image: valid pixels on the stride grid
/// (starting at pixel (0, 0)) are backprojected and floored into grid ids.
pub fn visibility_set(
    depth: &DepthImage,
    intr: &Intrinsics,
    pose: &Pose,
    params: &CoverageParams,
) -> VisibilitySet {
    let mut voxels = Vec::new();
    let stride = params.depth_stride;
    let mut py = 0;
    while py < depth.height() {
        let mut px = 0;
        while px < depth.width() {
            if let Some(z) = depth.get(px, py) {
                voxels.push(backproject_voxel(intr, pose, px, py, z, params.voxel_size));
            }
            px += stride;
        }
        py += stride;
    }
    VisibilitySet::from_voxels(voxels)
}

/// Visibility straight from the scene, casting only the strided pixel rays.
///
/// Bit-identical to `visibility_set(&render_depth(..), ..)`: both paths
/// compute the same hit parameter and the same backprojection expression.
pub fn visibility_from_pose(
    scene: &Scene,
    intr: &Intrinsics,
    pose: &Pose,
    params: &CoverageParams,
) -> VisibilitySet {
    let mut voxels = Vec::new();
    if scene.is_empty() {
        return VisibilitySet::empty();
    }
    let stride = params.depth_stride;
    let mut py = 0;
    while py < intr.height {
        let mut px = 0;
        while px < intr.width {
            if let Some(z) = cast_pixel(scene, intr, pose, params.max_range, px, py) {
                voxels.push(backproject_voxel(intr, pose, px, py, z, params.voxel_size));
            }
            px += stride;
        }
        py += stride;
    }
    VisibilitySet::from_voxels(voxels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{scene_from_boxes, BoxSpec, Triangle};

    fn wall_scene(z: f64) -> Scene {
        Scene::new(
            "wall",
            vec![
                Triangle::new([-5.0, -5.0, z], [5.0, -5.0, z], [5.0, 5.0, z]),
                Triangle::new([-5.0, -5.0, z], [5.0, 5.0, z], [-5.0, 5.0, z]),
            ],
        )
    }

    fn identity_pose() -> Pose {
        Pose::new([0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]).unwrap()
    }

    fn small_intr() -> Intrinsics {
        Intrinsics::new(10.0, 10.0, 4.0, 3.0, 9, 7).unwrap()
    }

    #[test]
    fn frontal_wall_renders_exact_depth_everywhere() {
        let scene = wall_scene(2.0);
        let img = render_depth(&scene, &small_intr(), &identity_pose(), 100.0);
        for py in 0..img.height() {
            for px in 0..img.width() {
                assert_eq!(img.get(px, py), Some(2.0), "pixel ({px},{py})");
            }
        }
    }

    #[test]
    fn nearer_wall_occludes_farther_wall() {
        let mut tris = wall_scene(2.0).triangles().to_vec();
        tris.extend_from_slice(wall_scene(1.0).triangles());
        let scene = Scene::new("two-walls", tris);
        let img = render_depth(&scene, &small_intr(), &identity_pose(), 100.0);
        for py in 0..img.height() {
            for px in 0..img.width() {
                assert_eq!(img.get(px, py), Some(1.0));
            }
        }
    }

    #[test]
    fn empty_scene_renders_all_invalid() {
        let scene = Scene::new("empty", Vec::new());
        let img = render_depth(&scene, &small_intr(), &identity_pose(), 100.0);
        assert_eq!(img.valid_count(), 0);
    }

    #[test]
    fn max_range_invalidates_far_pixels() {
        let scene = wall_scene(2.0);
        let img = render_depth(&scene, &small_intr(), &identity_pose(), 1.5);
        assert_eq!(img.valid_count(), 0);
    }

    #[test]
    fn all_invalid_depth_gives_empty_visibility() {
        let img = DepthImage::new(9, 7);
        let vs = visibility_set(
            &img,
            &small_intr(),
            &identity_pose(),
            &CoverageParams::default(),
        );
        assert!(vs.is_empty());
    }

    #[test]
    fn principal_point_pixel_backprojects_to_axis_voxel() {
        // Principal point at integer pixel (4, 3): the camera-frame point is
        // exactly (0, 0, d).
        let intr = small_intr();
        let mut img = DepthImage::new(9, 7);
        let d = 2.0;
        img.set(4, 3, d);
        let params = CoverageParams::new(0.5, 1, 10.0).unwrap();
        let vs = visibility_set(&img, &intr, &identity_pose(), &params);
        let expected = [
            (0.0f64 / 0.5).floor() as i64,
            (0.0f64 / 0.5).floor() as i64,
            (d / 0.5).floor() as i64,
        ];
        assert_eq!(vs.voxels(), &[expected]);
    }

    #[test]
    fn strided_wall_matches_hand_backprojection() {
        // 3x3 sample grid over a 9x7 image with stride 4 -> pixels
        // {0,4,8} x {0,4} ... rows 0 and 4; row 8 is out of bounds.
        let intr = small_intr();
        let pose = identity_pose();
        let scene = wall_scene(2.0);
        let img = render_depth(&scene, &intr, &pose, 100.0);
        let params = CoverageParams::new(0.5, 4, 100.0).unwrap();
        let vs = visibility_set(&img, &intr, &pose, &params);
        let mut expected = Vec::new();
        for py in [0u32, 4] {
            for px in [0u32, 4, 8] {
                let x = (px as f64 - intr.cx) / intr.fx * 2.0;
                let y = (py as f64 - intr.cy) / intr.fy * 2.0;
                expected.push([
                    (x / 0.5).floor() as i64,
                    (y / 0.5).floor() as i64,
                    (2.0f64 / 0.5).floor() as i64,
                ]);
            }
        }
        let expected = VisibilitySet::from_voxels(expected);
        assert_eq!(vs, expected);
    }

    #[test]
    fn direct_visibility_equals_render_then_extract() {
        let spec = [
            BoxSpec {
                center: [0.5, 0.2, 2.5],
                size: [1.0, 1.2, 0.8],
                yaw_deg: 20.0,
            },
            BoxSpec {
                center: [-0.8, -0.4, 3.5],
                size: [0.9, 0.5, 1.4],
                yaw_deg: -35.0,
            },
        ];
        let scene = scene_from_boxes("two-boxes", &spec);
        let intr = Intrinsics::new(40.0, 40.0, 16.0, 12.0, 33, 25).unwrap();
        let pose = Pose::new([0.1, -0.2, 0.0], [0.99, 0.01, 0.05, 0.1]).unwrap();
        let params = CoverageParams::new(0.1, 3, 6.0).unwrap();
        let direct = visibility_from_pose(&scene, &intr, &pose, &params);
        let rendered = visibility_set(&render_depth(&scene, &intr, &pose, params.max_range), &intr, &pose, &params);
        assert_eq!(direct, rendered);
        assert!(!direct.is_empty());
    }
}
