//! Pinhole cameras, depth images, rendering and back-projection.
//!
//! Depth is the camera-frame z coordinate (not ray length). Invalid pixels
//! are a non-finite sentinel in memory and 0.0 on disk (see [`super::io`]).

use super::{Point3, PointCloud, Ray, RigidTransform, TriangleMesh, Vector3};
use crate::wnf::Bvh;
use crate::{Error, Result};

/// Pinhole projection model with a camera-to-world pose.
#[derive(Debug, Clone, PartialEq)]
pub struct PinholeCamera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub pose: RigidTransform,
}

impl PinholeCamera {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        pose: RigidTransform,
    ) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "focal lengths must be positive, got ({fx}, {fy})"
            )));
        }
        if !(0.0..width as f64).contains(&cx) || !(0.0..height as f64).contains(&cy) {
            return Err(Error::InvalidArgument(format!(
                "principal point ({cx}, {cy}) outside {width}x{height} image"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            pose,
        })
    }

    /// Centered principal point and a vertical field of view in radians.
    pub fn with_fov(width: usize, height: usize, fov_y: f64, pose: RigidTransform) -> Result<Self> {
        let fy = height as f64 / (2.0 * (fov_y / 2.0).tan());
        let fx = fy;
        Self::new(
            fx,
            fy,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
            width,
            height,
            pose,
        )
    }

    /// World-frame ray through pixel `(u, v)`; the parameter along the ray
    /// equals camera-frame depth z.
    pub fn pixel_ray(&self, u: usize, v: usize) -> Ray {
        let dir_cam = Vector3::new(
            (u as f64 - self.cx) / self.fx,
            (v as f64 - self.cy) / self.fy,
            1.0,
        );
        Ray {
            origin: Point3::from(self.pose.translation()),
            dir: self.pose.apply_vector(&dir_cam),
        }
    }

    /// Camera-frame point for pixel `(u, v)` at depth `z`.
    pub fn unproject(&self, u: f64, v: f64, z: f64) -> Point3 {
        Point3::new((u - self.cx) * z / self.fx, (v - self.cy) * z / self.fy, z)
    }
}

/// Per-pixel depth in meters; invalid pixels hold a non-finite sentinel.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    values: Vec<f64>,
}

impl DepthImage {
    /// Validates dimensions and that every finite value is positive.
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "depth buffer length {} != {width}x{height}",
                values.len()
            )));
        }
        if values.iter().any(|&d| d.is_finite() && d <= 0.0) {
            return Err(Error::InvalidArgument(
                "valid depths must be positive".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn invalid(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![f64::NAN; width * height],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, d: f64) {
        self.values[v * self.width + u] = d;
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|d| d.is_finite()).count()
    }

    pub fn min_valid(&self) -> Option<f64> {
        self.values
            .iter()
            .copied()
            .filter(|d| d.is_finite())
            .fold(None, |acc, d| Some(acc.map_or(d, |m: f64| m.min(d))))
    }
}

/// Back-projects valid pixels into a world-frame point cloud.
///
/// Pixel `(u, v)` at depth `z` maps to camera-frame
/// `((u - cx) z / fx, (v - cy) z / fy, z)`, then through `cam.pose`.
pub fn backproject_depth(cam: &PinholeCamera, depth: &DepthImage) -> Result<PointCloud> {
    if depth.width != cam.width || depth.height != cam.height {
        return Err(Error::DimensionMismatch(format!(
            "depth image {}x{} vs camera {}x{}",
            depth.width, depth.height, cam.width, cam.height
        )));
    }
    let mut points = Vec::new();
    for v in 0..depth.height {
        for u in 0..depth.width {
            let z = depth.get(u, v);
            if !z.is_finite() {
                continue;
            }
            let p_cam = cam.unproject(u as f64, v as f64, z);
            points.push(cam.pose.apply_point(&p_cam));
        }
    }
    PointCloud::new(points)
}

/// Renders a z-depth image by casting one ray per pixel. Builds a BVH over
/// the mesh internally; use [`render_depth_with`] to share one.
pub fn render_depth(cam: &PinholeCamera, mesh: &TriangleMesh) -> Result<DepthImage> {
    if mesh.is_empty() {
        return Err(Error::InvalidMesh("render_depth needs a non-empty mesh".into()));
    }
    let bvh = Bvh::build(mesh);
    Ok(render_depth_with(cam, mesh, &bvh))
}

/// Renders a z-depth image against a prebuilt BVH.
///
/// Pixels are independent, so the parallel result is bit-identical to the
/// sequential one.
pub fn render_depth_with(cam: &PinholeCamera, mesh: &TriangleMesh, bvh: &Bvh) -> DepthImage {
    let width = cam.width;
    let height = cam.height;
    let values: Vec<f64> = crate::parallel::map_indexed(width * height, |i| {
        let u = i % width;
        let v = i / width;
        let ray = cam.pixel_ray(u, v);
        match bvh.raycast(mesh, &ray) {
            Some(hit) => hit.t,
            None => f64::NAN,
        }
    });
    DepthImage {
        width,
        height,
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn square_at_z(z: f64, half: f64) -> TriangleMesh {
        TriangleMesh::new(
            vec![
                Point3::new(-half, -half, z),
                Point3::new(half, -half, z),
                Point3::new(half, half, z),
                Point3::new(-half, half, z),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    fn test_camera() -> PinholeCamera {
        PinholeCamera::new(
            40.0,
            40.0,
            15.5,
            15.5,
            32,
            32,
            RigidTransform::identity(),
        )
        .unwrap()
    }

    #[test]
    fn principal_point_unprojects_on_axis() {
        let cam = PinholeCamera::new(50.0, 50.0, 8.0, 8.0, 17, 17, RigidTransform::identity())
            .unwrap();
        let p = cam.unproject(8.0, 8.0, 2.5);
        assert_relative_eq!(p.coords, Vector3::new(0.0, 0.0, 2.5), epsilon = 1e-15);
    }

    #[test]
    fn all_invalid_backprojects_to_empty() {
        let cam = test_camera();
        let depth = DepthImage::invalid(32, 32);
        let cloud = backproject_depth(&cam, &depth).unwrap();
        assert!(cloud.is_empty());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let cam = test_camera();
        let depth = DepthImage::invalid(16, 16);
        assert!(backproject_depth(&cam, &depth).is_err());
    }

    #[test]
    fn camera_looking_away_sees_nothing() {
        let mesh = square_at_z(2.0, 1.0);
        let pose = RigidTransform::look_at(
            Point3::origin(),
            Point3::new(0.0, 0.0, -1.0),
            Vector3::new(0.0, 1.0, 0.0),
        )
        .unwrap();
        let cam = PinholeCamera::new(40.0, 40.0, 15.5, 15.5, 32, 32, pose).unwrap();
        let depth = render_depth(&cam, &mesh).unwrap();
        assert_eq!(depth.valid_count(), 0);
    }

    #[test]
    fn axis_aligned_square_center_depth() {
        // Camera at origin looking +z, square facing it at z = 2. A pixel at
        // the principal point must report exactly 2.0.
        let mesh = square_at_z(2.0, 1.0);
        let cam = PinholeCamera::new(
            40.0,
            40.0,
            16.0,
            16.0,
            33,
            33,
            RigidTransform::identity(),
        )
        .unwrap();
        let depth = render_depth(&cam, &mesh).unwrap();
        assert!((depth.get(16, 16) - 2.0).abs() < 1e-9);
    }
}
