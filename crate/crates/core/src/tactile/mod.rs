//! Fingertip tactile sensor model: synthesize contact images from geometry,
//! recover per-pixel depth through the linear gel mapping, and lift contact
//! pixels into world-frame point clouds.
//!
//! The sensor frame has the internal camera at the origin looking along +z;
//! the gel rest plane sits at `z = gel_rest_depth`. Contact compresses the
//! gel by up to `max_indentation`, and the stored image is normalized
//! indentation in [0, 1].

use crate::geom::{
    DepthImage, PinholeCamera, PointCloud, RigidTransform, TriangleMesh,
};
use crate::wnf::Bvh;
use crate::{Error, Result};

/// Normalized intensity below which a pixel does not count as contact.
pub const CONTACT_THRESHOLD: f64 = 1e-3;

/// Geometry and projection model of one gel sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TactileSensorSpec {
    pub width: usize,
    pub height: usize,
    /// Physical gel plane size (meters) at the rest depth.
    pub gel_size: [f64; 2],
    /// Distance from the internal camera to the undeformed gel plane.
    pub gel_rest_depth: f64,
    /// Maximum gel compression; deeper geometry clamps to this.
    pub max_indentation: f64,
    /// Intensity threshold separating contact from no-contact pixels.
    pub contact_threshold: f64,
}

impl TactileSensorSpec {
    pub fn new(
        width: usize,
        height: usize,
        gel_size: [f64; 2],
        gel_rest_depth: f64,
        max_indentation: f64,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("sensor resolution must be nonzero".into()));
        }
        if !(gel_size[0] > 0.0 && gel_size[1] > 0.0) {
            return Err(Error::InvalidArgument("gel size must be positive".into()));
        }
        if !(gel_rest_depth > 0.0) || !(max_indentation > 0.0) {
            return Err(Error::InvalidArgument(
                "gel rest depth and max indentation must be positive".into(),
            ));
        }
        if max_indentation >= gel_rest_depth {
            return Err(Error::InvalidArgument(format!(
                "max indentation {max_indentation} must be smaller than gel rest depth {gel_rest_depth}"
            )));
        }
        Ok(Self {
            width,
            height,
            gel_size,
            gel_rest_depth,
            max_indentation,
            contact_threshold: CONTACT_THRESHOLD,
        })
    }

    /// Internal-camera intrinsics: the pixel grid spans the gel plane exactly
    /// at the rest depth. `pose` is sensor-to-world.
    pub fn intrinsics(&self, pose: RigidTransform) -> PinholeCamera {
        let fx = self.gel_rest_depth * (self.width as f64 - 1.0) / self.gel_size[0];
        let fy = self.gel_rest_depth * (self.height as f64 - 1.0) / self.gel_size[1];
        PinholeCamera::new(
            fx,
            fy,
            (self.width as f64 - 1.0) / 2.0,
            (self.height as f64 - 1.0) / 2.0,
            self.width,
            self.height,
            pose,
        )
        .expect("sensor spec validated")
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// One tactile observation: a normalized-indentation image plus the
/// sensor-to-world pose it was captured at.
#[derive(Debug, Clone, PartialEq)]
pub struct TactileReading {
    pub image: Vec<f64>,
    pub pose: RigidTransform,
    pub spec: TactileSensorSpec,
}

impl TactileReading {
    pub fn new(image: Vec<f64>, pose: RigidTransform, spec: TactileSensorSpec) -> Result<Self> {
        if image.len() != spec.pixel_count() {
            return Err(Error::DimensionMismatch(format!(
                "tactile image length {} != {}x{}",
                image.len(),
                spec.width,
                spec.height
            )));
        }
        if image.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::InvalidArgument(
                "tactile intensities must lie in [0, 1]".into(),
            ));
        }
        Ok(Self { image, pose, spec })
    }

    pub fn max_intensity(&self) -> f64 {
        self.image.iter().copied().fold(0.0, f64::max)
    }

    /// Number of pixels above the contact threshold.
    pub fn contact_pixel_count(&self) -> usize {
        self.image
            .iter()
            .filter(|&&v| v > self.spec.contact_threshold)
            .count()
    }
}

/// World-frame contact points recovered from one reading.
#[derive(Debug, Clone)]
pub struct ContactPatch {
    pub points: PointCloud,
    pub sensor_index: usize,
}

/// Renders a tactile image: rays from the internal camera through the gel,
/// per-pixel indentation `max(0, gel_rest_depth - hit_depth)` clamped to
/// `max_indentation`, normalized to [0, 1]. No contact gives 0.
pub fn render_tactile(
    mesh: &TriangleMesh,
    pose: &RigidTransform,
    spec: &TactileSensorSpec,
) -> TactileReading {
    if mesh.is_empty() {
        return TactileReading {
            image: vec![0.0; spec.pixel_count()],
            pose: *pose,
            spec: spec.clone(),
        };
    }
    let bvh = Bvh::build(mesh);
    render_tactile_with(mesh, &bvh, pose, spec)
}

/// [`render_tactile`] against a prebuilt BVH.
pub fn render_tactile_with(
    mesh: &TriangleMesh,
    bvh: &Bvh,
    pose: &RigidTransform,
    spec: &TactileSensorSpec,
) -> TactileReading {
    let cam = spec.intrinsics(*pose);
    let image: Vec<f64> = crate::parallel::map_indexed(spec.pixel_count(), |i| {
        let u = i % spec.width;
        let v = i / spec.width;
        let ray = cam.pixel_ray(u, v);
        match bvh.raycast(mesh, &ray) {
            Some(hit) => {
                let indent = (spec.gel_rest_depth - hit.t).clamp(0.0, spec.max_indentation);
                indent / spec.max_indentation
            }
            None => 0.0,
        }
    });
    TactileReading {
        image,
        pose: *pose,
        spec: spec.clone(),
    }
}

/// Per-pixel depth through the linear gel model:
/// `depth = gel_rest_depth - intensity * max_indentation` for contact pixels,
/// invalid elsewhere.
pub fn tactile_depth(reading: &TactileReading) -> DepthImage {
    let spec = &reading.spec;
    let values: Vec<f64> = reading
        .image
        .iter()
        .map(|&v| {
            if v > spec.contact_threshold {
                spec.gel_rest_depth - v * spec.max_indentation
            } else {
                f64::NAN
            }
        })
        .collect();
    DepthImage::new(spec.width, spec.height, values).expect("depths positive by construction")
}

/// Back-projects contact pixels through the sensor intrinsics and lifts them
/// to the world frame by the reading's pose.
pub fn contact_patch(reading: &TactileReading, sensor_index: usize) -> ContactPatch {
    let depth = tactile_depth(reading);
    let cam = reading.spec.intrinsics(reading.pose);
    let points = crate::geom::backproject_depth(&cam, &depth)
        .expect("tactile depth dimensions match intrinsics");
    ContactPatch {
        points,
        sensor_index,
    }
}

/// Least-absolute-deviation fit of `depth = a * intensity + b` over contact
/// pixels of the given (image, depth) pairs, via iteratively reweighted least
/// squares. Exactly linear data reduces to the closed-form line.
pub fn train_depth_net(pairs: &[(Vec<f64>, DepthImage)]) -> Result<(f64, f64)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (image, depth) in pairs {
        if image.len() != depth.values().len() {
            return Err(Error::DimensionMismatch(
                "image and depth sizes differ in calibration pair".into(),
            ));
        }
        for (&x, &y) in image.iter().zip(depth.values()) {
            if x > CONTACT_THRESHOLD && y.is_finite() {
                xs.push(x);
                ys.push(y);
            }
        }
    }
    if xs.len() < 2 {
        return Err(Error::RankDeficient(
            "need at least two contact pixels to fit the gel map".into(),
        ));
    }
    let spread = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - xs.iter().cloned().fold(f64::INFINITY, f64::min);
    if spread < 1e-12 {
        return Err(Error::RankDeficient(
            "constant intensity data cannot determine the gel slope".into(),
        ));
    }

    // IRLS for the L1 objective, seeded with the least-squares line.
    let (mut a, mut b) = weighted_line(&xs, &ys, None);
    for _ in 0..60 {
        let weights: Vec<f64> = xs
            .iter()
            .zip(&ys)
            .map(|(&x, &y)| 1.0 / (y - (a * x + b)).abs().max(1e-9))
            .collect();
        let (na, nb) = weighted_line(&xs, &ys, Some(&weights));
        let delta = (na - a).abs() + (nb - b).abs();
        a = na;
        b = nb;
        if delta < 1e-13 {
            break;
        }
    }
    Ok((a, b))
}

fn weighted_line(xs: &[f64], ys: &[f64], weights: Option<&[f64]>) -> (f64, f64) {
    let mut sw = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..xs.len() {
        let w = weights.map_or(1.0, |ws| ws[i]);
        sw += w;
        sx += w * xs[i];
        sy += w * ys[i];
        sxx += w * xs[i] * xs[i];
        sxy += w * xs[i] * ys[i];
    }
    let denom = sw * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return (0.0, sy / sw.max(1e-300));
    }
    let a = (sw * sxy - sx * sy) / denom;
    let b = (sy - a * sx) / sw;
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Point3, Vector3};

    fn desk_spec() -> TactileSensorSpec {
        TactileSensorSpec::new(60, 40, [0.12, 0.08], 0.08, 0.03).unwrap()
    }

    fn wall_at_z(z: f64) -> TriangleMesh {
        TriangleMesh::new(
            vec![
                Point3::new(-1.0, -1.0, z),
                Point3::new(1.0, -1.0, z),
                Point3::new(1.0, 1.0, z),
                Point3::new(-1.0, 1.0, z),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn far_surface_gives_all_zero() {
        let spec = desk_spec();
        let mesh = wall_at_z(5.0);
        let reading = render_tactile(&mesh, &RigidTransform::identity(), &spec);
        assert!(reading.image.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_indentation_wall_gives_all_ones() {
        let spec = desk_spec();
        let mesh = wall_at_z(spec.gel_rest_depth - spec.max_indentation);
        let reading = render_tactile(&mesh, &RigidTransform::identity(), &spec);
        assert!(reading.image.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn zero_intensity_has_invalid_depth() {
        let spec = desk_spec();
        let reading =
            TactileReading::new(vec![0.0; spec.pixel_count()], RigidTransform::identity(), spec)
                .unwrap();
        let depth = tactile_depth(&reading);
        assert_eq!(depth.valid_count(), 0);
        assert!(contact_patch(&reading, 0).points.is_empty());
    }

    #[test]
    fn unit_intensity_maps_to_min_depth() {
        let spec = desk_spec();
        let mut image = vec![0.0; spec.pixel_count()];
        image[5] = 1.0;
        let reading = TactileReading::new(image, RigidTransform::identity(), spec.clone()).unwrap();
        let depth = tactile_depth(&reading);
        let want = spec.gel_rest_depth - spec.max_indentation;
        assert!((depth.values()[5] - want).abs() < 1e-15);
    }

    #[test]
    fn flat_wall_patch_is_coplanar() {
        let spec = desk_spec();
        let wall_z = spec.gel_rest_depth - 0.4 * spec.max_indentation;
        let mesh = wall_at_z(wall_z);
        let pose = RigidTransform::from_axis_angle(
            Vector3::new(0.2, -0.1, 0.4),
            Vector3::new(0.3, 0.7, -0.2),
        );
        // Pose moves both sensor and wall, keeping relative geometry.
        let moved = mesh.transformed(&pose);
        let reading = render_tactile_with(&moved, &Bvh::build(&moved), &pose, &spec);
        assert!(reading.contact_pixel_count() > 0);
        let patch = contact_patch(&reading, 0);
        // All patch points satisfy the transformed plane equation.
        let n = pose.apply_vector(&Vector3::new(0.0, 0.0, 1.0));
        let p0 = pose.apply_point(&Point3::new(0.0, 0.0, wall_z));
        for p in patch.points.points() {
            assert!(n.dot(&(p - p0)).abs() < 1e-9);
        }
    }

    #[test]
    fn linear_round_trip_recovers_exact_calibration() {
        let spec = desk_spec();
        // Sweep wall depths, collect (image, true depth) pairs.
        let mut pairs = Vec::new();
        for k in 1..6 {
            let z = spec.gel_rest_depth - spec.max_indentation * k as f64 / 6.0;
            let mesh = wall_at_z(z);
            let reading = render_tactile(&mesh, &RigidTransform::identity(), &spec);
            let depth = tactile_depth(&reading);
            pairs.push((reading.image, depth));
        }
        let (a, b) = train_depth_net(&pairs).unwrap();
        assert!((a + spec.max_indentation).abs() < 1e-9, "a = {a}");
        assert!((b - spec.gel_rest_depth).abs() < 1e-9, "b = {b}");
    }

    #[test]
    fn constant_intensity_is_rank_deficient() {
        let spec = desk_spec();
        let mesh = wall_at_z(spec.gel_rest_depth - 0.5 * spec.max_indentation);
        let reading = render_tactile(&mesh, &RigidTransform::identity(), &spec);
        let depth = tactile_depth(&reading);
        let pairs = vec![(reading.image, depth)];
        assert!(matches!(
            train_depth_net(&pairs),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn no_contact_data_is_an_error() {
        let spec = desk_spec();
        let reading = TactileReading::new(
            vec![0.0; spec.pixel_count()],
            RigidTransform::identity(),
            spec.clone(),
        )
        .unwrap();
        let depth = tactile_depth(&reading);
        assert!(train_depth_net(&[(reading.image, depth)]).is_err());
    }
}
