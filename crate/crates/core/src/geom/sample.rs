//! Area-weighted surface sampling.

use super::{Point3, PointCloud, TriangleMesh};
use crate::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

/// Draws `n` points area-weighted across faces, uniform within each face.
/// Deterministic per seed.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<PointCloud> {
    if mesh.is_empty() {
        return Err(Error::InvalidMesh("cannot sample an empty mesh".into()));
    }
    let mut cumulative = Vec::with_capacity(mesh.face_count());
    let mut total = 0.0;
    for i in 0..mesh.face_count() {
        total += mesh.face_area(i);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::InvalidMesh("mesh has zero total area".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let r = rng.random_range(0.0..total);
        let face = match cumulative.binary_search_by(|probe| probe.partial_cmp(&r).unwrap()) {
            Ok(i) => i,
            Err(i) => i,
        }
        .min(mesh.face_count() - 1);
        let [a, b, c] = mesh.triangle(face);
        // Uniform barycentric via the square-root trick.
        let su = rng.random_range(0.0..1.0f64).sqrt();
        let w = rng.random_range(0.0..1.0f64);
        let b0 = 1.0 - su;
        let b1 = su * (1.0 - w);
        let b2 = su * w;
        points.push(Point3::from(a.coords * b0 + b.coords * b1 + c.coords * b2));
    }
    PointCloud::new(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::closest_point_on_triangle;

    fn triangle_mesh(a: Point3, b: Point3, c: Point3) -> TriangleMesh {
        TriangleMesh::new(vec![a, b, c], vec![[0, 1, 2]]).unwrap()
    }

    #[test]
    fn zero_samples_from_any_mesh() {
        let m = triangle_mesh(
            Point3::origin(),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        );
        assert!(sample_surface(&m, 0, 1).unwrap().is_empty());
    }

    #[test]
    fn empty_mesh_is_an_error() {
        let m = TriangleMesh::new(vec![], vec![]).unwrap();
        assert!(sample_surface(&m, 5, 1).is_err());
    }

    #[test]
    fn samples_lie_on_the_triangle() {
        let a = Point3::new(0.2, -0.3, 0.5);
        let b = Point3::new(1.0, 0.1, -0.2);
        let c = Point3::new(-0.4, 0.9, 0.3);
        let m = triangle_mesh(a, b, c);
        let cloud = sample_surface(&m, 500, 42).unwrap();
        for p in cloud.points() {
            let q = closest_point_on_triangle(p, a, b, c);
            assert!((p - q).norm() < 1e-9);
        }
    }

    #[test]
    fn centroid_converges_on_single_triangle() {
        // Monte Carlo oracle: the mean of uniform samples approaches the
        // centroid; 10k samples keep the error comfortably under 0.02.
        let a = Point3::origin();
        let b = Point3::new(1.0, 0.0, 0.0);
        let c = Point3::new(0.0, 1.0, 0.0);
        let m = triangle_mesh(a, b, c);
        let cloud = sample_surface(&m, 10_000, 3).unwrap();
        let mean = cloud.centroid().unwrap();
        let centroid = Point3::new(1.0 / 3.0, 1.0 / 3.0, 0.0);
        assert!((mean - centroid).norm() < 0.02);
    }

    #[test]
    fn area_ratio_respected() {
        // Two triangles with 9:1 area ratio; the sample-count split must be
        // within 5% of 9:1 (binomial bound at n = 10000).
        let verts = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(9.0, 0.0, 0.0),
            Point3::new(0.0, 2.0, 0.0),
            Point3::new(10.0, 0.0, 0.0),
            Point3::new(11.0, 0.0, 0.0),
            Point3::new(10.0, 2.0, 0.0),
        ];
        let m = TriangleMesh::new(verts, vec![[0, 1, 2], [3, 4, 5]]).unwrap();
        let cloud = sample_surface(&m, 10_000, 9).unwrap();
        let big = cloud.points().iter().filter(|p| p.x < 9.5).count();
        let frac = big as f64 / 10_000.0;
        assert!((frac - 0.9).abs() < 0.05 * 0.9, "frac = {frac}");
    }

    #[test]
    fn deterministic_per_seed() {
        let m = triangle_mesh(
            Point3::origin(),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        );
        let a = sample_surface(&m, 100, 7).unwrap();
        let b = sample_surface(&m, 100, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_surface(&m, 100, 8).unwrap();
        assert_ne!(a, c);
    }
}
