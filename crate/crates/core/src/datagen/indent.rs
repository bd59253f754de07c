//! Analytic contact indentation for deformable objects: a Gaussian dent
//! along each contact normal, scaled by (1 - stiffness). Topology unchanged.

use crate::geom::{Point3, TriangleMesh, Vector3};
use crate::{Error, Result};

/// A contact site for indentation: position, inward displacement direction
/// (the negated surface normal), and the indentation depth.
#[derive(Debug, Clone, Copy)]
pub struct IndentSite {
    pub point: Point3,
    pub normal: Vector3,
    pub depth: f64,
}

/// Displaces vertices within the influence radius of each contact inward by
/// `depth * (1 - stiffness) * exp(-d^2 / (2 sigma^2))`. `stiffness` = 1
/// leaves the mesh untouched.
pub fn indent_mesh(
    mesh: &TriangleMesh,
    sites: &[IndentSite],
    stiffness: f64,
    influence_radius: f64,
) -> Result<TriangleMesh> {
    if !(stiffness > 0.0 && stiffness <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "stiffness must be in (0, 1], got {stiffness}"
        )));
    }
    if !(influence_radius > 0.0) {
        return Err(Error::InvalidArgument("influence radius must be positive".into()));
    }
    let mut out = mesh.clone();
    if (stiffness - 1.0).abs() < 1e-15 || sites.is_empty() {
        return Ok(out);
    }
    let sigma = influence_radius / 2.0;
    let softness = 1.0 - stiffness;
    for v in out.vertices_mut() {
        let mut displacement = Vector3::zeros();
        for site in sites {
            let d = (*v - site.point).norm();
            if d < influence_radius {
                let falloff = (-d * d / (2.0 * sigma * sigma)).exp();
                displacement -= site.normal * (site.depth * softness * falloff);
            }
        }
        *v += displacement;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::icosphere;
    use crate::wnf::{winding_number_batch, Bvh, WindingMode};

    fn site_at_pole(depth: f64) -> IndentSite {
        IndentSite {
            point: Point3::new(0.0, 0.0, 0.5),
            normal: Vector3::new(0.0, 0.0, 1.0),
            depth,
        }
    }

    #[test]
    fn stiffness_one_is_identity() {
        let mesh = icosphere(0.5, 2);
        let out = indent_mesh(&mesh, &[site_at_pole(0.05)], 1.0, 0.2).unwrap();
        assert_eq!(out, mesh);
    }

    #[test]
    fn max_displacement_at_contact_with_radial_decay() {
        let mesh = icosphere(0.5, 3);
        let site = site_at_pole(0.05);
        let out = indent_mesh(&mesh, &[site], 0.3, 0.25).unwrap();
        let mut moved: Vec<(f64, f64)> = mesh
            .vertices()
            .iter()
            .zip(out.vertices())
            .map(|(a, b)| ((a - site.point).norm(), (b - a).norm()))
            .collect();
        moved.sort_by(|x, y| x.0.total_cmp(&y.0));
        // Displacement magnitude decreases with distance from the contact.
        let near = moved.first().unwrap().1;
        let far = moved.last().unwrap().1;
        assert!(near > 0.0);
        assert_eq!(far, 0.0);
        for pair in moved.windows(2) {
            assert!(pair[1].1 <= pair[0].1 + 1e-12);
        }
        // The pole vertex moved inward by depth * (1 - stiffness).
        assert!((near - 0.05 * 0.7).abs() < 1e-9);
    }

    #[test]
    fn indented_sphere_loses_volume() {
        // Divergence-theorem volume via winding-number occupancy on a grid.
        let mesh = icosphere(0.5, 3);
        let dented = indent_mesh(&mesh, &[site_at_pole(0.08)], 0.2, 0.3).unwrap();
        let spec = crate::geom::GridSpec::cube(Point3::origin(), 0.6, 32).unwrap();
        let centers: Vec<Point3> = (0..spec.voxel_count())
            .map(|i| spec.center(spec.voxel_index(i)))
            .collect();
        let vol = |m: &TriangleMesh| -> f64 {
            let bvh = Bvh::build(m);
            let w = winding_number_batch(m, &bvh, &centers, WindingMode::Accelerated);
            w.iter().filter(|&&v| v >= 0.5).count() as f64 * spec.spacing.powi(3)
        };
        let v0 = vol(&mesh);
        let v1 = vol(&dented);
        assert!(v1 < v0, "dented volume {v1} vs original {v0}");
    }
}
