//! Exact and BVH-accelerated generalized winding numbers.

use super::Bvh;
use crate::geom::{GridSpec, Point3, TriangleMesh, Vector3, VoxelGrid};
use crate::{Error, Result};

/// Queries closer than this to the surface are flagged unreliable.
pub const NEAR_SURFACE_EPS: f64 = 1e-12;

/// Signed solid angle of triangle `(a, b, c)` as seen from the origin, by the
/// van Oosterom–Strackee formula (atan2 form, robust near the triangle
/// plane). Positive when the vertices wind counter-clockwise seen from the
/// query side that the normal points away from.
pub fn triangle_solid_angle(a: Vector3, b: Vector3, c: Vector3) -> f64 {
    let la = a.norm();
    let lb = b.norm();
    let lc = c.norm();
    let numerator = a.dot(&b.cross(&c));
    let denominator = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
    2.0 * numerator.atan2(denominator)
}

/// Exact winding number: sum of per-face solid angles over 4π.
pub fn winding_number_exact(mesh: &TriangleMesh, q: &Point3) -> f64 {
    let mut total = 0.0;
    for i in 0..mesh.face_count() {
        let [a, b, c] = mesh.triangle(i);
        total += triangle_solid_angle(a - q, b - q, c - q);
    }
    total / (4.0 * std::f64::consts::PI)
}

/// A winding-number value plus a reliability flag for queries that sit on
/// (or numerically on) the surface, where the solid-angle sum is undefined.
#[derive(Debug, Clone, Copy)]
pub struct WindingEval {
    pub value: f64,
    pub near_surface: bool,
}

/// Exact winding number of `q`, flagged when `q` lies within
/// [`NEAR_SURFACE_EPS`] of the surface.
pub fn winding_number(mesh: &TriangleMesh, q: &Point3) -> WindingEval {
    let value = winding_number_exact(mesh, q);
    let mut near = false;
    for i in 0..mesh.face_count() {
        let [a, b, c] = mesh.triangle(i);
        let cp = crate::geom::closest_point_on_triangle(q, a, b, c);
        if (cp - q).norm() <= NEAR_SURFACE_EPS {
            near = true;
            break;
        }
    }
    WindingEval {
        value,
        near_surface: near,
    }
}

/// Evaluation strategy for batched winding numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindingMode {
    /// Per-point exact solid-angle sums.
    Exact,
    /// BVH far-field dipole approximation, max error <= 1e-3 vs exact.
    Accelerated,
}

/// Winding numbers for a batch of queries. Per-point results are independent,
/// so the parallel evaluation is bit-identical to the sequential order.
pub fn winding_number_batch(
    mesh: &TriangleMesh,
    bvh: &Bvh,
    queries: &[Point3],
    mode: WindingMode,
) -> Vec<f64> {
    crate::parallel::map_indexed(queries.len(), |i| match mode {
        WindingMode::Exact => winding_number_exact(mesh, &queries[i]),
        WindingMode::Accelerated => bvh.fast_winding_number(mesh, &queries[i]),
    })
}

/// Like [`winding_number_batch`] but validates the BVH/mesh pairing.
pub fn winding_number_batch_checked(
    mesh: &TriangleMesh,
    bvh: &Bvh,
    queries: &[Point3],
    mode: WindingMode,
) -> Result<Vec<f64>> {
    if bvh.face_count() != mesh.face_count() {
        return Err(Error::DimensionMismatch(format!(
            "bvh built over {} faces but mesh has {}",
            bvh.face_count(),
            mesh.face_count()
        )));
    }
    Ok(winding_number_batch(mesh, bvh, queries, mode))
}

/// Evaluates the winding number at every voxel center of `grid_spec`.
pub fn evaluate_wnf_grid(mesh: &TriangleMesh, grid_spec: &GridSpec, mode: WindingMode) -> VoxelGrid<f64> {
    let bvh = Bvh::build(mesh);
    evaluate_wnf_grid_with(mesh, &bvh, grid_spec, mode)
}

/// [`evaluate_wnf_grid`] with a caller-provided BVH.
pub fn evaluate_wnf_grid_with(
    mesh: &TriangleMesh,
    bvh: &Bvh,
    grid_spec: &GridSpec,
    mode: WindingMode,
) -> VoxelGrid<f64> {
    let centers: Vec<Point3> = (0..grid_spec.voxel_count())
        .map(|i| grid_spec.center(grid_spec.voxel_index(i)))
        .collect();
    let values = winding_number_batch(mesh, bvh, &centers, mode);
    VoxelGrid::new(*grid_spec, values).expect("values sized to the grid")
}
