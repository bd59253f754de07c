//! Quantitative evaluation: volumetric IoU, Chamfer distance (x100
//! convention), Earth Mover's Distance, and the variant comparison harness.

mod assignment;
mod kdtree;

pub mod report;

pub use assignment::{auction, hungarian, AuctionSolution};
pub use kdtree::KdTree;
pub use report::{
    evaluate_variants, scene_reconstruction, score_reconstruction, variant_readings,
    AggregateMetrics, EvalConfig, EvalReport, SceneMetrics, Variant, VariantCheckpoints,
};

use crate::geom::{occupied_count, voxelize_occupancy, GridSpec, PointCloud, TriangleMesh};
use crate::{Error, Result};

/// Problem size up to which EMD uses the exact Hungarian solver; larger
/// problems use the auction approximation with a certified gap <= 1%.
pub const EMD_EXACT_LIMIT: usize = 512;

/// Relative duality-gap target for the approximate EMD path.
pub const EMD_GAP_TARGET: f64 = 0.01;

/// Volumetric IoU: occupancy over `grid_spec` for both meshes (winding >=
/// 0.5 rule), intersection over union of occupied voxels. Empty union gives
/// 0 by definition.
pub fn iou_volume(a: &TriangleMesh, b: &TriangleMesh, grid_spec: &GridSpec) -> f64 {
    let occ_a = voxelize_occupancy(grid_spec, a);
    let occ_b = voxelize_occupancy(grid_spec, b);
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&x, &y) in occ_a.data().iter().zip(occ_b.data()) {
        if x && y {
            inter += 1;
        }
        if x || y {
            union += 1;
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// A grid spec covering both meshes with `d` voxels along each axis and a
/// small margin, for IoU evaluation.
pub fn common_grid(a: &TriangleMesh, b: &TriangleMesh, d: usize) -> Result<GridSpec> {
    let ba = a
        .bounds()
        .ok_or_else(|| Error::InvalidMesh("iou input mesh has no vertices".into()))?;
    let bb = b
        .bounds()
        .ok_or_else(|| Error::InvalidMesh("iou input mesh has no vertices".into()))?;
    let min = crate::geom::Point3::new(
        ba.0.x.min(bb.0.x),
        ba.0.y.min(bb.0.y),
        ba.0.z.min(bb.0.z),
    );
    let max = crate::geom::Point3::new(
        ba.1.x.max(bb.1.x),
        ba.1.y.max(bb.1.y),
        ba.1.z.max(bb.1.z),
    );
    let extent = (max - min).amax().max(1e-6);
    let margin = extent * 0.05;
    let center = crate::geom::Point3::from((min.coords + max.coords) / 2.0);
    GridSpec::cube(center, extent / 2.0 + margin, d)
}

/// Chamfer distance: `0.5 * (mean_a nn_b + mean_b nn_a)`, unsquared L2,
/// reported x100. Exact nearest neighbors via a kd-tree.
pub fn chamfer(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument(
            "chamfer distance needs non-empty clouds".into(),
        ));
    }
    let tree_a = KdTree::build(a.points());
    let tree_b = KdTree::build(b.points());
    let sum_ab: f64 = a.points().iter().map(|p| tree_b.nearest_distance(p)).sum();
    let sum_ba: f64 = b.points().iter().map(|p| tree_a.nearest_distance(p)).sum();
    let mean = 0.5 * (sum_ab / a.len() as f64 + sum_ba / b.len() as f64);
    Ok(mean * 100.0)
}

/// Earth Mover's Distance: minimum mean pairwise distance over perfect
/// matchings of equal-size clouds. Exact Hungarian for n <= 512; auction
/// with certified relative gap <= 1% above that.
pub fn emd(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "emd needs equal sizes, got {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n == 0 {
        return Err(Error::InvalidArgument("emd of empty clouds".into()));
    }
    let mut cost = vec![0.0f64; n * n];
    for (i, p) in a.points().iter().enumerate() {
        for (j, q) in b.points().iter().enumerate() {
            cost[i * n + j] = (p - q).norm();
        }
    }
    let total = if n <= EMD_EXACT_LIMIT {
        let asn = hungarian(&cost, n)?;
        asn.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum::<f64>()
    } else {
        auction(&cost, n, EMD_GAP_TARGET)?.primal
    };
    Ok(total / n as f64)
}

/// Voxel-count-based occupancy volume, mostly for sanity checks.
pub fn occupancy_volume(mesh: &TriangleMesh, grid_spec: &GridSpec) -> f64 {
    let occ = voxelize_occupancy(grid_spec, mesh);
    occupied_count(&occ) as f64 * grid_spec.spacing.powi(3)
}
