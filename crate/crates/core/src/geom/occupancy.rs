//! Volumetric occupancy from the winding-number inside test.

use super::{GridSpec, TriangleMesh, VoxelGrid};
use crate::wnf::{winding_number_batch, Bvh, WindingMode};

/// Marks a voxel occupied iff its center has winding number >= 0.5.
///
/// Meaningful for (mostly) closed meshes; an empty mesh yields all-false.
pub fn voxelize_occupancy(grid_spec: &GridSpec, mesh: &TriangleMesh) -> VoxelGrid<bool> {
    if mesh.is_empty() {
        return VoxelGrid::filled(*grid_spec, false);
    }
    let bvh = Bvh::build(mesh);
    voxelize_occupancy_with(grid_spec, mesh, &bvh)
}

/// [`voxelize_occupancy`] with a caller-provided BVH.
pub fn voxelize_occupancy_with(
    grid_spec: &GridSpec,
    mesh: &TriangleMesh,
    bvh: &Bvh,
) -> VoxelGrid<bool> {
    let centers: Vec<_> = (0..grid_spec.voxel_count())
        .map(|i| grid_spec.center(grid_spec.voxel_index(i)))
        .collect();
    let w = winding_number_batch(mesh, bvh, &centers, WindingMode::Accelerated);
    let data = w.into_iter().map(|v| v >= 0.5).collect();
    VoxelGrid::new(*grid_spec, data).expect("occupancy payload sized to the grid")
}

/// Number of occupied voxels.
pub fn occupied_count(grid: &VoxelGrid<bool>) -> usize {
    grid.data().iter().filter(|&&b| b).count()
}
