//! Generalized winding numbers, WNF grids, and isosurface extraction.
//!
//! The winding number w(q) of a triangle mesh at a query point is the total
//! signed solid angle of its faces divided by 4π: ≈1 inside a closed
//! surface, ≈0 outside, and ≈0.5 across open boundaries. Unlike a signed
//! distance field it stays well-defined for open and non-manifold geometry.

mod bvh;
mod marching;
mod tables;
mod winding;

pub use bvh::Bvh;
pub use marching::marching_cubes;
pub use winding::{
    evaluate_wnf_grid, evaluate_wnf_grid_with, winding_number, winding_number_batch,
    winding_number_batch_checked, winding_number_exact, WindingEval, WindingMode,
    NEAR_SURFACE_EPS,
};

use crate::geom::VoxelGrid;

/// A voxel grid of winding-number scalars (the field w and its ground truth).
///
/// Values are stored unclamped; for closed meshes they sit within ±0.01 of an
/// integer once more than one spacing away from the surface.
pub type WnfGrid = VoxelGrid<f64>;
