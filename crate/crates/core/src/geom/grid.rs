//! Regular voxel grids with a min-corner origin and isotropic spacing.
//!
//! Linear indexing is x-fastest: `idx = x + dims[0] * (y + dims[1] * z)`.

use super::Point3;
use crate::{Error, Result};

/// Geometry of a voxel grid, without payload.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    /// Min corner of the grid volume (meters).
    pub origin: [f64; 3],
    /// Edge length of one voxel (meters), > 0.
    pub spacing: f64,
    /// Voxel counts per axis.
    pub dims: [usize; 3],
}

impl GridSpec {
    pub fn new(origin: Point3, spacing: f64, dims: [usize; 3]) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "grid spacing must be positive and finite, got {spacing}"
            )));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument(format!("grid dims must be nonzero, got {dims:?}")));
        }
        Ok(Self {
            origin: [origin.x, origin.y, origin.z],
            spacing,
            dims,
        })
    }

    /// Cubic grid of `d` voxels per axis covering `[center - half, center + half]^3`.
    pub fn cube(center: Point3, half_extent: f64, d: usize) -> Result<Self> {
        let spacing = 2.0 * half_extent / d as f64;
        Self::new(
            Point3::new(center.x - half_extent, center.y - half_extent, center.z - half_extent),
            spacing,
            [d, d, d],
        )
    }

    pub fn voxel_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn origin_point(&self) -> Point3 {
        Point3::new(self.origin[0], self.origin[1], self.origin[2])
    }

    /// Linear index of voxel `(x, y, z)`, x fastest.
    pub fn linear_index(&self, idx: [usize; 3]) -> usize {
        debug_assert!(idx[0] < self.dims[0] && idx[1] < self.dims[1] && idx[2] < self.dims[2]);
        idx[0] + self.dims[0] * (idx[1] + self.dims[1] * idx[2])
    }

    /// Inverse of [`Self::linear_index`].
    pub fn voxel_index(&self, linear: usize) -> [usize; 3] {
        let x = linear % self.dims[0];
        let rest = linear / self.dims[0];
        [x, rest % self.dims[1], rest / self.dims[1]]
    }

    /// World position of the voxel center.
    pub fn center(&self, idx: [usize; 3]) -> Point3 {
        Point3::new(
            self.origin[0] + (idx[0] as f64 + 0.5) * self.spacing,
            self.origin[1] + (idx[1] as f64 + 0.5) * self.spacing,
            self.origin[2] + (idx[2] as f64 + 0.5) * self.spacing,
        )
    }

    /// World position of the voxel's min corner (grid node).
    pub fn node(&self, idx: [usize; 3]) -> Point3 {
        Point3::new(
            self.origin[0] + idx[0] as f64 * self.spacing,
            self.origin[1] + idx[1] as f64 * self.spacing,
            self.origin[2] + idx[2] as f64 * self.spacing,
        )
    }

    /// Voxel containing a world point, or `None` when out of bounds.
    pub fn world_to_index(&self, p: &Point3) -> Option<[usize; 3]> {
        let mut idx = [0usize; 3];
        for k in 0..3 {
            let f = (p[k] - self.origin[k]) / self.spacing;
            if f < 0.0 {
                return None;
            }
            let i = f.floor() as usize;
            if i >= self.dims[k] {
                return None;
            }
            idx[k] = i;
        }
        Some(idx)
    }

    /// Max corner of the grid volume.
    pub fn max_corner(&self) -> Point3 {
        Point3::new(
            self.origin[0] + self.dims[0] as f64 * self.spacing,
            self.origin[1] + self.dims[1] as f64 * self.spacing,
            self.origin[2] + self.dims[2] as f64 * self.spacing,
        )
    }
}

/// A voxel grid with one payload value per voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid<T> {
    pub spec: GridSpec,
    data: Vec<T>,
}

impl<T> VoxelGrid<T> {
    pub fn new(spec: GridSpec, data: Vec<T>) -> Result<Self> {
        if data.len() != spec.voxel_count() {
            return Err(Error::DimensionMismatch(format!(
                "payload length {} does not match {}x{}x{} grid",
                data.len(),
                spec.dims[0],
                spec.dims[1],
                spec.dims[2]
            )));
        }
        Ok(Self { spec, data })
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn get(&self, idx: [usize; 3]) -> &T {
        &self.data[self.spec.linear_index(idx)]
    }

    pub fn set(&mut self, idx: [usize; 3], value: T) {
        let i = self.spec.linear_index(idx);
        self.data[i] = value;
    }
}

impl<T: Clone> VoxelGrid<T> {
    pub fn filled(spec: GridSpec, value: T) -> Self {
        let n = spec.voxel_count();
        Self {
            spec,
            data: vec![value; n],
        }
    }
}
