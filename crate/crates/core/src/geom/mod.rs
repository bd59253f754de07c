//! Foundational geometric types and operations: meshes, rigid transforms,
//! cameras, voxel grids, ray casting, depth back-projection, surface sampling.

mod camera;
mod grid;
mod mesh;
mod occupancy;
mod pointcloud;
mod raycast;
mod sample;
mod transform;

pub mod io;

pub use camera::{backproject_depth, render_depth, render_depth_with, DepthImage, PinholeCamera};
pub use grid::{GridSpec, VoxelGrid};
pub use mesh::TriangleMesh;
pub use occupancy::{occupied_count, voxelize_occupancy, voxelize_occupancy_with};
pub use pointcloud::{transform_points, PointCloud};
pub use raycast::{closest_point_on_triangle, intersect_triangle, Ray, RayHit, TriangleHit};
pub use sample::sample_surface;
pub use transform::{axis_angle_from_rotation, rotation_from_axis_angle, RigidTransform};

pub type Point3 = nalgebra::Point3<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;
pub type Matrix3 = nalgebra::Matrix3<f64>;
