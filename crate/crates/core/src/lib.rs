//! Core library for visual-tactile in-hand object reconstruction.
//!
//! The pipeline reconstructs object geometry as a winding-number field (WNF):
//! a partial depth-camera point cloud and a handful of fingertip tactile
//! readings are encoded into features, a small decoder predicts the winding
//! number at query positions, and marching cubes extracts the surface at the
//! 0.5 level. Everything is CPU-only, deterministic per seed, and verifiable
//! against brute-force oracles.
//!
//! Modules map onto pipeline stages:
//! - [`geom`]: meshes, rigid transforms, cameras, voxel grids, ray casting,
//!   surface sampling, file formats.
//! - [`wnf`]: generalized winding numbers (exact and BVH-accelerated),
//!   WNF grids, marching cubes.
//! - [`tactile`]: gel sensor model, tactile image synthesis, depth recovery,
//!   contact patches.
//! - [`hand`]: articulated finger chains, fingertip sensor poses, sphere
//!   query sampling.
//! - [`neural`]: feature encoders, fusion, WNF decoder, training with
//!   from-scratch gradients.
//! - [`datagen`]: synthetic scene generation (meshes, grasps, depth views,
//!   tactile readings, ground-truth fields).
//! - [`metrics`]: volumetric IoU, Chamfer distance, Earth Mover's Distance,
//!   variant evaluation harness.

pub mod datagen;
pub mod error;
pub mod geom;
pub mod hand;
pub mod metrics;
pub mod neural;
pub mod parallel;
pub mod tactile;
pub mod wnf;

pub use error::{Error, Result};
