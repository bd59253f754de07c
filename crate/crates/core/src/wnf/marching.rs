//! Marching cubes over winding-number grids.

use super::tables::{CORNER_OFFSETS, EDGE_CORNERS, TRI_TABLE};
use super::WnfGrid;
use crate::geom::{Point3, TriangleMesh};
use std::collections::HashMap;

/// Extracts the iso-surface of `grid` (values at voxel centers) as a triangle
/// mesh in world coordinates, with linear interpolation along cell edges.
///
/// Vertices on shared cell edges are welded, so the output is watertight over
/// interior cells of a sign-consistent field. Faces are wound with normals
/// pointing out of the `>= iso` region. An empty mesh is a valid output.
pub fn marching_cubes(grid: &WnfGrid, iso: f64) -> TriangleMesh {
    let dims = grid.spec.dims;
    if dims[0] < 2 || dims[1] < 2 || dims[2] < 2 {
        return TriangleMesh::new(vec![], vec![]).expect("empty mesh");
    }
    let data = grid.data();
    let spec = &grid.spec;
    let lattice = |x: usize, y: usize, z: usize| -> usize { spec.linear_index([x, y, z]) };

    let mut vertices: Vec<Point3> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();
    // Welding cache: (lattice index of low corner, axis) -> vertex index.
    let mut edge_vertex: HashMap<(usize, u8), u32> = HashMap::new();

    for z in 0..dims[2] - 1 {
        for y in 0..dims[1] - 1 {
            for x in 0..dims[0] - 1 {
                let mut corner_lin = [0usize; 8];
                let mut values = [0.0f64; 8];
                let mut config = 0usize;
                for (i, &(dx, dy, dz)) in CORNER_OFFSETS.iter().enumerate() {
                    let lin = lattice(x + dx, y + dy, z + dz);
                    corner_lin[i] = lin;
                    values[i] = data[lin];
                    if values[i] < iso {
                        config |= 1 << i;
                    }
                }
                let row = &TRI_TABLE[config];
                if row[0] < 0 {
                    continue;
                }

                let mut cell_vertex = [u32::MAX; 12];
                let mut k = 0;
                while row[k] >= 0 {
                    let tri_edges = [row[k] as usize, row[k + 1] as usize, row[k + 2] as usize];
                    let mut tri = [0u32; 3];
                    for (slot, &e) in tri.iter_mut().zip(&tri_edges) {
                        if cell_vertex[e] == u32::MAX {
                            cell_vertex[e] = edge_point(
                                spec,
                                data,
                                iso,
                                corner_lin[EDGE_CORNERS[e].0],
                                corner_lin[EDGE_CORNERS[e].1],
                                &mut vertices,
                                &mut edge_vertex,
                            );
                        }
                        *slot = cell_vertex[e];
                    }
                    // Exact-iso corners can collapse an edge; skip the sliver.
                    if tri[0] != tri[1] && tri[1] != tri[2] && tri[0] != tri[2] {
                        faces.push(tri);
                    }
                    k += 3;
                }
            }
        }
    }

    TriangleMesh::new(vertices, faces).expect("marching cubes emits valid indices")
}

/// Interpolated crossing on the lattice edge between two voxel centers,
/// welded through the cache. The interpolation always runs from the lower
/// lattice index so shared edges produce bit-identical vertices.
#[allow(clippy::too_many_arguments)]
fn edge_point(
    spec: &crate::geom::GridSpec,
    data: &[f64],
    iso: f64,
    corner_a: usize,
    corner_b: usize,
    vertices: &mut Vec<Point3>,
    cache: &mut HashMap<(usize, u8), u32>,
) -> u32 {
    let (lo, hi) = if corner_a < corner_b {
        (corner_a, corner_b)
    } else {
        (corner_b, corner_a)
    };
    let lo_idx = spec.voxel_index(lo);
    let hi_idx = spec.voxel_index(hi);
    let axis = if hi_idx[0] != lo_idx[0] {
        0u8
    } else if hi_idx[1] != lo_idx[1] {
        1
    } else {
        2
    };
    if let Some(&v) = cache.get(&(lo, axis)) {
        return v;
    }
    let va = data[lo];
    let vb = data[hi];
    let t = if (vb - va).abs() < 1e-300 {
        0.5
    } else {
        ((iso - va) / (vb - va)).clamp(0.0, 1.0)
    };
    let pa = spec.center(lo_idx);
    let pb = spec.center(hi_idx);
    let p = Point3::from(pa.coords + (pb.coords - pa.coords) * t);
    let idx = vertices.len() as u32;
    vertices.push(p);
    cache.insert((lo, axis), idx);
    idx
}
