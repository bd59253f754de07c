//! Triangle meshes. Possibly open and non-manifold; the winding-number field
//! is defined for such inputs, so nothing here deduplicates or repairs.

use super::{Point3, RigidTransform, Vector3};
use crate::{Error, Result};

/// An indexed triangle soup. Vertices in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    faces: Vec<[u32; 3]>,
}

impl TriangleMesh {
    /// Validates that every face index is in range and no face repeats an
    /// index. Open and non-manifold connectivity passes through untouched.
    pub fn new(vertices: Vec<Point3>, faces: Vec<[u32; 3]>) -> Result<Self> {
        let nv = vertices.len() as u32;
        for (i, f) in faces.iter().enumerate() {
            if f[0] >= nv || f[1] >= nv || f[2] >= nv {
                return Err(Error::InvalidMesh(format!(
                    "face {i} references vertex out of range (vertex count {nv})"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!("face {i} repeats a vertex index")));
            }
        }
        Ok(Self { vertices, faces })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    /// The three corner positions of face `i`.
    pub fn triangle(&self, i: usize) -> [Point3; 3] {
        let f = self.faces[i];
        [
            self.vertices[f[0] as usize],
            self.vertices[f[1] as usize],
            self.vertices[f[2] as usize],
        ]
    }

    pub fn face_area(&self, i: usize) -> f64 {
        let [a, b, c] = self.triangle(i);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    /// Unit normal of face `i` by the right-hand rule; zero for degenerate faces.
    pub fn face_normal(&self, i: usize) -> Vector3 {
        let [a, b, c] = self.triangle(i);
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        if len < 1e-300 {
            Vector3::zeros()
        } else {
            n / len
        }
    }

    pub fn face_centroid(&self, i: usize) -> Point3 {
        let [a, b, c] = self.triangle(i);
        Point3::from((a.coords + b.coords + c.coords) / 3.0)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|i| self.face_area(i)).sum()
    }

    /// Axis-aligned bounds as `(min, max)`, or `None` for a vertex-free mesh.
    pub fn bounds(&self) -> Option<(Point3, Point3)> {
        let first = *self.vertices.first()?;
        let mut min = first;
        let mut max = first;
        for v in &self.vertices {
            for k in 0..3 {
                min[k] = min[k].min(v[k]);
                max[k] = max[k].max(v[k]);
            }
        }
        Some((min, max))
    }

    pub fn transformed(&self, t: &RigidTransform) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|p| t.apply_point(p)).collect(),
            faces: self.faces.clone(),
        }
    }

    pub fn translated(&self, offset: Vector3) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|p| p + offset).collect(),
            faces: self.faces.clone(),
        }
    }

    pub fn scaled(&self, s: f64) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|p| Point3::from(p.coords * s)).collect(),
            faces: self.faces.clone(),
        }
    }

    /// Reverses every face winding (negates the winding-number field).
    pub fn flipped(&self) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.clone(),
            faces: self.faces.iter().map(|f| [f[0], f[2], f[1]]).collect(),
        }
    }

    /// Merges two meshes as disjoint face sets (indices of `other` shifted).
    pub fn union(&self, other: &TriangleMesh) -> TriangleMesh {
        let shift = self.vertices.len() as u32;
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut faces = self.faces.clone();
        faces.extend(other.faces.iter().map(|f| [f[0] + shift, f[1] + shift, f[2] + shift]));
        TriangleMesh { vertices, faces }
    }

    /// Mutable vertex access for local deformation (topology unchanged).
    pub fn vertices_mut(&mut self) -> &mut [Point3] {
        &mut self.vertices
    }

    /// Edges that belong to exactly one face (order-insensitive pairing).
    pub fn boundary_edge_count(&self) -> usize {
        use std::collections::HashMap;
        let mut counts: HashMap<(u32, u32), usize> = HashMap::new();
        for f in &self.faces {
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                let key = if a < b { (a, b) } else { (b, a) };
                *counts.entry(key).or_insert(0) += 1;
            }
        }
        counts.values().filter(|&&c| c == 1).count()
    }

    /// `true` when every edge is shared by exactly two faces.
    pub fn is_watertight(&self) -> bool {
        use std::collections::HashMap;
        let mut counts: HashMap<(u32, u32), usize> = HashMap::new();
        for f in &self.faces {
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                let key = if a < b { (a, b) } else { (b, a) };
                *counts.entry(key).or_insert(0) += 1;
            }
        }
        !self.faces.is_empty() && counts.values().all(|&c| c == 2)
    }

    /// V − E + F over the face-referenced vertex set.
    pub fn euler_characteristic(&self) -> i64 {
        use std::collections::HashSet;
        let mut verts: HashSet<u32> = HashSet::new();
        let mut edges: HashSet<(u32, u32)> = HashSet::new();
        for f in &self.faces {
            for &v in f {
                verts.insert(v);
            }
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                edges.insert(if a < b { (a, b) } else { (b, a) });
            }
        }
        verts.len() as i64 - edges.len() as i64 + self.faces.len() as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> TriangleMesh {
        TriangleMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(1.0, 1.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn rejects_out_of_range_face() {
        let r = TriangleMesh::new(vec![Point3::origin()], vec![[0, 0, 1]]);
        assert!(r.is_err());
    }

    #[test]
    fn rejects_degenerate_face_indices() {
        let verts = vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0)];
        assert!(TriangleMesh::new(verts, vec![[0, 1, 0]]).is_err());
    }

    #[test]
    fn area_of_unit_square() {
        assert!((square().total_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_edges_of_square() {
        // Two triangles sharing the diagonal: 4 boundary edges.
        assert_eq!(square().boundary_edge_count(), 4);
        assert!(!square().is_watertight());
    }

    #[test]
    fn union_keeps_face_sets_disjoint() {
        let a = square();
        let b = square().translated(Vector3::new(5.0, 0.0, 0.0));
        let u = a.union(&b);
        assert_eq!(u.face_count(), 4);
        assert_eq!(u.vertex_count(), 8);
        assert!((u.total_area() - 2.0).abs() < 1e-12);
    }
}
