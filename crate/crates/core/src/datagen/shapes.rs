//! Analytic test meshes: closed sphere and box, plus intentionally open
//! shapes (tube, slotted plate) that exercise winding numbers near 0.5.

use crate::geom::{Point3, TriangleMesh, Vector3};
use crate::{Error, Result};
use std::collections::HashMap;

/// Shape families for synthetic scenes.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticShape {
    /// Closed icosphere.
    Sphere { radius: f64 },
    /// Closed axis-aligned box with full extents (a, b, c).
    Box { extents: [f64; 3] },
    /// Open cylinder wall ("bottle"): no caps, two boundary rings.
    Tube { radius: f64, height: f64 },
    /// Flat plate with a rectangular slot ("foldingrack"): open sheet.
    SlottedPlate {
        width: f64,
        height: f64,
        slot_width: f64,
        slot_height: f64,
    },
}

impl AnalyticShape {
    pub fn category(&self) -> &'static str {
        match self {
            AnalyticShape::Sphere { .. } => "sphere",
            AnalyticShape::Box { .. } => "box",
            AnalyticShape::Tube { .. } => "bottle",
            AnalyticShape::SlottedPlate { .. } => "foldingrack",
        }
    }

    pub fn is_closed(&self) -> bool {
        matches!(self, AnalyticShape::Sphere { .. } | AnalyticShape::Box { .. })
    }
}

/// Deterministic tessellation of an analytic shape. `resolution` controls
/// icosphere subdivision level, tube ring segments, or plate grid cells.
pub fn make_analytic_mesh(shape: &AnalyticShape, resolution: usize) -> Result<TriangleMesh> {
    match shape {
        AnalyticShape::Sphere { radius } => {
            if !(*radius > 0.0) {
                return Err(Error::InvalidArgument("sphere radius must be > 0".into()));
            }
            Ok(icosphere(*radius, resolution))
        }
        AnalyticShape::Box { extents } => {
            if extents.iter().any(|&e| !(e > 0.0)) {
                return Err(Error::InvalidArgument("box extents must be > 0".into()));
            }
            Ok(box_mesh(*extents))
        }
        AnalyticShape::Tube { radius, height } => {
            if !(*radius > 0.0) || !(*height > 0.0) {
                return Err(Error::InvalidArgument(
                    "tube radius and height must be > 0".into(),
                ));
            }
            if resolution < 3 {
                return Err(Error::InvalidArgument("tube needs >= 3 ring segments".into()));
            }
            Ok(tube_mesh(*radius, *height, resolution))
        }
        AnalyticShape::SlottedPlate {
            width,
            height,
            slot_width,
            slot_height,
        } => {
            if !(*width > 0.0 && *height > 0.0) {
                return Err(Error::InvalidArgument("plate extents must be > 0".into()));
            }
            if !(*slot_width > 0.0 && *slot_height > 0.0)
                || slot_width >= width
                || slot_height >= height
            {
                return Err(Error::InvalidArgument(
                    "slot must be positive and smaller than the plate".into(),
                ));
            }
            if resolution < 4 {
                return Err(Error::InvalidArgument("plate needs resolution >= 4".into()));
            }
            Ok(slotted_plate(*width, *height, *slot_width, *slot_height, resolution))
        }
    }
}

/// Icosphere with `subdivisions` refinement levels, outward-oriented.
pub fn icosphere(radius: f64, subdivisions: usize) -> TriangleMesh {
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vector3> = vec![
        Vector3::new(-1.0, phi, 0.0),
        Vector3::new(1.0, phi, 0.0),
        Vector3::new(-1.0, -phi, 0.0),
        Vector3::new(1.0, -phi, 0.0),
        Vector3::new(0.0, -1.0, phi),
        Vector3::new(0.0, 1.0, phi),
        Vector3::new(0.0, -1.0, -phi),
        Vector3::new(0.0, 1.0, -phi),
        Vector3::new(phi, 0.0, -1.0),
        Vector3::new(phi, 0.0, 1.0),
        Vector3::new(-phi, 0.0, -1.0),
        Vector3::new(-phi, 0.0, 1.0),
    ];
    for v in &mut vertices {
        *v = v.normalize();
    }
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(u32, u32), u32> = HashMap::new();
        let mut new_faces = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mut mid = [0u32; 3];
            for (k, (a, b)) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])].into_iter().enumerate() {
                let key = if a < b { (a, b) } else { (b, a) };
                mid[k] = *midpoint.entry(key).or_insert_with(|| {
                    let m = ((vertices[a as usize] + vertices[b as usize]) / 2.0).normalize();
                    vertices.push(m);
                    (vertices.len() - 1) as u32
                });
            }
            new_faces.push([f[0], mid[0], mid[2]]);
            new_faces.push([f[1], mid[1], mid[0]]);
            new_faces.push([f[2], mid[2], mid[1]]);
            new_faces.push([mid[0], mid[1], mid[2]]);
        }
        faces = new_faces;
    }

    let points: Vec<Point3> = vertices.iter().map(|v| Point3::from(v * radius)).collect();
    let mesh = TriangleMesh::new(points, faces).expect("icosphere construction");
    orient_outward_convex(mesh)
}

/// Closed box centered at the origin with full extents `(a, b, c)`.
pub fn box_mesh(extents: [f64; 3]) -> TriangleMesh {
    let h = [extents[0] / 2.0, extents[1] / 2.0, extents[2] / 2.0];
    let mut vertices = Vec::with_capacity(8);
    for z in [-h[2], h[2]] {
        for y in [-h[1], h[1]] {
            for x in [-h[0], h[0]] {
                vertices.push(Point3::new(x, y, z));
            }
        }
    }
    // Two triangles per face; orientation fixed afterwards.
    let quads = [
        [0u32, 1, 3, 2], // -z
        [4, 5, 7, 6],    // +z
        [0, 1, 5, 4],    // -y
        [2, 3, 7, 6],    // +y
        [0, 2, 6, 4],    // -x
        [1, 3, 7, 5],    // +x
    ];
    let mut faces = Vec::with_capacity(12);
    for q in quads {
        faces.push([q[0], q[1], q[2]]);
        faces.push([q[0], q[2], q[3]]);
    }
    let mesh = TriangleMesh::new(vertices, faces).expect("box construction");
    orient_outward_convex(mesh)
}

/// Open cylinder wall along z: `segments` quads around, no caps.
fn tube_mesh(radius: f64, height: f64, segments: usize) -> TriangleMesh {
    let mut vertices = Vec::with_capacity(segments * 2);
    for &z in &[-height / 2.0, height / 2.0] {
        for s in 0..segments {
            let a = 2.0 * std::f64::consts::PI * s as f64 / segments as f64;
            vertices.push(Point3::new(radius * a.cos(), radius * a.sin(), z));
        }
    }
    let mut faces = Vec::with_capacity(segments * 2);
    let top = segments as u32;
    for s in 0..segments as u32 {
        let n = (s + 1) % segments as u32;
        // Outward orientation: counter-clockwise seen from outside.
        faces.push([s, n, top + s]);
        faces.push([n, top + n, top + s]);
    }
    TriangleMesh::new(vertices, faces).expect("tube construction")
}

/// Flat plate in the xy plane with a centered rectangular slot.
fn slotted_plate(
    width: f64,
    height: f64,
    slot_width: f64,
    slot_height: f64,
    resolution: usize,
) -> TriangleMesh {
    let nx = resolution;
    let ny = resolution;
    let mut vertex_id: HashMap<(usize, usize), u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let pos = |i: usize, j: usize| {
        Point3::new(
            -width / 2.0 + width * i as f64 / nx as f64,
            -height / 2.0 + height * j as f64 / ny as f64,
            0.0,
        )
    };
    for j in 0..ny {
        for i in 0..nx {
            // Cell center decides slot membership.
            let cx = -width / 2.0 + width * (i as f64 + 0.5) / nx as f64;
            let cy = -height / 2.0 + height * (j as f64 + 0.5) / ny as f64;
            if cx.abs() < slot_width / 2.0 && cy.abs() < slot_height / 2.0 {
                continue;
            }
            let mut corner = [0u32; 4];
            for (k, (di, dj)) in [(0, 0), (1, 0), (1, 1), (0, 1)].into_iter().enumerate() {
                let key = (i + di, j + dj);
                corner[k] = *vertex_id.entry(key).or_insert_with(|| {
                    vertices.push(pos(key.0, key.1));
                    (vertices.len() - 1) as u32
                });
            }
            faces.push([corner[0], corner[1], corner[2]]);
            faces.push([corner[0], corner[2], corner[3]]);
        }
    }
    TriangleMesh::new(vertices, faces).expect("plate construction")
}

/// For convex shapes centered at the origin: flip any face whose normal
/// points inward, yielding winding number +1 inside.
fn orient_outward_convex(mesh: TriangleMesh) -> TriangleMesh {
    let mut faces = Vec::with_capacity(mesh.face_count());
    for (i, f) in mesh.faces().iter().enumerate() {
        let n = mesh.face_normal(i);
        let c = mesh.face_centroid(i);
        if n.dot(&c.coords) < 0.0 {
            faces.push([f[0], f[2], f[1]]);
        } else {
            faces.push(*f);
        }
    }
    TriangleMesh::new(mesh.vertices().to_vec(), faces).expect("reorientation")
}
