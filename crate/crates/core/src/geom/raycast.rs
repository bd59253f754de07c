//! Ray-triangle intersection and point-triangle distance primitives.

use super::{Point3, Vector3};

/// Barycentric slack for hits at shared edges; the first hit within this
/// tolerance is accepted, ties broken by face index.
pub const BARY_TOL: f64 = 1e-12;

/// A ray with arbitrary (not necessarily unit) direction. `t` parameters are
/// expressed in units of `dir`.
#[derive(Debug, Clone, Copy)]
pub struct Ray {
    pub origin: Point3,
    pub dir: Vector3,
}

impl Ray {
    pub fn at(&self, t: f64) -> Point3 {
        self.origin + self.dir * t
    }
}

/// Intersection parameters against a single triangle.
#[derive(Debug, Clone, Copy)]
pub struct TriangleHit {
    pub t: f64,
    pub u: f64,
    pub v: f64,
}

/// A ray-mesh hit, with `face` disambiguating equal-`t` edge ties.
#[derive(Debug, Clone, Copy)]
pub struct RayHit {
    pub t: f64,
    pub face: u32,
    pub u: f64,
    pub v: f64,
}

impl RayHit {
    /// Lexicographic (t, face) order, the deterministic tie-break rule.
    pub fn better_than(&self, other: &RayHit) -> bool {
        self.t < other.t || (self.t == other.t && self.face < other.face)
    }
}

/// Möller–Trumbore with `BARY_TOL` slack on the barycentric bounds. Only
/// forward hits (`t > 0`) count.
pub fn intersect_triangle(ray: &Ray, a: Point3, b: Point3, c: Point3) -> Option<TriangleHit> {
    let e1 = b - a;
    let e2 = c - a;
    let pvec = ray.dir.cross(&e2);
    let det = e1.dot(&pvec);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv_det = 1.0 / det;
    let tvec = ray.origin - a;
    let u = tvec.dot(&pvec) * inv_det;
    if !(-BARY_TOL..=1.0 + BARY_TOL).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(&e1);
    let v = ray.dir.dot(&qvec) * inv_det;
    if v < -BARY_TOL || u + v > 1.0 + BARY_TOL {
        return None;
    }
    let t = e2.dot(&qvec) * inv_det;
    if t <= 0.0 {
        return None;
    }
    Some(TriangleHit { t, u, v })
}

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision
/// Detection, 5.1.5).
pub fn closest_point_on_triangle(p: &Point3, a: Point3, b: Point3, c: Point3) -> Point3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }

    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }

    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }

    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ray_hits_triangle_center() {
        let ray = Ray {
            origin: Point3::new(0.25, 0.25, -1.0),
            dir: Vector3::new(0.0, 0.0, 1.0),
        };
        let hit = intersect_triangle(
            &ray,
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        )
        .unwrap();
        assert_relative_eq!(hit.t, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ray_misses_outside_triangle() {
        let ray = Ray {
            origin: Point3::new(0.9, 0.9, -1.0),
            dir: Vector3::new(0.0, 0.0, 1.0),
        };
        assert!(intersect_triangle(
            &ray,
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        )
        .is_none());
    }

    #[test]
    fn backward_hit_rejected() {
        let ray = Ray {
            origin: Point3::new(0.25, 0.25, 1.0),
            dir: Vector3::new(0.0, 0.0, 1.0),
        };
        assert!(intersect_triangle(
            &ray,
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        )
        .is_none());
    }

    #[test]
    fn closest_point_regions() {
        let a = Point3::new(0.0, 0.0, 0.0);
        let b = Point3::new(1.0, 0.0, 0.0);
        let c = Point3::new(0.0, 1.0, 0.0);
        // Interior projection.
        let q = closest_point_on_triangle(&Point3::new(0.2, 0.2, 1.0), a, b, c);
        assert_relative_eq!(q.coords, Vector3::new(0.2, 0.2, 0.0), epsilon = 1e-12);
        // Vertex region.
        let q = closest_point_on_triangle(&Point3::new(-1.0, -1.0, 0.0), a, b, c);
        assert_relative_eq!(q.coords, a.coords, epsilon = 1e-12);
        // Edge region.
        let q = closest_point_on_triangle(&Point3::new(0.5, -1.0, 0.0), a, b, c);
        assert_relative_eq!(q.coords, Vector3::new(0.5, 0.0, 0.0), epsilon = 1e-12);
    }
}
