//! Oracle suite for generalized winding numbers: analytic closed/open cases,
//! a Monte Carlo solid-angle oracle, and exact-vs-accelerated agreement.

use recon_core::datagen::icosphere;
use recon_core::geom::{Point3, TriangleMesh, Vector3};
use recon_core::wnf::{
    winding_number, winding_number_batch, winding_number_batch_checked, Bvh, WindingMode,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Upper half of a lat-long sphere with its boundary ring exactly on z = 0.
/// At the boundary-circle center the surface subtends exactly 2π.
fn open_hemisphere(radius: f64, rings: usize, segments: usize) -> TriangleMesh {
    let mut vertices = vec![Point3::new(0.0, 0.0, radius)];
    for r in 1..=rings {
        let polar = std::f64::consts::FRAC_PI_2 * r as f64 / rings as f64;
        for s in 0..segments {
            let az = 2.0 * std::f64::consts::PI * s as f64 / segments as f64;
            vertices.push(Point3::new(
                radius * polar.sin() * az.cos(),
                radius * polar.sin() * az.sin(),
                radius * polar.cos(),
            ));
        }
    }
    let mut faces = Vec::new();
    let ring_start = |r: usize| 1 + (r - 1) * segments;
    for s in 0..segments {
        let n = (s + 1) % segments;
        faces.push([
            0u32,
            (ring_start(1) + s) as u32,
            (ring_start(1) + n) as u32,
        ]);
    }
    for r in 1..rings {
        for s in 0..segments {
            let n = (s + 1) % segments;
            let a = (ring_start(r) + s) as u32;
            let b = (ring_start(r) + n) as u32;
            let c = (ring_start(r + 1) + s) as u32;
            let d = (ring_start(r + 1) + n) as u32;
            faces.push([a, c, b]);
            faces.push([b, c, d]);
        }
    }
    let mesh = TriangleMesh::new(vertices, faces).unwrap();
    // Orient outward (away from origin).
    let mut fixed = Vec::new();
    for (i, f) in mesh.faces().iter().enumerate() {
        if mesh.face_normal(i).dot(&mesh.face_centroid(i).coords) < 0.0 {
            fixed.push([f[0], f[2], f[1]]);
        } else {
            fixed.push(*f);
        }
    }
    TriangleMesh::new(mesh.vertices().to_vec(), fixed).unwrap()
}

#[test]
fn closed_icosphere_interior_and_exterior() {
    let mesh = icosphere(0.5, 3);
    let center = winding_number(&mesh, &Point3::origin());
    assert!(!center.near_surface);
    assert!((center.value - 1.0).abs() < 1e-6, "w(center) = {}", center.value);

    let far = winding_number(&mesh, &Point3::new(50.0, 0.0, 0.0));
    assert!(far.value.abs() < 1e-6, "w(far) = {}", far.value);
}

#[test]
fn hemisphere_boundary_center_is_half() {
    let mesh = open_hemisphere(1.0, 8, 16);
    let w = winding_number(&mesh, &Point3::origin());
    assert!((w.value - 0.5).abs() < 1e-9, "w = {}", w.value);
}

#[test]
fn single_triangle_matches_monte_carlo_solid_angle() {
    // A triangle viewed from a point on its normal axis; Monte Carlo oracle
    // with 10^7 uniform directions, assert within 3 sigma.
    let a = Point3::new(-0.8, -0.5, 1.0);
    let b = Point3::new(0.9, -0.4, 1.0);
    let c = Point3::new(0.0, 1.1, 1.0);
    let mesh = TriangleMesh::new(vec![a, b, c], vec![[0, 1, 2]]).unwrap();
    let q = Point3::origin();
    let w = winding_number(&mesh, &q).value;

    let n = 10_000_000usize;
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    let mut hits = 0usize;
    for _ in 0..n {
        let z: f64 = rng.random_range(-1.0..1.0);
        let az: f64 = rng.random_range(0.0..2.0 * std::f64::consts::PI);
        let rxy = (1.0 - z * z).sqrt();
        let dir = Vector3::new(rxy * az.cos(), rxy * az.sin(), z);
        let ray = recon_core::geom::Ray { origin: q, dir };
        if recon_core::geom::intersect_triangle(&ray, a, b, c).is_some() {
            hits += 1;
        }
    }
    let p = hits as f64 / n as f64;
    let mc_w = p; // fraction of the full 4π sphere
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    assert!(
        (w.abs() - mc_w).abs() <= 3.0 * sigma + 1e-9,
        "|w| = {}, MC = {mc_w}, sigma = {sigma}",
        w.abs()
    );
}

#[test]
fn accelerated_matches_exact_within_1e3() {
    let mesh = icosphere(0.5, 3);
    let bvh = Bvh::build(&mesh);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut queries = Vec::new();
    while queries.len() < 1000 {
        let p = Point3::new(
            rng.random_range(-1.5..1.5),
            rng.random_range(-1.5..1.5),
            rng.random_range(-1.5..1.5),
        );
        if p.coords.norm() > 0.55 {
            queries.push(p);
        }
    }
    let exact = winding_number_batch(&mesh, &bvh, &queries, WindingMode::Exact);
    let fast = winding_number_batch(&mesh, &bvh, &queries, WindingMode::Accelerated);
    let max_err = exact
        .iter()
        .zip(&fast)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    assert!(max_err <= 1e-3, "max |exact - accelerated| = {max_err}");
}

#[test]
fn batch_edge_cases() {
    let mesh = icosphere(0.5, 1);
    let bvh = Bvh::build(&mesh);
    let empty: Vec<Point3> = vec![];
    assert!(winding_number_batch(&mesh, &bvh, &empty, WindingMode::Exact).is_empty());

    let q = Point3::new(0.1, 0.2, 0.0);
    let dup = vec![q, q];
    for mode in [WindingMode::Exact, WindingMode::Accelerated] {
        let out = winding_number_batch(&mesh, &bvh, &dup, mode);
        assert_eq!(out[0].to_bits(), out[1].to_bits());
    }

    // Mismatched BVH is rejected.
    let other = icosphere(0.5, 2);
    assert!(winding_number_batch_checked(&other, &bvh, &dup, WindingMode::Exact).is_err());
}

#[test]
fn additivity_over_disjoint_face_sets() {
    let a = icosphere(0.4, 1);
    let b = icosphere(0.3, 1).translated(Vector3::new(1.5, 0.0, 0.0));
    let union = a.union(&b);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let q = Point3::new(
            rng.random_range(-2.0..3.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
        );
        let wa = winding_number(&a, &q).value;
        let wb = winding_number(&b, &q).value;
        let wu = winding_number(&union, &q).value;
        assert!((wu - (wa + wb)).abs() < 1e-12);
    }
}

#[test]
fn orientation_flip_negates() {
    let mesh = icosphere(0.5, 2);
    let flipped = mesh.flipped();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let q = Point3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let w = winding_number(&mesh, &q).value;
        let wf = winding_number(&flipped, &q).value;
        assert!((w + wf).abs() < 1e-12);
    }
}

#[test]
fn closed_surface_integrality() {
    let mesh = icosphere(0.5, 2);
    let bvh = Bvh::build(&mesh);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    while checked < 200 {
        let q = Point3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if bvh.distance(&mesh, &q) <= 1e-6 {
            continue;
        }
        let w = winding_number(&mesh, &q).value;
        assert!((w - w.round()).abs() < 1e-6, "w = {w} not near integer");
        checked += 1;
    }
}

#[test]
fn near_surface_query_is_flagged() {
    let mesh = icosphere(0.5, 1);
    // Exactly on a vertex.
    let v = mesh.vertices()[0];
    assert!(winding_number(&mesh, &v).near_surface);
    // Clearly off the surface.
    assert!(!winding_number(&mesh, &Point3::origin()).near_surface);
}
