//! Minimal 3D kd-tree for exact nearest-neighbor distances.

use crate::geom::Point3;

pub struct KdTree {
    points: Vec<Point3>,
    /// Node layout: subtree rooted at `nodes[i]` covers `order[lo..hi]`.
    order: Vec<u32>,
}

impl KdTree {
    pub fn build(points: &[Point3]) -> Self {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let pts = points.to_vec();
        build_recursive(&pts, &mut order, 0);
        KdTree { points: pts, order }
    }

    /// Exact nearest-neighbor distance from `q` to the stored set.
    pub fn nearest_distance(&self, q: &Point3) -> f64 {
        if self.points.is_empty() {
            return f64::INFINITY;
        }
        let mut best = f64::INFINITY;
        self.search(q, 0, self.order.len(), 0, &mut best);
        best.sqrt()
    }

    fn search(&self, q: &Point3, lo: usize, hi: usize, depth: usize, best: &mut f64) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let p = self.points[self.order[mid] as usize];
        let d2 = (p - q).norm_squared();
        if d2 < *best {
            *best = d2;
        }
        let axis = depth % 3;
        let delta = q[axis] - p[axis];
        let (first, second) = if delta < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(q, first.0, first.1, depth + 1, best);
        if delta * delta < *best {
            self.search(q, second.0, second.1, depth + 1, best);
        }
    }
}

fn build_recursive(points: &[Point3], order: &mut [u32], depth: usize) {
    if order.len() <= 1 {
        return;
    }
    let axis = depth % 3;
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis]
            .total_cmp(&points[b as usize][axis])
            .then(a.cmp(&b))
    });
    let (left, rest) = order.split_at_mut(mid);
    build_recursive(points, left, depth + 1);
    build_recursive(points, &mut rest[1..], depth + 1);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<Point3> = (0..300)
            .map(|_| {
                Point3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        let tree = KdTree::build(&pts);
        for _ in 0..200 {
            let q = Point3::new(
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
            );
            let want = pts
                .iter()
                .map(|p| (p - q).norm())
                .fold(f64::INFINITY, f64::min);
            let got = tree.nearest_distance(&q);
            assert!((got - want).abs() < 1e-12);
        }
    }
}
