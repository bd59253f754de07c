//! Minimum-cost perfect matching: exact Hungarian (shortest augmenting path)
//! for small problems, and an auction algorithm with a certified duality gap
//! for large ones.

use crate::{Error, Result};

/// Exact minimum-cost assignment on a square cost matrix (row-major),
/// Jonker-Volgenant style shortest augmenting paths. Returns per-row column
/// assignments.
pub fn hungarian(cost: &[f64], n: usize) -> Result<Vec<usize>> {
    if cost.len() != n * n {
        return Err(Error::DimensionMismatch(format!(
            "cost matrix length {} != {n}x{n}",
            cost.len()
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    // job[w] = row assigned to column w; column n is the virtual start.
    let mut job: Vec<Option<usize>> = vec![None; n + 1];
    let mut ys = vec![0.0f64; n];
    let mut yt = vec![0.0f64; n + 1];

    for row in 0..n {
        let mut w_curr = n;
        job[w_curr] = Some(row);
        let mut min_to = vec![f64::INFINITY; n + 1];
        let mut prev: Vec<Option<usize>> = vec![None; n + 1];
        let mut in_tree = vec![false; n + 1];

        while let Some(j) = job[w_curr] {
            in_tree[w_curr] = true;
            let mut delta = f64::INFINITY;
            let mut w_next = n;
            for w in 0..n {
                if in_tree[w] {
                    continue;
                }
                let reduced = cost[j * n + w] - ys[j] - yt[w];
                if reduced < min_to[w] {
                    min_to[w] = reduced;
                    prev[w] = Some(w_curr);
                }
                if min_to[w] < delta {
                    delta = min_to[w];
                    w_next = w;
                }
            }
            for w in 0..=n {
                if in_tree[w] {
                    if let Some(jw) = job[w] {
                        ys[jw] += delta;
                    }
                    yt[w] -= delta;
                } else {
                    min_to[w] -= delta;
                }
            }
            w_curr = w_next;
        }
        // Augment along the alternating path.
        while w_curr != n {
            let w_prev = prev[w_curr].expect("path built above");
            job[w_curr] = job[w_prev];
            w_curr = w_prev;
        }
    }

    let mut assignment = vec![usize::MAX; n];
    for w in 0..n {
        if let Some(j) = job[w] {
            assignment[j] = w;
        }
    }
    debug_assert!(assignment.iter().all(|&w| w != usize::MAX));
    Ok(assignment)
}

/// Result of the large-problem solver: assignment plus a certified bound on
/// the relative optimality gap.
pub struct AuctionSolution {
    pub assignment: Vec<usize>,
    pub primal: f64,
    pub dual_bound: f64,
}

impl AuctionSolution {
    pub fn relative_gap(&self) -> f64 {
        if self.primal.abs() < 1e-300 {
            0.0
        } else {
            (self.primal - self.dual_bound) / self.primal.abs()
        }
    }
}

/// Auction algorithm with epsilon scaling. Scales epsilon down until the
/// explicit LP duality gap certifies the assignment within `rel_gap_target`
/// of optimal (the dual value is a true lower bound, so the certificate does
/// not rely on auction theory).
pub fn auction(cost: &[f64], n: usize, rel_gap_target: f64) -> Result<AuctionSolution> {
    if cost.len() != n * n {
        return Err(Error::DimensionMismatch(format!(
            "cost matrix length {} != {n}x{n}",
            cost.len()
        )));
    }
    if n == 0 {
        return Ok(AuctionSolution {
            assignment: Vec::new(),
            primal: 0.0,
            dual_bound: 0.0,
        });
    }
    let cmax = cost.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let cmin = cost.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = (cmax - cmin).max(1e-12);

    let mut prices = vec![0.0f64; n];
    let mut eps = spread / 8.0;
    let mut best: Option<AuctionSolution> = None;

    for _round in 0..60 {
        let assignment = auction_round(cost, n, &mut prices, eps);
        let (primal, dual) = primal_dual(cost, n, &assignment, &prices);
        let sol = AuctionSolution {
            assignment,
            primal,
            dual_bound: dual,
        };
        let done = sol.relative_gap() <= rel_gap_target;
        let better = best.as_ref().map_or(true, |b| sol.primal < b.primal);
        if better {
            best = Some(sol);
        }
        if done {
            break;
        }
        eps /= 5.0;
        if eps < 1e-14 * spread {
            break;
        }
    }
    Ok(best.expect("at least one round runs"))
}

/// One auction pass at a fixed epsilon, starting from current prices.
fn auction_round(cost: &[f64], n: usize, prices: &mut [f64], eps: f64) -> Vec<usize> {
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut assigned: Vec<Option<usize>> = vec![None; n];
    let mut queue: Vec<usize> = (0..n).collect();
    while let Some(i) = queue.pop() {
        // Find best and second-best net value for bidder i.
        let row = &cost[i * n..(i + 1) * n];
        let mut best_j = 0;
        let mut best_v = f64::NEG_INFINITY;
        let mut second_v = f64::NEG_INFINITY;
        for j in 0..n {
            let v = -row[j] - prices[j];
            if v > best_v {
                second_v = best_v;
                best_v = v;
                best_j = j;
            } else if v > second_v {
                second_v = v;
            }
        }
        let increment = if second_v.is_finite() {
            best_v - second_v + eps
        } else {
            eps
        };
        prices[best_j] += increment;
        if let Some(prev) = owner[best_j] {
            assigned[prev] = None;
            queue.push(prev);
        }
        owner[best_j] = Some(i);
        assigned[i] = Some(best_j);
    }
    assigned.into_iter().map(|j| j.expect("all assigned")).collect()
}

/// Primal cost of the assignment and the LP dual value for the prices.
/// Column duals are `v_j = -p_j` (bidders minimize `c_ij + p_j`), row duals
/// the tight `u_i = min_j (c_ij + p_j)`; any price vector gives a valid
/// lower bound.
fn primal_dual(cost: &[f64], n: usize, assignment: &[usize], prices: &[f64]) -> (f64, f64) {
    let primal: f64 = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i * n + j])
        .sum();
    let mut dual: f64 = -prices.iter().sum::<f64>();
    for i in 0..n {
        let row = &cost[i * n..(i + 1) * n];
        let u = (0..n)
            .map(|j| row[j] + prices[j])
            .fold(f64::INFINITY, f64::min);
        dual += u;
    }
    (primal, dual)
}
