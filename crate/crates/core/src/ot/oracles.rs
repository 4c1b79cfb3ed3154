//! Independent solvers used to cross-check the network simplex.

use itertools::Itertools;

use super::{check_masses, PlanEntry, TransportPlan};
use crate::cost::CostSpec;
use crate::error::{Error, Result};
use crate::geom;
use crate::measure::DiscreteMeasure;

/// Exhaustive search over permutations for equal-size, equal-weight inputs
/// with at most 8 atoms.
pub fn brute_force(lambda: &DiscreteMeasure, mu: &DiscreteMeasure, c: &CostSpec) -> Result<TransportPlan> {
    let n = lambda.len();
    if n != mu.len() || n == 0 || n > 8 {
        return Err(Error::invalid("brute force needs equal atom counts between 1 and 8"));
    }
    let w = lambda.weights[0];
    if lambda.weights.iter().chain(&mu.weights).any(|&v| v != w) {
        return Err(Error::invalid("brute force needs identical weights"));
    }
    let mut best = f64::INFINITY;
    let mut best_perm = Vec::new();
    for perm in (0..n).permutations(n) {
        let total: f64 = perm.iter().enumerate().map(|(i, &j)| c.eval(geom::sub(lambda.points[i], mu.points[j]))).sum();
        if total < best {
            best = total;
            best_perm = perm;
        }
    }
    let entries = best_perm.iter().enumerate().map(|(i, &j)| PlanEntry { i, j, mass: w }).collect();
    TransportPlan::new(lambda.clone(), mu.clone(), entries)
}

/// Quantile coupling on the line, optimal for every convex cost of `x - y`.
pub fn monotone_1d(lambda: &DiscreteMeasure, mu: &DiscreteMeasure) -> Result<TransportPlan> {
    if lambda.dim != 1 || mu.dim != 1 {
        return Err(Error::invalid("monotone rearrangement needs 1-d measures"));
    }
    let s = check_masses(lambda, mu)?;
    let target = if s == 1.0 { mu.clone() } else { mu.scaled(s) };
    let order = |m: &DiscreteMeasure| -> Vec<usize> {
        let mut idx: Vec<usize> = (0..m.len()).filter(|&k| m.weights[k] > 0.0).collect();
        idx.sort_by(|&a, &b| m.points[a][0].total_cmp(&m.points[b][0]).then(a.cmp(&b)));
        idx
    };
    let (ia, ib) = (order(lambda), order(&target));
    let mut entries = Vec::with_capacity(ia.len() + ib.len());
    let (mut a, mut b) = (0, 0);
    let mut ra = ia.first().map_or(0.0, |&k| lambda.weights[k]);
    let mut rb = ib.first().map_or(0.0, |&k| target.weights[k]);
    let drop = 1e-15 * lambda.total_mass();
    while a < ia.len() && b < ib.len() {
        let m = ra.min(rb);
        if m > drop {
            entries.push(PlanEntry { i: ia[a], j: ib[b], mass: m });
        }
        ra -= m;
        rb -= m;
        // Advance whichever side is exhausted; on a tie advance both.
        let adv_a = ra <= rb;
        let adv_b = rb <= ra;
        if adv_a {
            a += 1;
            if a < ia.len() {
                ra = lambda.weights[ia[a]];
            }
        }
        if adv_b {
            b += 1;
            if b < ib.len() {
                rb = target.weights[ib[b]];
            }
        }
    }
    entries.sort_by_key(|e| (e.i, e.j));
    Ok(TransportPlan { source: lambda.clone(), target, entries, certificate: None })
}
