use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TransportPlan;
use crate::cost::CostSpec;
use crate::error::{Error, Result};
use crate::geom;

/// Tolerance on the cyclic defect.
pub const CYCLIC_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyclicViolation {
    /// Entry indices in cycle order.
    pub entries: Vec<usize>,
    /// `sum c(x_i - y_i) - sum c(x_i - y_{i+1})`.
    pub defect: f64,
}

/// Samples `trials` tuples of `n` distinct support entries and reports those
/// whose cyclic reassignment lowers the cost by more than `1e-9`.
pub fn check_cyclical_monotonicity(plan: &TransportPlan, c: &CostSpec, n: usize, trials: usize, seed: u64) -> Result<Vec<CyclicViolation>> {
    if !(2..=6).contains(&n) {
        return Err(Error::invalid(format!("tuple size {n} not in 2..=6")));
    }
    let len = plan.entries.len();
    let n = n.min(len);
    if n < 2 {
        return Ok(vec![]);
    }
    let pts: Vec<_> = plan.triples().map(|(x, y, _)| (x, y)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..trials {
        let idx = sample(&mut rng, len, n).into_vec();
        let mut on = 0.0;
        let mut shifted = 0.0;
        for k in 0..n {
            let (x, y) = pts[idx[k]];
            let y_next = pts[idx[(k + 1) % n]].1;
            on += c.eval(geom::sub(x, y));
            shifted += c.eval(geom::sub(x, y_next));
        }
        let defect = on - shifted;
        if defect > CYCLIC_TOLERANCE {
            out.push(CyclicViolation { entries: idx, defect });
        }
    }
    Ok(out)
}
