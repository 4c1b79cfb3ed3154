//! Exact discrete optimal transport and the quantities built on it.

mod cyclic;
mod lemmas;
mod oracles;
mod simplex;
mod smallness;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use cyclic::{check_cyclical_monotonicity, CyclicViolation, CYCLIC_TOLERANCE};
pub use lemmas::*;
pub use oracles::{brute_force, monotone_1d};
pub use smallness::{data_d, data_d_with, data_term, energy_e, local_cost, local_uniform_distance, DataMetric, Normalization, SmallnessReport};

use crate::cost::CostSpec;
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::measure::DiscreteMeasure;
use crate::trajectory::Trajectory;

/// Largest dense cost matrix the exact solver accepts.
pub const MAX_COST_ENTRIES: usize = 4_000_000;
/// Relative tolerance under which unequal masses are rescaled to match.
pub const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub i: usize,
    pub j: usize,
    pub mass: f64,
}

/// Dual certificate attached by the exact solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `max (u_i + v_j - c_ij)^+ / (1 + max c)`.
    pub dual_violation: f64,
    /// `|primal - dual| / (1 + |primal|)`.
    pub duality_gap: f64,
    pub pivots: usize,
}

impl Certificate {
    pub fn norm(&self) -> f64 {
        self.dual_violation.max(self.duality_gap)
    }
}

/// A sparse coupling between two measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub source: DiscreteMeasure,
    pub target: DiscreteMeasure,
    pub entries: Vec<PlanEntry>,
    pub certificate: Option<Certificate>,
}

impl TransportPlan {
    /// Builds a plan and checks its marginals to `1e-10` relative.
    pub fn new(source: DiscreteMeasure, target: DiscreteMeasure, entries: Vec<PlanEntry>) -> Result<Self> {
        let plan = Self { source, target, entries, certificate: None };
        let err = plan.marginal_error();
        if err > 1e-10 {
            return Err(Error::invalid(format!("plan marginals off by {err:e}")));
        }
        Ok(plan)
    }

    /// Plan pairing atom `k` of `m` with itself.
    pub fn identity(m: &DiscreteMeasure) -> Self {
        let entries = m.weights.iter().enumerate().filter(|(_, w)| **w > 0.0).map(|(k, &w)| PlanEntry { i: k, j: k, mass: w }).collect();
        Self { source: m.clone(), target: m.clone(), entries, certificate: None }
    }

    pub fn dim(&self) -> usize {
        self.source.dim
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.mass).sum()
    }

    /// `(x, y, mass)` per entry.
    pub fn triples(&self) -> impl Iterator<Item = (Point, Point, f64)> + '_ {
        self.entries.iter().map(|e| (self.source.points[e.i], self.target.points[e.j], e.mass))
    }

    pub fn trajectories(&self) -> Vec<Trajectory> {
        self.triples().map(|(x, y, m)| Trajectory::new(x, y, m)).collect()
    }

    pub fn cost(&self, c: &CostSpec) -> f64 {
        self.triples().map(|(x, y, m)| m * c.eval(crate::geom::sub(x, y))).sum()
    }

    /// Largest marginal defect relative to the total mass.
    pub fn marginal_error(&self) -> f64 {
        let mut rows = self.source.weights.clone();
        let mut cols = self.target.weights.clone();
        for e in &self.entries {
            rows[e.i] -= e.mass;
            cols[e.j] -= e.mass;
        }
        let scale = self.source.total_mass().max(self.target.total_mass()).max(f64::MIN_POSITIVE);
        rows.iter().chain(&cols).fold(0.0_f64, |a, r| a.max(r.abs())) / scale
    }

    /// Plan with source and target exchanged.
    pub fn reversed(&self) -> Self {
        Self {
            source: self.target.clone(),
            target: self.source.clone(),
            entries: self.entries.iter().map(|e| PlanEntry { i: e.j, j: e.i, mass: e.mass }).collect(),
            certificate: self.certificate,
        }
    }

    /// Writes `i,j,mass` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["i", "j", "mass"]).map_err(|e| Error::Serde(e.to_string()))?;
        for e in &self.entries {
            wr.write_record([e.i.to_string(), e.j.to_string(), e.mass.to_string()]).map_err(|e| Error::Serde(e.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    }

    /// JSON header accompanying the CSV body.
    pub fn header_json(&self, c: &CostSpec) -> serde_json::Value {
        serde_json::json!({
            "cost_spec": c,
            "total_cost": self.cost(c),
            "n_source": self.source.len(),
            "n_target": self.target.len(),
            "n_entries": self.entries.len(),
            "dual_certificate_norm": self.certificate.map(|c| c.norm()),
        })
    }
}

fn check_masses(lambda: &DiscreteMeasure, mu: &DiscreteMeasure) -> Result<f64> {
    if lambda.dim != mu.dim {
        return Err(Error::invalid("measures live in different dimensions"));
    }
    let (a, b) = (lambda.total_mass(), mu.total_mass());
    if a == 0.0 && b == 0.0 {
        return Ok(1.0);
    }
    if (a - b).abs() > MASS_TOLERANCE * a.max(b) {
        return Err(Error::invalid(format!("mass mismatch: {a} vs {b}")));
    }
    Ok(a / b)
}

/// Optimal plan for `int c(x - y) d pi` by network simplex.
///
/// Target weights are rescaled when the masses agree to `1e-9` relative.
/// Zero-weight atoms are dropped before solving and flows below `1e-15`
/// of the total mass are discarded.
pub fn solve_exact(lambda: &DiscreteMeasure, mu: &DiscreteMeasure, c: &CostSpec) -> Result<TransportPlan> {
    let s = check_masses(lambda, mu)?;
    let target = if s == 1.0 { mu.clone() } else { mu.scaled(s) };
    let rows: Vec<usize> = (0..lambda.len()).filter(|&i| lambda.weights[i] > 0.0).collect();
    let cols: Vec<usize> = (0..target.len()).filter(|&j| target.weights[j] > 0.0).collect();
    let (n, m) = (rows.len(), cols.len());
    if n == 0 || m == 0 {
        return Ok(TransportPlan {
            source: lambda.clone(),
            target,
            entries: vec![],
            certificate: Some(Certificate { dual_violation: 0.0, duality_gap: 0.0, pivots: 0 }),
        });
    }
    if n.saturating_mul(m) > MAX_COST_ENTRIES {
        return Err(Error::invalid(format!("cost matrix {n} x {m} exceeds {MAX_COST_ENTRIES} entries")));
    }
    let mut cost = Vec::with_capacity(n * m);
    for &i in &rows {
        let x = lambda.points[i];
        for &j in &cols {
            cost.push(c.eval(crate::geom::sub(x, target.points[j])));
        }
    }
    let supply: Vec<f64> = rows.iter().map(|&i| lambda.weights[i]).collect();
    let demand: Vec<f64> = cols.iter().map(|&j| target.weights[j]).collect();
    let problem = simplex::Transportation { n, m, cost: &cost, supply: &supply, demand: &demand };
    let max_pivots = 200 * (n + m) * ((n + m) as f64).log2().ceil().max(1.0) as usize + 10_000;
    let sol = problem.solve(max_pivots)?;

    let total = lambda.total_mass();
    let drop = 1e-15 * total;
    let entries: Vec<PlanEntry> =
        sol.flows.iter().filter(|f| f.2 > drop).map(|&(a, b, f)| PlanEntry { i: rows[a], j: cols[b], mass: f }).collect();

    let max_c = cost.iter().fold(0.0_f64, |a, &v| a.max(v));
    let mut viol = 0.0_f64;
    for a in 0..n {
        for b in 0..m {
            viol = viol.max(sol.u[a] + sol.v[b] - cost[a * m + b]);
        }
    }
    let primal: f64 = sol.flows.iter().map(|&(a, b, f)| f * cost[a * m + b]).sum();
    let dual: f64 = supply.iter().zip(&sol.u).map(|(s, u)| s * u).sum::<f64>() + demand.iter().zip(&sol.v).map(|(d, v)| d * v).sum::<f64>();
    let scale = 1.0 + primal.abs() + total * max_c;
    let certificate = Certificate {
        dual_violation: viol.max(0.0) / (1.0 + max_c),
        duality_gap: (primal - dual).abs() / scale,
        pivots: sol.pivots,
    };
    if sol.artificial_flow > 1e-9 * total.max(1.0) {
        return Err(Error::numerical("artificial arcs carry flow at termination", sol.artificial_flow));
    }
    Ok(TransportPlan { source: lambda.clone(), target, entries, certificate: Some(certificate) })
}

/// `W_c(lambda, mu)`.
pub fn transport_cost(lambda: &DiscreteMeasure, mu: &DiscreteMeasure, c: &CostSpec) -> Result<f64> {
    Ok(solve_exact(lambda, mu, c)?.cost(c))
}
