//! The convexity ledger along trajectories and the three error terms it
//! leaves on the right-hand side.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::GradientField;
use crate::cost::{v_p, CostFamily, CostSpec};
use crate::error::Result;
use crate::geom;
use crate::ot::TransportPlan;
use crate::trajectory::omega;

/// Absolute slack of the ledger inequality.
pub const LEDGER_SLACK: f64 = 1e-8;

/// Frozen constant `C` in the term budget `|B_4| (tau E_plain(4) + C D(4))`.
pub const TERM_BUDGET_C: f64 = 16.0;

/// Strong convexity constant of the first-order inequality
/// `c(x) >= c(y) + <grad c(y), x - y> + k V_p(x, y)`; letting the weight go to
/// zero in the `lambda`-convexity bound gives `k = 1 / lambda`.
pub fn convexity_constant(c: &CostSpec) -> f64 {
    1.0 / c.lambda_cap
}

#[derive(Debug, Clone, Copy, Default)]
struct Along {
    v: f64,
    pairing: f64,
    dual: f64,
    length: f64,
}

/// Per-trajectory integrals over `[sigma, tau]` with `xi = grad c*(D phi(X))`.
fn along(field: &dyn GradientField, c: &CostSpec, x: geom::Point, y: geom::Point, t0: f64, t1: f64) -> Result<Along> {
    let v = geom::sub(y, x);
    let mut out = Along::default();
    for (dt, g) in field.pieces(x, y, t0, t1) {
        let xi = c.try_dual_grad(g)?;
        out.v += dt * v_p(c.p, v, xi);
        out.pairing += dt * geom::dot(geom::sub(v, xi), g);
        out.dual += dt * c.try_eval(xi)?;
        out.length += dt;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiOrthogonalityLedger {
    pub radius: f64,
    /// `int_Omega c(x - y) dpi`.
    pub cost_omega: f64,
    /// `int_{B_R} c(grad c*(D phi)) dx`.
    pub dual_energy: f64,
    /// `int_Omega int_sigma^tau V(X', grad c*(D phi(X))) dt dpi`.
    pub lhs_v: f64,
    /// Energy gap `cost_omega - dual_energy`.
    pub term_a: f64,
    /// `-int_Omega int <X' - grad c*(D phi(X)), D phi(X)> dt dpi`.
    pub term_b: f64,
    /// `dual_energy - int_Omega int c(grad c*(D phi(X))) dt dpi`.
    pub term_c: f64,
    pub convexity_constant: f64,
    /// `a + b + c - k lhs_v`; non-negative up to the slack.
    pub margin: f64,
    pub pass: bool,
    /// Quadratic radial cost only: `a + b + c - lhs_v / 2 - int (1 - (tau - sigma)) c(X') dpi`.
    pub identity_defect: Option<f64>,
    pub n_trajectories: usize,
}

/// Evaluates the ledger for `plan` against the field on `B_R`.
pub fn quasi_orthogonality_ledger(plan: &TransportPlan, field: &dyn GradientField, c: &CostSpec) -> Result<QuasiOrthogonalityLedger> {
    let radius = field.radius();
    let traj = omega(plan, radius);
    let rows: Vec<(f64, f64, Along)> = traj
        .par_iter()
        .map(|(_, t, ct)| Ok((t.mass, c.eval(t.velocity()), along(field, c, t.x, t.y, ct.entry_time, ct.exit_time)?)))
        .collect::<Result<_>>()?;
    let dual_energy = field.integrate(&|g| c.try_eval(c.try_dual_grad(g)?))?;
    let (mut cost_omega, mut lhs_v, mut pairing, mut along_dual, mut unused) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (m, cv, a) in &rows {
        cost_omega += m * cv;
        lhs_v += m * a.v;
        pairing += m * a.pairing;
        along_dual += m * a.dual;
        unused += m * (1.0 - a.length) * cv;
    }
    let term_a = cost_omega - dual_energy;
    let term_b = -pairing;
    let term_c = dual_energy - along_dual;
    let k = convexity_constant(c);
    let margin = term_a + term_b + term_c - k * lhs_v;
    let quadratic = c.family == CostFamily::Radial && c.p == 2.0;
    let identity_defect = quadratic.then_some(term_a + term_b + term_c - 0.5 * lhs_v - unused);
    Ok(QuasiOrthogonalityLedger {
        radius,
        cost_omega,
        dual_energy,
        lhs_v,
        term_a,
        term_b,
        term_c,
        convexity_constant: k,
        margin,
        pass: margin >= -LEDGER_SLACK,
        identity_defect,
        n_trajectories: rows.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermEstimates {
    /// `int_Omega c(x - y) dpi - int_{B_R} c(grad c*(D phi^r)) dx`.
    pub energy_gap: f64,
    /// `int_Omega int <X' - grad c*(D phi^r(X)), D phi^r(X)> dt dpi`.
    pub pde_pairing: f64,
    /// `int_{B_R} c(grad c*(D phi^r)) dx - int_Omega int c(grad c*(D phi^r(X))) dt dpi`.
    pub fubini_gap: f64,
    /// `|B_4| (tau E_plain(4) + C D(4))`.
    pub budget: f64,
    pub tau: f64,
    pub budget_constant: f64,
    pub pass: bool,
}

/// The three error terms against the budget built from `E_plain(4)` and `D(4)`.
pub fn term_estimates(plan: &TransportPlan, field: &dyn GradientField, c: &CostSpec, tau: f64, e4_plain: f64, d4: f64) -> Result<TermEstimates> {
    let ledger = quasi_orthogonality_ledger(plan, field, c)?;
    Ok(terms_from_ledger(&ledger, plan.dim(), tau, e4_plain, d4))
}

pub(crate) fn terms_from_ledger(ledger: &QuasiOrthogonalityLedger, dim: usize, tau: f64, e4_plain: f64, d4: f64) -> TermEstimates {
    let vol = geom::unit_ball_volume(dim) * 4f64.powi(dim as i32);
    let budget = vol * (tau * e4_plain + TERM_BUDGET_C * d4);
    let (energy_gap, pde_pairing, fubini_gap) = (ledger.term_a, -ledger.term_b, ledger.term_c);
    let pass = [energy_gap, pde_pairing, fubini_gap].iter().all(|&t| t <= budget);
    TermEstimates { energy_gap, pde_pairing, fubini_gap, budget, tau, budget_constant: TERM_BUDGET_C, pass }
}
