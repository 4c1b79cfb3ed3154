use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mesh::DiskMesh;
use super::solve::{NeumannProblem, ScalarField};
use crate::cost::CostSpec;
use crate::error::Result;
use crate::geom::{self, Point};
use crate::measure::Ball;

/// Hölder exponent used for seminorm reporting.
pub const BETA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffSample {
    pub r: f64,
    /// `int |D phi - D phi^r|^{p'}`.
    pub diff_energy: f64,
    /// `diff_energy / (r^s int |g|^p)` with the fitted `s`.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    /// `int |g|^p`.
    pub g_lp_pow: f64,
    /// `int |D phi|^{p'}`.
    pub energy: f64,
    /// `int c(grad c*(D phi))`.
    pub alternative_energy: f64,
    /// `sup_{B_r} |D phi|^{p'}`.
    pub interior_sup: f64,
    pub interior_radius: f64,
    pub energy_ratio: Option<f64>,
    pub alternative_energy_ratio: Option<f64>,
    pub interior_ratio: Option<f64>,
    pub diff: Vec<DiffSample>,
    /// Slope of `log diff_energy` against `log r`.
    pub fitted_s: Option<f64>,
    pub beta: f64,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

/// `int_{B_R} |D a - D b|^{q}` over the mesh.
pub fn gradient_distance_pow(mesh: &DiskMesh, a: &ScalarField, b: &ScalarField, q: f64) -> f64 {
    (0..mesh.triangles.len())
        .map(|t| mesh.area(t) * geom::norm(geom::sub(mesh.gradient(&a.values, t), mesh.gradient(&b.values, t))).powf(q))
        .sum()
}

/// Energy, interior and stability ratios for a solved problem and a ladder
/// of solutions with mollified data.
pub fn regularity_diagnostics(prob: &NeumannProblem, phi: &ScalarField, ladder: &[(f64, ScalarField)]) -> Result<DiagnosticsReport> {
    let mesh = &prob.mesh;
    let c = &prob.cost;
    let q = c.p_dual();
    let interior_radius = mesh.radius - 0.5;
    let (mut energy, mut alternative_energy, mut interior_sup) = (0.0, 0.0, 0.0_f64);
    for t in 0..mesh.triangles.len() {
        let d = mesh.gradient(&phi.values, t);
        let a = mesh.area(t);
        let s = geom::norm(d).powf(q);
        energy += a * s;
        alternative_energy += a * c.try_eval(c.try_dual_grad(d)?)?;
        if geom::norm(mesh.centroid(t)) < interior_radius {
            interior_sup = interior_sup.max(s);
        }
    }
    let g = prob.g_lp_pow;
    let raw: Vec<(f64, f64)> = ladder.iter().map(|(r, phi_r)| (*r, gradient_distance_pow(mesh, phi, phi_r, q))).collect();
    let usable: Vec<(f64, f64)> = raw.iter().filter(|(r, d)| *r > 0.0 && *d > 0.0).copied().collect();
    let fitted_s = if usable.len() >= 2 {
        let xs: Vec<f64> = usable.iter().map(|(r, _)| r.ln()).collect();
        let ys: Vec<f64> = usable.iter().map(|(_, d)| d.ln()).collect();
        geom::fit_slope(&xs, &ys)
    } else {
        None
    };
    let diff = raw
        .iter()
        .map(|&(r, d)| DiffSample { r, diff_energy: d, ratio: fitted_s.and_then(|s| ratio(d, r.powf(s) * g)) })
        .collect();
    Ok(DiagnosticsReport {
        g_lp_pow: g,
        energy,
        alternative_energy,
        interior_sup,
        interior_radius,
        energy_ratio: ratio(energy, g),
        alternative_energy_ratio: ratio(alternative_energy, g),
        interior_ratio: ratio(interior_sup, g),
        diff,
        fitted_s,
        beta: BETA,
    })
}

/// Discrete `C^{0,beta}` seminorm of per-triangle values over centroids in
/// `ball`, using only pairs at distance at least `2h`.
pub fn holder_seminorm<V: Sync>(mesh: &DiskMesh, values: &[V], ball: &Ball, beta: f64, dist: impl Fn(&V, &V) -> f64 + Sync) -> f64 {
    let idx: Vec<usize> = (0..mesh.triangles.len()).filter(|&t| ball.contains(mesh.centroid(t))).collect();
    let pts: Vec<Point> = idx.iter().map(|&t| mesh.centroid(t)).collect();
    let min_sep = 2.0 * mesh.h;
    (0..idx.len())
        .into_par_iter()
        .map(|a| {
            let mut best = 0.0_f64;
            for b in a + 1..idx.len() {
                let r = geom::dist(pts[a], pts[b]);
                if r >= min_sep {
                    best = best.max(dist(&values[idx[a]], &values[idx[b]]) / r.powf(beta));
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderProductCheck {
    /// `[c*(D phi) + c(grad c*(D phi))]_beta`.
    pub lhs: f64,
    /// `||D phi||_inf^{p'-1} [D phi]_beta`.
    pub rhs: f64,
    pub ratio: Option<f64>,
    pub sup_gradient: f64,
    pub gradient_seminorm: f64,
    pub beta: f64,
}

/// Compares the Hölder seminorm of the energy density with the product bound.
pub fn holder_product_check(phi: &ScalarField, mesh: &DiskMesh, c: &CostSpec, ball: &Ball, beta: f64) -> Result<HolderProductCheck> {
    let grads = phi.gradients(mesh);
    let density: Vec<f64> = grads.iter().map(|&d| Ok(c.try_dual(d)? + c.try_eval(c.try_dual_grad(d)?)?)).collect::<Result<_>>()?;
    let lhs = holder_seminorm(mesh, &density, ball, beta, |a, b| (a - b).abs());
    let gradient_seminorm = holder_seminorm(mesh, &grads, ball, beta, |a, b| geom::dist(*a, *b));
    let sup_gradient = (0..grads.len()).filter(|&t| ball.contains(mesh.centroid(t))).fold(0.0_f64, |a, t| a.max(geom::norm(grads[t])));
    let rhs = sup_gradient.powf(c.p_dual() - 1.0) * gradient_seminorm;
    let scale = 1e-12 * (1.0 + sup_gradient.powf(c.p_dual()));
    let ratio = if lhs <= scale && rhs <= scale { None } else { ratio(lhs, rhs) };
    Ok(HolderProductCheck { lhs, rhs, ratio, sup_gradient, gradient_seminorm, beta })
}
