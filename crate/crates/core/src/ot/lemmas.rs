//! Numerical checks of the transport inequalities used by the linearization.

use serde::{Deserialize, Serialize};

use super::smallness::local_uniform_distance;
use super::{transport_cost, DataMetric, TransportPlan};
use crate::cost::CostSpec;
use crate::error::{Error, Result};
use crate::geom::{self, Point};
use crate::measure::{lebesgue_quadrature, Ball, DiscreteMeasure};
use crate::trajectory::{entry_exit_atoms, omega};

/// Absolute slack applied to exact-cost inequalities.
pub const INEQUALITY_SLACK: f64 = 1e-9;
/// Frozen bound on `W_c(mu1, mu2) / W_c(mu1 + mu2, 2 mu2)`.
pub const ADD_CONSTANT_BOUND: f64 = 16.0;
/// Frozen bound on the data restriction ratio.
pub const DATA_RESTRICTION_BOUND: f64 = 64.0;
/// Below this `D(4)` the data restriction check compares absolute values.
pub const DATA_FLOOR: f64 = 1e-9;
/// Absolute integral accepted when `D(4)` is below [`DATA_FLOOR`].
pub const QUADRATURE_TOLERANCE: f64 = 1e-3;

/// Split parameter `t` with `t^(1-p) = 1 + eps`.
pub fn triangle_split(p: f64, eps: f64) -> f64 {
    (1.0 + eps).powf(-1.0 / (p - 1.0))
}

/// `C(eps) = (1 - t)^(1-p)` for the split `t` above.
///
/// For a `p`-homogeneous convex cost, `c(a + b) <= t^(1-p) c(a) + (1-t)^(1-p) c(b)`,
/// so gluing the two optimal plans gives the inequality with these constants.
pub fn triangle_constant(p: f64, eps: f64) -> f64 {
    (1.0 - triangle_split(p, eps)).powf(1.0 - p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangleCheck {
    pub w12: f64,
    pub w23: f64,
    pub w13: f64,
    pub eps: f64,
    pub c_used: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// `W_c(mu1, mu3) <= (1 + eps) W_c(mu1, mu2) + C(eps) W_c(mu2, mu3)`.
pub fn triangle_check(mu1: &DiscreteMeasure, mu2: &DiscreteMeasure, mu3: &DiscreteMeasure, eps: f64, c: &CostSpec) -> Result<TriangleCheck> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("eps must lie in (0, 1), got {eps}")));
    }
    let w12 = transport_cost(mu1, mu2, c)?;
    let w23 = transport_cost(mu2, mu3, c)?;
    let w13 = transport_cost(mu1, mu3, c)?;
    let c_used = triangle_constant(c.p, eps);
    let rhs = (1.0 + eps) * w12 + c_used * w23;
    Ok(TriangleCheck { w12, w23, w13, eps, c_used, lhs: w13, rhs, pass: w13 <= rhs + INEQUALITY_SLACK })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AddConstantCheck {
    pub numerator: f64,
    pub denominator: f64,
    /// `None` for the degenerate `0 / 0` case.
    pub ratio: Option<f64>,
    pub degenerate: bool,
    pub pass: bool,
}

/// `W_c(mu1, mu2) / W_c(mu1 + mu2, 2 mu2)`.
pub fn add_constant_check(mu1: &DiscreteMeasure, mu2: &DiscreteMeasure, c: &CostSpec) -> Result<AddConstantCheck> {
    let numerator = transport_cost(mu1, mu2, c)?;
    let denominator = transport_cost(&mu1.plus(mu2), &mu2.scaled(2.0), c)?;
    let scale = INEQUALITY_SLACK * (1.0 + mu1.total_mass());
    if numerator <= scale && denominator <= scale {
        return Ok(AddConstantCheck { numerator, denominator, ratio: None, degenerate: true, pass: true });
    }
    if denominator <= 0.0 {
        return Ok(AddConstantCheck { numerator, denominator, ratio: Some(f64::INFINITY), degenerate: false, pass: false });
    }
    let ratio = numerator / denominator;
    Ok(AddConstantCheck { numerator, denominator, ratio: Some(ratio), degenerate: false, pass: ratio <= ADD_CONSTANT_BOUND })
}

/// A density/flux pair on a fixed cell decomposition, sampled at the
/// midpoints of `n` equal time steps.
///
/// `rho[s][k]` is the mass of cell `k` at step `s`, `flux[s][k]` the
/// integrated flux there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EulerianPath {
    pub dt: f64,
    pub rho: Vec<Vec<f64>>,
    pub flux: Vec<Vec<Point>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionReport {
    /// `sum_s sum_k c(j / rho) rho dt`.
    pub direct: f64,
    /// Best value of `sum_s sum_k (zeta . j - c*(zeta) rho) dt` over the test family.
    pub duality: f64,
    pub n_covectors: usize,
    pub pass: bool,
}

/// Scales applied to the optimal covector field in the duality form.
const COVECTOR_SCALES: [f64; 7] = [0.0, 0.25, 0.5, 0.9, 1.0, 1.1, 2.0];

/// Action of a density/flux pair, directly and through the dual formula.
///
/// The test family consists of cellwise `s grad c(j / rho)` for a handful
/// of scales `s` together with constant covectors along the axes; every
/// member bounds the action from below by Fenchel-Young.
pub fn benamou_brenier_action(path: &EulerianPath, c: &CostSpec) -> Result<ActionReport> {
    if path.rho.len() != path.flux.len() {
        return Err(Error::invalid("density and flux have different step counts"));
    }
    let mut direct = 0.0;
    let mut optimal: Vec<Vec<Point>> = Vec::with_capacity(path.rho.len());
    for (rho, flux) in path.rho.iter().zip(&path.flux) {
        if rho.len() != flux.len() {
            return Err(Error::invalid("density and flux live on different cells"));
        }
        let mut zs = Vec::with_capacity(rho.len());
        for (&r, &j) in rho.iter().zip(flux) {
            if r < 0.0 {
                return Err(Error::invalid("negative density"));
            }
            if r == 0.0 {
                if geom::norm(j) > 0.0 {
                    return Err(Error::invalid("flux charges a cell without density"));
                }
                zs.push([0.0, 0.0]);
                continue;
            }
            let v = geom::scale(1.0 / r, j);
            direct += c.try_eval(v)? * r * path.dt;
            zs.push(c.grad(v));
        }
        optimal.push(zs);
    }
    let pairing = |zeta: &dyn Fn(usize, usize) -> Point| -> Result<f64> {
        let mut total = 0.0;
        for (s, (rho, flux)) in path.rho.iter().zip(&path.flux).enumerate() {
            for (k, (&r, &j)) in rho.iter().zip(flux).enumerate() {
                let z = zeta(s, k);
                total += (geom::dot(z, j) - c.try_dual(z)? * r) * path.dt;
            }
        }
        Ok(total)
    };
    let mut duality = f64::NEG_INFINITY;
    let mut n_covectors = 0;
    for &s in &COVECTOR_SCALES {
        duality = duality.max(pairing(&|a, k| geom::scale(s, optimal[a][k]))?);
        n_covectors += 1;
    }
    for e in [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]] {
        duality = duality.max(pairing(&|_, _| e)?);
        n_covectors += 1;
    }
    let tol = 1e-9 * (1.0 + direct.abs());
    Ok(ActionReport { direct, duality, n_covectors, pass: duality <= direct + tol })
}

/// The interpolating pair on the interior cells of a mesh:
/// `rho_t = (t kappa_mu + (1 - t) kappa_lambda) |T|` and `j_t = J_T |T|`.
///
/// The boundary parts of the density carry no flux and drop out of the
/// action, so they are omitted.
pub fn interpolating_path(areas: &[f64], flux_density: &[Point], kappa_lambda: f64, kappa_mu: f64, steps: usize) -> Result<EulerianPath> {
    if areas.len() != flux_density.len() || steps == 0 {
        return Err(Error::invalid("interpolating path needs matching cells and at least one step"));
    }
    let dt = 1.0 / steps as f64;
    let mut rho = Vec::with_capacity(steps);
    let mut flux = Vec::with_capacity(steps);
    for s in 0..steps {
        let t = (s as f64 + 0.5) * dt;
        let k = t * kappa_mu + (1.0 - t) * kappa_lambda;
        rho.push(areas.iter().map(|a| k * a).collect());
        flux.push(areas.iter().zip(flux_density).map(|(a, j)| geom::scale(*a, *j)).collect());
    }
    Ok(EulerianPath { dt, rho, flux })
}

/// A scalar field sampled at points, with a Hölder seminorm estimate.
pub trait HolderField {
    fn value(&self, x: Point) -> Result<f64>;
    /// `[xi]_{C^{0,alpha}(B_R)}`.
    fn seminorm(&self, alpha: f64, radius: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderPairingCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    pub seminorm: f64,
    pub w: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub pass: bool,
}

/// Constant `K` in `lhs <= K [xi]_alpha W^(alpha/p) R^(2d(p-alpha)/p)`.
///
/// Couple `mu` with the uniform measure optimally; then
/// `|int xi (dmu - kappa dx)| <= [xi] int |x-y|^alpha dpi` and Hölder with
/// `|z|^p <= Lambda c(z)` and mass at most `2 |B_R|` gives
/// `Lambda^(alpha/p) (2 omega_d)^(1-alpha/p) R^(d(1-alpha/p))`, which is
/// at most `K` times the stated power of `R`.
pub fn holder_pairing_constant(c: &CostSpec, alpha: f64, radius: f64, dim: usize) -> f64 {
    let q = alpha / c.p;
    let d = dim as f64;
    c.lambda_cap.powf(q) * (2.0 * geom::unit_ball_volume(dim)).powf(1.0 - q) * radius.powf(-d * (1.0 - q)).max(1.0)
}

/// Compares `int xi (dmu - kappa dx)` over `B_R` with its transport bound.
pub fn c2measures_check(
    xi: &dyn HolderField,
    mu: &DiscreteMeasure,
    radius: f64,
    alpha: f64,
    c: &CostSpec,
    resolution: usize,
) -> Result<HolderPairingCheck> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let ball = Ball::centered(radius);
    let local = mu.restrict(&ball);
    let vol = ball.volume(mu.dim);
    let ratio = local.total_mass() / vol;
    if !(0.5..=2.0).contains(&ratio) {
        return Err(Error::invalid(format!("mass ratio {ratio} outside [0.5, 2]")));
    }
    let (w, kappa) = local_uniform_distance(mu, radius, c, resolution, DataMetric::Cost)?;
    let uniform = lebesgue_quadrature(&ball, mu.dim, resolution)?.scaled(kappa);
    let mut lhs = 0.0;
    for (x, m) in local.iter() {
        lhs += m * xi.value(x)?;
    }
    for (x, m) in uniform.iter() {
        lhs -= m * xi.value(x)?;
    }
    let lhs = lhs.abs();
    let seminorm = xi.seminorm(alpha, radius);
    let d = mu.dim as f64;
    let rhs = seminorm * w.powf(alpha / c.p) * radius.powf(2.0 * d * (c.p - alpha) / c.p);
    let constant = holder_pairing_constant(c, alpha, radius, mu.dim);
    Ok(HolderPairingCheck { lhs, rhs, constant, seminorm, w, kappa, alpha, pass: lhs <= constant * rhs + INEQUALITY_SLACK })
}

/// `xi(x) = a . x + b`, with Hölder seminorm `|a| (2R)^(1-alpha)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineField {
    pub slope: Point,
    pub offset: f64,
}

impl HolderField for AffineField {
    fn value(&self, x: Point) -> Result<f64> {
        Ok(geom::dot(self.slope, x) + self.offset)
    }

    fn seminorm(&self, alpha: f64, radius: f64) -> f64 {
        geom::norm(self.slope) * (2.0 * radius).powf(1.0 - alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalisationCheck {
    pub lhs: f64,
    pub w_local: f64,
    pub rhs: f64,
    pub delta: f64,
    pub tau: f64,
    pub n_crossing: usize,
    pub pass: bool,
}

/// `int_Omega c dpi <= (1 + delta) W_c(lambda|B_R + f_R, mu|B_R + g_R) + tau |B_4| (E + D)`.
///
/// `e_plus_d` is `E(4) + D(4)` with `E` divided by `|B_4|` only, so the
/// budget is on the scale of unnormalised cost.
pub fn localisation_check(plan: &TransportPlan, radius: f64, c: &CostSpec, delta: f64, tau: f64, e_plus_d: f64) -> Result<LocalisationCheck> {
    let ball = Ball::centered(radius);
    let paths = omega(plan, radius);
    let lhs = paths.iter().fold(0.0, |acc, (_, t, _)| acc + t.mass * c.eval(t.velocity()));
    let n_crossing = paths.iter().filter(|(_, t, _)| geom::norm(t.x) >= radius || geom::norm(t.y) >= radius).count();
    let (f, g) = entry_exit_atoms(plan, radius);
    let left = plan.source.restrict(&ball).plus(&f);
    let right = plan.target.restrict(&ball).plus(&g);
    let w_local = if left.is_empty() { 0.0 } else { transport_cost(&left, &right, c)? };
    let budget = tau * Ball::centered(4.0).volume(plan.dim()) * e_plus_d;
    let rhs = (1.0 + delta) * w_local + budget;
    Ok(LocalisationCheck { lhs, w_local, rhs, delta, tau, n_crossing, pass: lhs <= rhs + INEQUALITY_SLACK })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataRestrictionCheck {
    /// `(R, integrand)` at every radius.
    pub samples: Vec<(f64, f64)>,
    pub integral_estimate: f64,
    pub d4: f64,
    pub ratio: Option<f64>,
    pub pass: bool,
}

/// Radii of the default trapezoid rule on `[2, 3]`.
pub fn restriction_radii() -> Vec<f64> {
    (0..=10).map(|k| 2.0 + 0.1 * k as f64).collect()
}

/// Trapezoid estimate of
/// `int (W_c(mu|B_R, kappa dx|B_R) + |kappa - 1|^p / kappa) dR`
/// over `radii`, compared with the single-measure data term at radius 4.
pub fn data_restriction_check(mu: &DiscreteMeasure, c: &CostSpec, radii: &[f64], resolution: usize) -> Result<DataRestrictionCheck> {
    if radii.len() < 2 || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("radii must be increasing with at least two entries"));
    }
    let samples: Vec<(f64, f64)> = radii
        .iter()
        .map(|&r| {
            let (w, kappa) = local_uniform_distance(mu, r, c, resolution, DataMetric::Cost)?;
            Ok((r, w + (kappa - 1.0).abs().powf(c.p) / kappa))
        })
        .collect::<Result<_>>()?;
    let integral_estimate = samples.windows(2).fold(0.0, |acc, w| acc + 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1));
    let d4 = super::smallness::data_term(mu, 4.0, c, resolution, DataMetric::Cost)?;
    let (ratio, pass) = if d4 <= DATA_FLOOR {
        (None, integral_estimate <= QUADRATURE_TOLERANCE)
    } else {
        let r = integral_estimate / d4;
        (Some(r), r <= DATA_RESTRICTION_BOUND)
    };
    Ok(DataRestrictionCheck { samples, integral_estimate, d4, ratio, pass })
}
