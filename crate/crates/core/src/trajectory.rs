//! Straight trajectories `X(t) = (1 - t) x + t y` of a plan and the boundary
//! measures they induce on spheres.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::CostSpec;
use crate::error::{Error, Result};
use crate::geom::{self, Point};
use crate::measure::{lebesgue_quadrature, mollify_boundary, radial_project, Ball, BoundaryData, DiscreteMeasure};
use crate::ot::{data_d, solve_exact, transport_cost, TransportPlan};
use crate::quadrature::Rule;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub x: Point,
    pub y: Point,
    pub mass: f64,
}

/// Entry and exit times of a trajectory through a closed ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingTimes {
    pub entry_time: f64,
    pub exit_time: f64,
}

impl Trajectory {
    pub fn new(x: Point, y: Point, mass: f64) -> Self {
        Self { x, y, mass }
    }

    pub fn at(&self, t: f64) -> Point {
        geom::lerp(self.x, self.y, t)
    }

    pub fn velocity(&self) -> Point {
        geom::sub(self.y, self.x)
    }

    /// Closest distance of the segment to the origin.
    pub fn min_norm(&self) -> f64 {
        let d = self.velocity();
        let a = geom::norm2(d);
        if a == 0.0 {
            return geom::norm(self.x);
        }
        let t = (-geom::dot(self.x, d) / a).clamp(0.0, 1.0);
        geom::norm(self.at(t))
    }

    pub fn max_norm(&self) -> f64 {
        geom::norm(self.x).max(geom::norm(self.y))
    }

    /// Whether the segment meets the sphere `|z| = radius`.
    pub fn meets_sphere(&self, radius: f64) -> bool {
        self.min_norm() <= radius && radius <= self.max_norm()
    }
}

/// First and last time in `[0, 1]` at which `X(t)` lies in the closed ball
/// of radius `radius`; `None` if the segment misses it.
pub fn crossing_times(traj: &Trajectory, radius: f64) -> Option<CrossingTimes> {
    let d = traj.velocity();
    let a = geom::norm2(d);
    let b = 2.0 * geom::dot(traj.x, d);
    let c = geom::norm2(traj.x) - radius * radius;
    if a == 0.0 {
        return (c <= 0.0).then_some(CrossingTimes { entry_time: 0.0, exit_time: 1.0 });
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    let (mut t1, mut t2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    if t1 > t2 {
        std::mem::swap(&mut t1, &mut t2);
    }
    let (lo, hi) = (t1.max(0.0), t2.min(1.0));
    if lo > hi {
        return None;
    }
    Some(CrossingTimes { entry_time: lo, exit_time: hi })
}

/// Entries whose trajectory meets the closed ball `B_R`, with their times.
pub fn omega(plan: &TransportPlan, radius: f64) -> Vec<(usize, Trajectory, CrossingTimes)> {
    plan.entries
        .iter()
        .enumerate()
        .filter_map(|(k, e)| {
            let t = Trajectory::new(plan.source.points[e.i], plan.target.points[e.j], e.mass);
            crossing_times(&t, radius).map(|ct| (k, t, ct))
        })
        .collect()
}

/// Entry and exit atoms on the sphere: an entry contributes `X(entry)` to `f`
/// when `|x| >= R` and `X(exit)` to `g` when `|y| >= R`.
pub fn entry_exit_atoms(plan: &TransportPlan, radius: f64) -> (DiscreteMeasure, DiscreteMeasure) {
    let dim = plan.dim();
    let mut f = DiscreteMeasure::empty(dim);
    let mut g = DiscreteMeasure::empty(dim);
    for (_, t, ct) in omega(plan, radius) {
        if geom::norm(t.x) >= radius {
            f.push(snap(t.at(ct.entry_time), radius), t.mass);
        }
        if geom::norm(t.y) >= radius {
            g.push(snap(t.at(ct.exit_time), radius), t.mass);
        }
    }
    (f, g)
}

/// Moves a point computed to lie on the sphere exactly onto it.
fn snap(z: Point, radius: f64) -> Point {
    let r = geom::norm(z);
    if r == 0.0 {
        z
    } else {
        geom::scale(radius / r, z)
    }
}

/// `f_R` and `g_R` binned on the sphere.
pub fn entry_exit_measures(plan: &TransportPlan, radius: f64, n_theta: usize) -> Result<(BoundaryData, BoundaryData)> {
    let (f, g) = entry_exit_atoms(plan, radius);
    Ok((radial_project(&f, radius, n_theta)?, radial_project(&g, radius, n_theta)?))
}

/// Optimal plans from `lambda|B_4` and `mu|B_4` to their uniform
/// redistributions, stored as per-atom disintegrations.
#[derive(Debug, Clone)]
pub struct AuxiliaryPlans {
    pub radius: f64,
    pub kappa_lambda: f64,
    pub kappa_mu: f64,
    /// For each `lambda` atom, its image points and the fraction of its mass sent there.
    pub lambda_kernel: Vec<Vec<(usize, f64)>>,
    pub mu_kernel: Vec<Vec<(usize, f64)>>,
    /// Quadrature cells (points, masses after scaling by kappa) of each side.
    pub lambda_cells: DiscreteMeasure,
    pub mu_cells: DiscreteMeasure,
    pub w_lambda: f64,
    pub w_mu: f64,
}

fn disintegrate(nu: &DiscreteMeasure, radius: f64, c: &CostSpec, resolution: usize) -> Result<(f64, Vec<Vec<(usize, f64)>>, DiscreteMeasure, f64)> {
    let ball = Ball::centered(radius);
    let idx: Vec<usize> = (0..nu.len()).filter(|&k| ball.contains(nu.points[k])).collect();
    let local = DiscreteMeasure {
        dim: nu.dim,
        points: idx.iter().map(|&k| nu.points[k]).collect(),
        weights: idx.iter().map(|&k| nu.weights[k]).collect(),
    };
    let kappa = local.total_mass() / ball.volume(nu.dim);
    if kappa <= 0.0 {
        return Err(Error::invalid(format!("no mass inside B_{radius}")));
    }
    let cells = lebesgue_quadrature(&ball, nu.dim, resolution)?.scaled(kappa);
    let plan = solve_exact(&local, &cells, c)?;
    let mut kernel = vec![Vec::new(); nu.len()];
    for e in &plan.entries {
        let k = idx[e.i];
        kernel[k].push((e.j, e.mass / nu.weights[k]));
    }
    let w = plan.cost(c);
    Ok((kappa, kernel, plan.target, w))
}

impl AuxiliaryPlans {
    pub fn new(lambda: &DiscreteMeasure, mu: &DiscreteMeasure, c: &CostSpec, radius: f64, resolution: usize) -> Result<Self> {
        let (l, m) = rayon::join(|| disintegrate(lambda, radius, c, resolution), || disintegrate(mu, radius, c, resolution));
        let (kappa_lambda, lambda_kernel, lambda_cells, w_lambda) = l?;
        let (kappa_mu, mu_kernel, mu_cells, w_mu) = m?;
        Ok(Self { radius, kappa_lambda, kappa_mu, lambda_kernel, mu_kernel, lambda_cells, mu_cells, w_lambda, w_mu })
    }
}

/// Approximations of `f_R` and `g_R` by bin densities on the sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryApproximation {
    pub radius: f64,
    /// Radial projections of the extended endpoint distributions.
    pub f_projected: BoundaryData,
    pub g_projected: BoundaryData,
    /// The same after mollification.
    pub f_bar: BoundaryData,
    pub g_bar: BoundaryData,
    /// Largest ratio of extended endpoint mass to uniform cell mass.
    pub f_density_ratio: f64,
    pub g_density_ratio: f64,
}

/// Extends trajectories past their endpoint through the auxiliary plan and
/// radially projects the extended endpoints onto the sphere.
///
/// On the exit side each trajectory leaving through `dB_R` continues from `y`
/// to the points `z` that the auxiliary plan sends `y` to, splitting its mass
/// in proportion to the plan. Endpoints outside `B_4` continue with `z = y`.
/// The entry side runs the same construction backwards from `x`.
pub fn approximate_boundary_data(plan: &TransportPlan, aux: &AuxiliaryPlans, radius: f64, n_theta: usize, mollify: f64) -> Result<BoundaryApproximation> {
    let dim = plan.dim();
    let mut f_cells = vec![0.0; aux.lambda_cells.len()];
    let mut g_cells = vec![0.0; aux.mu_cells.len()];
    let mut f_out = DiscreteMeasure::empty(dim);
    let mut g_out = DiscreteMeasure::empty(dim);
    for (k, t, _) in omega(plan, radius) {
        let e = plan.entries[k];
        if geom::norm(t.x) >= radius {
            let ker = &aux.lambda_kernel[e.i];
            if ker.is_empty() {
                f_out.push(t.x, t.mass);
            }
            for &(c, frac) in ker {
                f_cells[c] += t.mass * frac;
            }
        }
        if geom::norm(t.y) >= radius {
            let ker = &aux.mu_kernel[e.j];
            if ker.is_empty() {
                g_out.push(t.y, t.mass);
            }
            for &(c, frac) in ker {
                g_cells[c] += t.mass * frac;
            }
        }
    }
    let ratio = |cells: &[f64], q: &DiscreteMeasure| cells.iter().zip(&q.weights).fold(0.0_f64, |a, (m, w)| a.max(m / w));
    let f_density_ratio = ratio(&f_cells, &aux.lambda_cells);
    let g_density_ratio = ratio(&g_cells, &aux.mu_cells);
    let collect = |cells: &[f64], q: &DiscreteMeasure, outside: DiscreteMeasure| {
        let mut m = outside;
        for (k, &w) in cells.iter().enumerate() {
            if w > 0.0 {
                m.push(q.points[k], w);
            }
        }
        m
    };
    let f_prime = collect(&f_cells, &aux.lambda_cells, f_out);
    let g_prime = collect(&g_cells, &aux.mu_cells, g_out);
    let f_projected = radial_project(&f_prime, radius, n_theta)?;
    let g_projected = radial_project(&g_prime, radius, n_theta)?;
    let f_bar = mollify_boundary(&f_projected, mollify)?;
    let g_bar = mollify_boundary(&g_projected, mollify)?;
    Ok(BoundaryApproximation { radius, f_projected, g_projected, f_bar, g_bar, f_density_ratio, g_density_ratio })
}

/// `W_c(f_R, f_bar) + W_c(g_R, g_bar)` with the bin densities read as atoms
/// at the bin centres.
pub fn boundary_approximation_cost(plan: &TransportPlan, approx: &BoundaryApproximation, c: &CostSpec) -> Result<f64> {
    let (f, g) = entry_exit_atoms(plan, approx.radius);
    let wf = if f.is_empty() { 0.0 } else { transport_cost(&f, &approx.f_bar.to_measure(), c)? };
    let wg = if g.is_empty() { 0.0 } else { transport_cost(&g, &approx.g_bar.to_measure(), c)? };
    Ok(wf + wg)
}

/// Total cost of trajectories meeting the sphere `dB_R`.
pub fn crossing_cost(plan: &TransportPlan, radius: f64, c: &CostSpec) -> f64 {
    plan.trajectories().iter().filter(|t| t.meets_sphere(radius)).fold(0.0, |acc, t| acc + t.mass * c.eval(t.velocity()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusScore {
    pub radius: f64,
    pub crossing_cost: f64,
    pub d_r: f64,
    pub boundary_lp: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusSelection {
    pub selected: f64,
    pub scores: Vec<RadiusScore>,
}

impl RadiusSelection {
    pub fn selected_score(&self) -> &RadiusScore {
        self.scores.iter().find(|s| s.radius == self.selected).expect("selected radius is a candidate")
    }

    pub fn mean_score(&self) -> f64 {
        self.scores.iter().map(|s| s.score).sum::<f64>() / self.scores.len() as f64
    }

    /// `R,crossing_cost,D_R,boundary_lp,score` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("R,crossing_cost,D_R,boundary_lp,score\n");
        for r in &self.scores {
            s.push_str(&format!("{},{},{},{},{}\n", r.radius, r.crossing_cost, r.d_r, r.boundary_lp, r.score));
        }
        s
    }
}

/// The default radius candidates: 11 equispaced points in `[2.05, 2.95]`.
pub fn default_candidates() -> Vec<f64> {
    (0..11).map(|k| 2.05 + 0.09 * k as f64).collect()
}

/// Settings shared by the radius scan.
#[derive(Debug, Clone, Copy)]
pub struct RadiusScan {
    pub n_theta: usize,
    /// Mollification half-width in radians.
    pub mollify: f64,
    pub resolution: usize,
}

/// Scores each candidate by `crossing_cost / |B_R| + D(R) + int (f_bar^p + g_bar^p)`
/// and returns the minimiser; ties go to the smaller radius.
pub fn select_radius(
    plan: &TransportPlan,
    lambda: &DiscreteMeasure,
    mu: &DiscreteMeasure,
    c: &CostSpec,
    aux: &AuxiliaryPlans,
    candidates: &[f64],
    scan: RadiusScan,
) -> Result<RadiusSelection> {
    if candidates.len() < 3 {
        return Err(Error::invalid("radius selection needs at least 3 candidates"));
    }
    let dim = plan.dim();
    let scores: Vec<RadiusScore> = candidates
        .par_iter()
        .map(|&r| -> Result<RadiusScore> {
            let vol = Ball::centered(r).volume(dim);
            let cc = crossing_cost(plan, r, c) / vol;
            let d_r = data_d(lambda, mu, r, c, scan.resolution)?;
            let approx = approximate_boundary_data(plan, aux, r, scan.n_theta, scan.mollify)?;
            let lp = approx.f_bar.lp_norm_pow(c.p) + approx.g_bar.lp_norm_pow(c.p);
            Ok(RadiusScore { radius: r, crossing_cost: cc, d_r, boundary_lp: lp, score: cc + d_r + lp })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (k, s) in scores.iter().enumerate() {
        let b = &scores[best];
        if s.score < b.score || (s.score == b.score && s.radius < b.radius) {
            best = k;
        }
    }
    Ok(RadiusSelection { selected: scores[best].radius, scores })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinftyReport {
    pub sup_disp: f64,
    pub exponent: f64,
    /// `sup_disp / (E(4) + D(4))^(1/(p+d))`.
    pub bound_check: f64,
    /// Every entry touching `B_3` stays inside `B_4`.
    pub stays_in_b4: bool,
}

/// Largest displacement over entries with an endpoint in `B_3`, compared with
/// `(E(4) + D(4))^(1/(p+d))`.
pub fn linfty_displacement(plan: &TransportPlan, p: f64, e4_plus_d4: f64) -> LinftyReport {
    let b3 = Ball::centered(3.0);
    let mut sup = 0.0_f64;
    let mut inside = true;
    for (x, y, _) in plan.triples() {
        if b3.contains(x) || b3.contains(y) {
            sup = sup.max(geom::dist(x, y));
            // The segment is convex, so it stays in B_4 iff both ends do.
            inside &= geom::norm(x).max(geom::norm(y)) < 4.0;
        }
    }
    let exponent = 1.0 / (p + plan.dim() as f64);
    let denom = e4_plus_d4.powf(exponent);
    let bound_check = if sup == 0.0 { 0.0 } else { sup / denom };
    LinftyReport { sup_disp: sup, exponent, bound_check, stays_in_b4: inside }
}

/// Gauss-Legendre approximation of `int_{t0}^{t1} h(X(t)) dt`.
pub fn path_integral(traj: &Trajectory, h: impl Fn(Point) -> Result<f64>, t0: f64, t1: f64, order: usize) -> Result<f64> {
    if !(0.0 <= t0 && t0 <= t1 && t1 <= 1.0) {
        return Err(Error::invalid(format!("interval [{t0}, {t1}] not inside [0, 1]")));
    }
    let rule = Rule::new(order);
    let mut total = 0.0;
    for (t, w) in rule.on(t0, t1) {
        total += w * h(traj.at(t))?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::PlanEntry;
    use approx::assert_relative_eq;

    fn plan_of(pairs: &[(Point, Point, f64)]) -> TransportPlan {
        let src = DiscreteMeasure::new(2, pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.2).collect()).unwrap();
        let tgt = DiscreteMeasure::new(2, pairs.iter().map(|p| p.1).collect(), pairs.iter().map(|p| p.2).collect()).unwrap();
        let entries = (0..pairs.len()).map(|k| PlanEntry { i: k, j: k, mass: pairs[k].2 }).collect();
        TransportPlan::new(src, tgt, entries).unwrap()
    }

    #[test]
    fn crossing_examples() {
        let ct = crossing_times(&Trajectory::new([3.0, 0.0], [0.0, 0.0], 1.0), 2.0).unwrap();
        assert_relative_eq!(ct.entry_time, 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(ct.exit_time, 1.0);
        let ct = crossing_times(&Trajectory::new([0.5, 0.1], [-1.0, 0.3], 1.0), 2.0).unwrap();
        assert_eq!((ct.entry_time, ct.exit_time), (0.0, 1.0));
        assert!(crossing_times(&Trajectory::new([3.0, 0.0], [3.0, 1.0], 1.0), 2.0).is_none());
        assert!(crossing_times(&Trajectory::new([3.0, 0.0], [3.0, 0.0], 1.0), 2.0).is_none());
        let ct = crossing_times(&Trajectory::new([1.0, 1.0], [1.0, 1.0], 1.0), 2.0).unwrap();
        assert_eq!((ct.entry_time, ct.exit_time), (0.0, 1.0));
    }

    #[test]
    fn crossing_points_lie_on_the_sphere() {
        let t = Trajectory::new([-3.0, 0.4], [2.7, -0.9], 1.0);
        let ct = crossing_times(&t, 2.0).unwrap();
        assert!((geom::norm(t.at(ct.entry_time)) - 2.0).abs() < 1e-10);
        assert!((geom::norm(t.at(ct.exit_time)) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn entry_exit_examples() {
        let plan = plan_of(&[([3.0, 0.0], [0.0, 0.0], 1.0)]);
        let (f, g) = entry_exit_atoms(&plan, 2.0);
        assert_eq!(f.points, vec![[2.0, 0.0]]);
        assert_eq!(f.weights, vec![1.0]);
        assert!(g.is_empty());
        let plan = plan_of(&[([0.1, 0.0], [0.0, 0.5], 1.0)]);
        let (f, g) = entry_exit_atoms(&plan, 2.0);
        assert!(f.is_empty() && g.is_empty());
        let plan = plan_of(&[([3.0, 0.0], [0.0, 0.0], 1.0), ([0.5, 0.5], [-2.5, 1.0], 2.0)]);
        let (f, g) = entry_exit_atoms(&plan, 2.0);
        let (fr, gr) = entry_exit_atoms(&plan.reversed(), 2.0);
        for (a, b) in [(&f, &gr), (&g, &fr)] {
            assert_eq!(a.weights, b.weights);
            for (p, q) in a.points.iter().zip(&b.points) {
                assert!(geom::dist(*p, *q) < 1e-12);
            }
        }
    }

    #[test]
    fn path_integral_examples() {
        let one = |_: Point| Ok(1.0);
        let t = Trajectory::new([0.0, 0.0], [1.0, 0.0], 1.0);
        assert_relative_eq!(path_integral(&t, one, 0.2, 0.7, 8).unwrap(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(path_integral(&t, |x| Ok(x[0]), 0.0, 1.0, 8).unwrap(), 0.5, epsilon = 1e-15);
        let t = Trajectory::new([1.0, 0.0], [-1.0, 0.0], 1.0);
        assert_relative_eq!(path_integral(&t, |x| Ok(geom::norm2(x)), 0.0, 1.0, 8).unwrap(), 1.0 / 3.0, epsilon = 1e-14);
        assert!(path_integral(&t, one, 0.5, 1.2, 8).is_err());
    }

    #[test]
    fn linfty_identity_is_zero() {
        let m = lebesgue_quadrature(&Ball::centered(4.0), 2, 8).unwrap();
        let r = linfty_displacement(&TransportPlan::identity(&m), 2.0, 0.1);
        assert_eq!(r.sup_disp, 0.0);
        assert_relative_eq!(r.exponent, 0.25);
        assert!(r.stays_in_b4);
    }

    #[test]
    fn selection_prefers_radii_without_crossings() {
        // One heavy trajectory crossing only radii below 2.45; everything else static.
        let q = lebesgue_quadrature(&Ball::centered(4.0), 2, 10).unwrap();
        let c = CostSpec::radial(2.0, 2.0).unwrap();
        let mut pairs: Vec<(Point, Point, f64)> = q.iter().map(|(x, w)| (x, x, w)).collect();
        pairs.push(([2.45, 0.0], [-2.45, 0.0], 1.0));
        let plan = plan_of(&pairs);
        let aux = AuxiliaryPlans::new(&plan.source, &plan.target, &c, 4.0, 10).unwrap();
        let scan = RadiusScan { n_theta: 32, mollify: 4.0 * std::f64::consts::TAU / 32.0, resolution: 12 };
        let sel = select_radius(&plan, &plan.source, &plan.target, &c, &aux, &default_candidates(), scan).unwrap();
        assert!(sel.selected > 2.45, "{sel:?}");
        assert_eq!(sel.selected_score().crossing_cost, 0.0);
        assert!(sel.selected_score().score <= sel.mean_score());
    }
}
