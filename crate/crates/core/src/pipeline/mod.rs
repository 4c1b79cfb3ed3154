//! The end-to-end linearisation experiment: exact plan, radius selection,
//! boundary data, the Neumann solve, and the comparison of the plan's
//! displacement with the flux `grad c*(D phi)`.

mod field;
mod ledger;
mod study;

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

pub use field::{GradientField, LineField, MeshField};
pub use ledger::{
    convexity_constant, quasi_orthogonality_ledger, term_estimates, QuasiOrthogonalityLedger, TermEstimates, LEDGER_SLACK, TERM_BUDGET_C,
};
pub use study::{scaling_study, StudyRow, StudyTable};

use crate::cost::{v_p, CostSpec};
use crate::error::{Error, Result, StageExt};
use crate::geom;
use crate::measure::{mollify_boundary, Ball, BoundaryData, DiscreteMeasure};
use crate::ot::{data_d_with, energy_e, solve_exact, DataMetric, Normalization, TransportPlan};
use crate::pde::{solve_neumann, DiskMesh, NeumannProblem, SolveStats, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::trajectory::{
    approximate_boundary_data, boundary_approximation_cost, default_candidates, linfty_displacement, select_radius, AuxiliaryPlans, LinftyReport,
    RadiusScan, RadiusSelection,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Target mesh size of the disk mesh.
    pub mesh_h: f64,
    /// Angular bins on `dB_R`.
    pub n_theta: usize,
    /// Mollification half-width for `phi^r`, in bins.
    pub mollify_bins: f64,
    /// Upper bound on `E(4) + D(4)`.
    pub gate: f64,
    /// Ring count of the Lebesgue quadrature behind `D` and the auxiliary plans.
    pub resolution: usize,
    pub candidates: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub normalization: Normalization,
    pub metric: DataMetric,
    /// Also evaluate the main estimate with `D phi` along the whole trajectory.
    pub time_resolved: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mesh_h: 0.1,
            n_theta: 64,
            mollify_bins: 4.0,
            gate: 0.5,
            resolution: 19,
            candidates: default_candidates(),
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            normalization: Normalization::ScaleInvariant,
            metric: DataMetric::Cost,
            time_resolved: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.mesh_h > 0.0 && self.n_theta >= 4 && self.mollify_bins >= 1.0 && self.gate > 0.0 && self.resolution >= 2 && self.tol > 0.0 && self.max_iter > 0;
        if !ok {
            return Err(Error::invalid(format!("invalid pipeline configuration {self:?}")));
        }
        if self.candidates.len() < 3 || self.candidates.iter().any(|&r| !(r > 2.0 && r < 3.0)) {
            return Err(Error::invalid("radius candidates must be at least 3 values in (2, 3)"));
        }
        Ok(())
    }

    fn bin_width(&self) -> f64 {
        TAU / self.n_theta as f64
    }
}

/// Hölder-type comparison of the main left-hand side with its `V` form:
/// `lhs_main <= K lhs_v` for `p >= 2` and `lhs_main <= K lhs_v^(p/2) M^(1-p/2)`
/// for `p < 2`, where `M = int_{#_1} |y - x|^p + |grad c*(D phi(x))|^p dpi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VComparison {
    pub lhs_v: f64,
    pub moment: f64,
    /// `lambda 2^((p-2)/2)` for `p >= 2`, `lambda` otherwise.
    pub constant: f64,
    pub bound: f64,
    pub ratio: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizationReport {
    pub dim: usize,
    pub r_selected: f64,
    pub radius_selection: RadiusSelection,
    /// `E(4)` scale-invariant and plain-volume.
    pub e4: f64,
    pub e4_plain: f64,
    /// `D(4)` with `W_c` and with `W_p^p`.
    pub d4: f64,
    pub d4_power: f64,
    /// `E(4) + D(4)` under the configured normalisation and metric.
    pub gate_value: f64,
    pub gate: f64,
    pub tau_tolerance: f64,
    /// `int_{#_1} c(y - x - grad c*(D phi(x))) dpi`.
    pub lhs_main: f64,
    /// The same with the mollified-data solution.
    pub lhs_main_mollified: f64,
    pub lhs_main_time_resolved: Option<f64>,
    pub n_sharp_1: usize,
    /// Entries of `#_1` whose source lies off the mesh.
    pub n_extrapolated: usize,
    /// Ledger `V` term for `phi^r`.
    pub lhs_v: f64,
    pub v_comparison: VComparison,
    pub ledger: QuasiOrthogonalityLedger,
    pub term_estimates: TermEstimates,
    /// `sup_{B_1} |D phi|^{p'}`.
    pub sup_gradient: f64,
    /// `int_{B_R} |D phi|^{p'}`.
    pub energy_gradient: f64,
    /// `(sup_gradient + energy_gradient) / gate_value`.
    pub gradient_ratio: Option<f64>,
    pub linfty: LinftyReport,
    /// `W_c(f_R, f_bar) + W_c(g_R, g_bar)`.
    pub boundary_cost: f64,
    pub c_r: f64,
    pub mollify_scale: f64,
    pub solve: Option<SolveStats>,
    pub solve_mollified: Option<SolveStats>,
}

fn positive_ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

struct MainTerms {
    lhs: f64,
    n: usize,
    extrapolated: usize,
    v: f64,
    moment: f64,
    time_resolved: Option<f64>,
}

/// Sums over entries with source or target in `B_1`, with `D phi` taken at the source.
fn main_terms(plan: &TransportPlan, field: &dyn GradientField, c: &CostSpec, time_resolved: bool) -> Result<MainTerms> {
    let b1 = Ball::centered(1.0);
    let mut out = MainTerms { lhs: 0.0, n: 0, extrapolated: 0, v: 0.0, moment: 0.0, time_resolved: time_resolved.then_some(0.0) };
    for (x, y, m) in plan.triples() {
        if !(b1.contains(x) || b1.contains(y)) {
            continue;
        }
        let v = geom::sub(y, x);
        let (g, off) = field.gradient(x);
        let xi = c.try_dual_grad(g)?;
        out.lhs += m * c.try_eval(geom::sub(v, xi))?;
        out.v += m * v_p(c.p, v, xi);
        out.moment += m * (geom::norm(v).powf(c.p) + geom::norm(xi).powf(c.p));
        out.n += 1;
        out.extrapolated += usize::from(off);
        if let Some(acc) = out.time_resolved.as_mut() {
            for (dt, g) in field.pieces(x, y, 0.0, 1.0) {
                *acc += m * dt * c.try_eval(geom::sub(v, c.try_dual_grad(g)?))?;
            }
        }
    }
    Ok(out)
}

fn v_comparison(lhs_main: f64, t: &MainTerms, c: &CostSpec) -> VComparison {
    let p = c.p;
    let (constant, bound) = if p >= 2.0 {
        let k = c.lambda_cap * 2f64.powf(0.5 * (p - 2.0));
        (k, k * t.v)
    } else {
        let k = c.lambda_cap;
        (k, k * t.v.powf(0.5 * p) * t.moment.powf(1.0 - 0.5 * p))
    };
    let ratio = if lhs_main == 0.0 && bound == 0.0 { None } else { positive_ratio(lhs_main, bound) };
    VComparison { lhs_v: t.v, moment: t.moment, constant, bound, ratio, pass: lhs_main <= bound * (1.0 + 1e-12) }
}

/// Runs the experiment for `lambda`, `mu`; fails with [`Error::Gate`] when
/// `E(4) + D(4)` exceeds the configured gate.
pub fn run_linearization(lambda: &DiscreteMeasure, mu: &DiscreteMeasure, c: &CostSpec, tau: f64, config: &PipelineConfig) -> Result<LinearizationReport> {
    config.validate()?;
    c.validate()?;
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("tau = {tau} must be positive")));
    }
    let dim = lambda.dim;
    let plan = solve_exact(lambda, mu, c).stage("solve_exact")?;
    let e4 = energy_e(&plan, 4.0, c, Normalization::ScaleInvariant);
    let e4_plain = energy_e(&plan, 4.0, c, Normalization::PlainVolume);
    let (d4, d4_power) = rayon::join(
        || data_d_with(lambda, mu, 4.0, c, config.resolution, DataMetric::Cost),
        || data_d_with(lambda, mu, 4.0, c, config.resolution, DataMetric::PowerP),
    );
    let (d4, d4_power) = (d4.stage("data_term")?, d4_power.stage("data_term")?);
    let e_sel = match config.normalization {
        Normalization::ScaleInvariant => e4,
        Normalization::PlainVolume => e4_plain,
    };
    let d_sel = match config.metric {
        DataMetric::Cost => d4,
        DataMetric::PowerP => d4_power,
    };
    let gate_value = e_sel + d_sel;
    if gate_value > config.gate {
        return Err(Error::Gate { value: gate_value, gate: config.gate, e4: e_sel, d4: d_sel });
    }

    let aux = AuxiliaryPlans::new(lambda, mu, c, 4.0, config.resolution).stage("auxiliary_plans")?;
    let scan = RadiusScan { n_theta: config.n_theta, mollify: config.bin_width(), resolution: config.resolution };
    let selection = select_radius(&plan, lambda, mu, c, &aux, &config.candidates, scan).stage("select_radius")?;
    let radius = selection.selected;
    let approx = approximate_boundary_data(&plan, &aux, radius, config.n_theta, config.bin_width()).stage("boundary_data")?;
    let boundary_cost = boundary_approximation_cost(&plan, &approx, c).stage("boundary_data")?;
    let data = approx.g_bar.minus(&approx.f_bar)?;
    let mollify_scale = config.mollify_bins * config.bin_width();
    let data_r = mollify_boundary(&data, mollify_scale).stage("boundary_data")?;

    let parts = if dim == 1 {
        let f = LineField::new(&data, *c)?;
        let f_r = LineField::new(&data_r, *c)?;
        evaluate(&plan, &f, &f_r, c, config, tau, e4_plain, d4)?.with(f.c_r, None, None)
    } else {
        let mesh = DiskMesh::build(radius, config.mesh_h).stage("mesh")?;
        let solve = |d: &BoundaryData| -> Result<(f64, crate::pde::ScalarField)> {
            let prob = NeumannProblem::from_boundary_data(mesh.clone(), *c, d)?;
            Ok((prob.c_r, solve_neumann(&prob, config.tol, config.max_iter)?))
        };
        let (a, b) = rayon::join(|| solve(&data), || solve(&data_r));
        let ((c_r, phi), (_, phi_r)) = (a.stage("solve_neumann")?, b.stage("solve_neumann")?);
        let f = MeshField { mesh: &mesh, phi: &phi };
        let f_r = MeshField { mesh: &mesh, phi: &phi_r };
        evaluate(&plan, &f, &f_r, c, config, tau, e4_plain, d4)?.with(c_r, phi.stats.clone(), phi_r.stats.clone())
    };
    let linfty = linfty_displacement(&plan, c.p, gate_value);
    Ok(LinearizationReport {
        dim,
        r_selected: radius,
        radius_selection: selection,
        e4,
        e4_plain,
        d4,
        d4_power,
        gate_value,
        gate: config.gate,
        tau_tolerance: tau,
        lhs_main: parts.main.lhs,
        lhs_main_mollified: parts.lhs_main_mollified,
        lhs_main_time_resolved: parts.main.time_resolved,
        n_sharp_1: parts.main.n,
        n_extrapolated: parts.main.extrapolated,
        lhs_v: parts.ledger.lhs_v,
        v_comparison: v_comparison(parts.main.lhs, &parts.main, c),
        term_estimates: parts.terms,
        ledger: parts.ledger,
        sup_gradient: parts.sup_gradient,
        energy_gradient: parts.energy_gradient,
        gradient_ratio: positive_ratio(parts.sup_gradient + parts.energy_gradient, gate_value),
        linfty,
        boundary_cost,
        c_r: parts.c_r,
        mollify_scale,
        solve: parts.solve,
        solve_mollified: parts.solve_mollified,
    })
}

struct Parts {
    main: MainTerms,
    lhs_main_mollified: f64,
    ledger: QuasiOrthogonalityLedger,
    terms: TermEstimates,
    sup_gradient: f64,
    energy_gradient: f64,
    c_r: f64,
    solve: Option<SolveStats>,
    solve_mollified: Option<SolveStats>,
}

impl Parts {
    fn with(mut self, c_r: f64, solve: Option<SolveStats>, solve_mollified: Option<SolveStats>) -> Self {
        self.c_r = c_r;
        self.solve = solve;
        self.solve_mollified = solve_mollified;
        self
    }
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    plan: &TransportPlan,
    field: &dyn GradientField,
    field_r: &dyn GradientField,
    c: &CostSpec,
    config: &PipelineConfig,
    tau: f64,
    e4_plain: f64,
    d4: f64,
) -> Result<Parts> {
    let main = main_terms(plan, field, c, config.time_resolved).stage("main_estimate")?;
    let lhs_main_mollified = main_terms(plan, field_r, c, false).stage("main_estimate")?.lhs;
    let ledger = quasi_orthogonality_ledger(plan, field_r, c).stage("ledger")?;
    let terms = ledger::terms_from_ledger(&ledger, plan.dim(), tau, e4_plain, d4);
    let q = c.p_dual();
    let sup_gradient = field.sup_in(1.0, &|g| geom::norm(g).powf(q));
    let energy_gradient = field.integrate(&|g| Ok(geom::norm(g).powf(q)))?;
    Ok(Parts { main, lhs_main_mollified, ledger, terms, sup_gradient, energy_gradient, c_r: 0.0, solve: None, solve_mollified: None })
}
