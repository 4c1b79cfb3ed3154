use std::f64::consts::TAU;
use std::io::Write;

use nalgebra::DVector;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};
use serde::{Deserialize, Serialize};

use super::mesh::DiskMesh;
use crate::cost::CostSpec;
use crate::error::{Error, Result};
use crate::geom::{self, Point};
use crate::measure::BoundaryData;
use crate::quadrature::Rule;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 100_000;
const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;

/// `-div grad c*(D phi) = c_R` in `B_R`, `grad c*(D phi) . nu = g` on the boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeumannProblem {
    pub mesh: DiskMesh,
    pub cost: CostSpec,
    /// Net flux `g_bar - f_bar` when built from bin data.
    pub g_boundary: Option<BoundaryData>,
    /// `int g phi_i ds` per node.
    pub load: Vec<f64>,
    /// `int g ds`.
    pub g_total: f64,
    /// `int |g|^p ds`.
    pub g_lp_pow: f64,
    /// `-|B_R|^{-1} int g ds`, so that `int g + c_R |B_R| = 0`.
    pub c_r: f64,
}

impl NeumannProblem {
    /// Boundary flux given as a function of the angle.
    pub fn from_fn(mesh: DiskMesh, cost: CostSpec, g: impl Fn(f64) -> f64) -> Result<Self> {
        Self::assemble(mesh, cost, None, &g, &[])
    }

    /// Boundary flux given as bin masses on the circle of the mesh radius.
    pub fn from_boundary_data(mesh: DiskMesh, cost: CostSpec, data: &BoundaryData) -> Result<Self> {
        if data.dim != 2 {
            return Err(Error::invalid("the disk solver needs two-dimensional boundary data"));
        }
        if (data.radius - mesh.radius).abs() > 1e-12 * mesh.radius {
            return Err(Error::invalid(format!("boundary data radius {} differs from mesh radius {}", data.radius, mesh.radius)));
        }
        let dens = data.density();
        let w = data.bin_width();
        let n = data.n_bins();
        let g = move |th: f64| dens[((th.rem_euclid(TAU) / w).floor() as usize).min(n - 1)];
        let breaks: Vec<f64> = (0..=n).map(|k| k as f64 * w).collect();
        Self::assemble(mesh, cost, Some(data.clone()), &g, &breaks)
    }

    fn assemble(mesh: DiskMesh, cost: CostSpec, g_boundary: Option<BoundaryData>, g: &dyn Fn(f64) -> f64, breaks: &[f64]) -> Result<Self> {
        cost.validate()?;
        let rule = Rule::new(4);
        let r = mesh.radius;
        let mut load = vec![0.0; mesh.n_nodes()];
        let (mut g_total, mut g_lp_pow) = (0.0, 0.0);
        let nb = mesh.boundary_edges.len();
        for (k, e) in mesh.boundary_edges.iter().enumerate() {
            let (ta, tb) = (mesh.boundary_angle(k), mesh.boundary_angle(k) + TAU / nb as f64);
            let mut cuts = vec![ta];
            cuts.extend(breaks.iter().copied().filter(|&b| b > ta && b < tb));
            cuts.push(tb);
            for w in cuts.windows(2) {
                for (th, wt) in rule.on(w[0], w[1]) {
                    let v = g(th);
                    if !v.is_finite() {
                        return Err(Error::invalid("non-finite boundary flux"));
                    }
                    let s = (th - ta) / (tb - ta);
                    load[e.a] += wt * r * v * (1.0 - s);
                    load[e.b] += wt * r * v * s;
                    g_total += wt * r * v;
                    g_lp_pow += wt * r * v.abs().powf(cost.p);
                }
            }
        }
        let c_r = -g_total / (std::f64::consts::PI * r * r);
        Ok(Self { mesh, cost, g_boundary, load, g_total, g_lp_pow, c_r })
    }

    /// `int g + c_R |B_R|`.
    pub fn compatibility_defect(&self) -> f64 {
        self.g_total + self.c_r * std::f64::consts::PI * self.mesh.radius * self.mesh.radius
    }

    /// `||g||_{L^p}`.
    pub fn g_lp_norm(&self) -> f64 {
        self.g_lp_pow.powf(1.0 / self.cost.p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    /// Euclidean norm of the nodal gradient of the energy.
    pub residual: f64,
    pub tolerance: f64,
    pub energy: f64,
    /// Energy after every accepted step, starting with the initial guess.
    pub energy_history: Vec<f64>,
}

/// Nodal values with zero mean over the mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub values: Vec<f64>,
    pub stats: Option<SolveStats>,
}

/// Gradient of a field at a point, flagged when the point lies outside the mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientSample {
    pub gradient: Point,
    pub triangle: usize,
    pub extrapolated: bool,
}

impl ScalarField {
    pub fn zeros(mesh: &DiskMesh) -> Self {
        Self { values: vec![0.0; mesh.n_nodes()], stats: None }
    }

    pub fn from_fn(mesh: &DiskMesh, f: impl Fn(Point) -> f64) -> Self {
        let mut s = Self { values: mesh.nodes.iter().map(|&x| f(x)).collect(), stats: None };
        s.remove_mean(&mesh.node_masses());
        s
    }

    fn remove_mean(&mut self, masses: &[f64]) {
        let total: f64 = masses.iter().sum();
        let mean = self.values.iter().zip(masses).map(|(v, m)| v * m).sum::<f64>() / total;
        for v in &mut self.values {
            *v -= mean;
        }
    }

    /// `int phi dx`.
    pub fn integral(&self, mesh: &DiskMesh) -> f64 {
        self.values.iter().zip(mesh.node_masses()).map(|(v, m)| v * m).sum()
    }

    /// Per-triangle `D phi`.
    pub fn gradients(&self, mesh: &DiskMesh) -> Vec<Point> {
        (0..mesh.triangles.len()).map(|t| mesh.gradient(&self.values, t)).collect()
    }

    /// `D phi` at `x`. Points off the mesh take the gradient of the nearest
    /// triangle in the outermost strip.
    pub fn gradient_at(&self, mesh: &DiskMesh, x: Point) -> GradientSample {
        let (triangle, extrapolated) = locate_fast(mesh, x);
        GradientSample { gradient: mesh.gradient(&self.values, triangle), triangle, extrapolated }
    }

    /// Value of the piecewise-linear field at `x`; points off the mesh use the
    /// affine extension of the nearest triangle.
    pub fn value_at(&self, mesh: &DiskMesh, x: Point) -> f64 {
        let (t, _) = locate_fast(mesh, x);
        let l = mesh.barycentric(t, x);
        mesh.triangles[t].iter().zip(l).map(|(&n, w)| w * self.values[n]).sum()
    }

    /// `(dt, D phi)` pieces of `t -> D phi(a + t (b - a))` on `[t0, t1]`,
    /// split where the segment crosses mesh edges.
    pub fn gradient_along(&self, mesh: &DiskMesh, a: Point, b: Point, t0: f64, t1: f64) -> Vec<(f64, GradientSample)> {
        let ts = mesh.segment_breakpoints(a, b, t0, t1);
        ts.windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| (w[1] - w[0], self.gradient_at(mesh, geom::lerp(a, b, 0.5 * (w[0] + w[1])))))
            .collect()
    }

    /// Writes `node_id,x,y,phi` rows.
    pub fn write_csv<W: Write>(&self, mesh: &DiskMesh, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["node_id", "x", "y", "phi"]).map_err(|e| Error::Serde(e.to_string()))?;
        for (k, (p, v)) in mesh.nodes.iter().zip(&self.values).enumerate() {
            wr.write_record([k.to_string(), p[0].to_string(), p[1].to_string(), v.to_string()]).map_err(|e| Error::Serde(e.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// First triangle of the strip between rings `j` and `j + 1`.
fn strip_start(j: usize) -> usize {
    if j == 0 {
        0
    } else {
        6 * j * j
    }
}

fn strip_len(j: usize) -> usize {
    12 * j + 6
}

/// Triangle containing `x` by searching the strips around its radius;
/// falls back to the nearest centroid in the outermost strip.
fn locate_fast(mesh: &DiskMesh, x: Point) -> (usize, bool) {
    let n = mesh.rings;
    let dr = mesh.radius / n as f64;
    let j = ((geom::norm(x) / dr).floor() as usize).min(n - 1);
    let lo = j.saturating_sub(1);
    let hi = (j + 1).min(n - 1);
    let mut best = (usize::MAX, f64::NEG_INFINITY);
    for s in lo..=hi {
        for t in strip_start(s)..strip_start(s) + strip_len(s) {
            let b = mesh.barycentric(t, x);
            let worst = b[0].min(b[1]).min(b[2]);
            if worst >= -1e-12 {
                return (t, false);
            }
            if worst > best.1 {
                best = (t, worst);
            }
        }
    }
    let last = n - 1;
    let t = (strip_start(last)..strip_start(last) + strip_len(last))
        .min_by(|&a, &b| geom::dist(mesh.centroid(a), x).total_cmp(&geom::dist(mesh.centroid(b), x)))
        .unwrap_or(best.0);
    (t, true)
}

/// Per-triangle `grad c*(D phi)`.
pub fn flux_field(phi: &ScalarField, mesh: &DiskMesh, cost: &CostSpec) -> Result<Vec<Point>> {
    (0..mesh.triangles.len()).map(|t| cost.try_dual_grad(mesh.gradient(&phi.values, t))).collect()
}

/// Sparse symmetric system on all nodes but the pinned centre node.
struct Assembler {
    pattern: CscMatrix<f64>,
    /// Data index of each `(triangle, i, j)` entry, `None` when it touches the pinned node.
    slots: Vec<[[Option<usize>; 3]; 3]>,
}

impl Assembler {
    fn new(mesh: &DiskMesh) -> Self {
        let n = mesh.n_nodes() - 1;
        let mut coo = CooMatrix::new(n, n);
        for tri in &mesh.triangles {
            for &a in tri {
                for &b in tri {
                    if a > 0 && b > 0 {
                        coo.push(a - 1, b - 1, 0.0);
                    }
                }
            }
        }
        let pattern = CscMatrix::from(&coo);
        let offsets = pattern.col_offsets();
        let rows = pattern.row_indices();
        let slots = mesh
            .triangles
            .iter()
            .map(|tri| {
                let mut s = [[None; 3]; 3];
                for (i, &a) in tri.iter().enumerate() {
                    for (j, &b) in tri.iter().enumerate() {
                        if a > 0 && b > 0 {
                            let col = &rows[offsets[b - 1]..offsets[b]];
                            s[i][j] = col.binary_search(&(a - 1)).ok().map(|k| offsets[b - 1] + k);
                        }
                    }
                }
                s
            })
            .collect();
        Self { pattern, slots }
    }

    fn values(&self, mesh: &DiskMesh, local: impl Fn(usize) -> [[f64; 2]; 2]) -> Vec<f64> {
        let mut vals = vec![0.0; self.pattern.nnz()];
        for t in 0..mesh.triangles.len() {
            let h = local(t);
            let g = mesh.hat_gradients(t);
            let area = mesh.area(t);
            for i in 0..3 {
                let hg = [h[0][0] * g[i][0] + h[0][1] * g[i][1], h[1][0] * g[i][0] + h[1][1] * g[i][1]];
                for j in 0..3 {
                    if let Some(k) = self.slots[t][i][j] {
                        vals[k] += area * geom::dot(hg, g[j]);
                    }
                }
            }
        }
        vals
    }

    fn matrix(&self, values: Vec<f64>) -> Result<CscMatrix<f64>> {
        let n = self.pattern.nrows();
        CscMatrix::try_from_csc_data(n, n, self.pattern.col_offsets().to_vec(), self.pattern.row_indices().to_vec(), values)
            .map_err(|e| Error::numerical(format!("sparse pattern: {e}"), f64::NAN))
    }
}

fn solve_reduced(chol: &CscCholesky<f64>, rhs: &[f64]) -> Vec<f64> {
    let b = DVector::from_column_slice(&rhs[1..]);
    let x = chol.solve(&b);
    let mut out = Vec::with_capacity(rhs.len());
    out.push(0.0);
    out.extend(x.iter());
    out
}

fn factor(m: &CscMatrix<f64>) -> Result<CscCholesky<f64>> {
    CscCholesky::factor(m).map_err(|e| Error::numerical(format!("Cholesky factorisation failed: {e}"), f64::NAN))
}

/// Right-hand side `int g phi_i + c_h int phi_i`, with the discrete constant
/// `c_h` chosen so that the entries sum to zero.
fn forcing(prob: &NeumannProblem, masses: &[f64]) -> Vec<f64> {
    let total: f64 = masses.iter().sum();
    let c_h = -prob.load.iter().sum::<f64>() / total;
    prob.load.iter().zip(masses).map(|(l, m)| l + c_h * m).collect()
}

/// The `p = 2` problem `int D phi . D v = int g v + c int v` solved directly.
pub fn solve_linear(prob: &NeumannProblem) -> Result<ScalarField> {
    let mesh = &prob.mesh;
    let masses = mesh.node_masses();
    let f = forcing(prob, &masses);
    let asm = Assembler::new(mesh);
    let k = asm.matrix(asm.values(mesh, |_| [[1.0, 0.0], [0.0, 1.0]]))?;
    let mut field = ScalarField { values: solve_reduced(&factor(&k)?, &f), stats: None };
    field.remove_mean(&masses);
    Ok(field)
}

fn energy(prob: &NeumannProblem, f: &[f64], values: &[f64]) -> Result<f64> {
    let mesh = &prob.mesh;
    let mut e = 0.0;
    for t in 0..mesh.triangles.len() {
        e += mesh.area(t) * prob.cost.try_dual(mesh.gradient(values, t))?;
    }
    Ok(e - f.iter().zip(values).map(|(a, b)| a * b).sum::<f64>())
}

fn energy_gradient(prob: &NeumannProblem, f: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    let mesh = &prob.mesh;
    let mut g: Vec<f64> = f.iter().map(|v| -v).collect();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let flux = prob.cost.try_dual_grad(mesh.gradient(values, t))?;
        let hats = mesh.hat_gradients(t);
        for k in 0..3 {
            g[tri[k]] += mesh.area(t) * geom::dot(flux, hats[k]);
        }
    }
    Ok(g)
}

/// Minimises `sum_T |T| c*(D phi_T) - int g phi - c_R int phi` over mean-zero
/// piecewise-linear fields.
///
/// Damped Newton: the step solves the system of the Hessian of `c*` with its
/// norm floored at a small multiple of the largest gradient, which keeps it
/// positive definite where `D phi` vanishes; step lengths follow an Armijo
/// backtracking rule, so the energy decreases at every accepted step. The
/// iteration stops once the Euclidean norm of the nodal energy gradient is
/// below `tol (1 + ||g||_{L^p})`.
pub fn solve_neumann(prob: &NeumannProblem, tol: f64, max_iter: usize) -> Result<ScalarField> {
    let mesh = &prob.mesh;
    let masses = mesh.node_masses();
    let f = forcing(prob, &masses);
    let threshold = tol * (1.0 + prob.g_lp_norm());
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm(&f) <= threshold {
        let res = norm(&energy_gradient(prob, &f, &vec![0.0; f.len()])?);
        let stats = SolveStats { iterations: 0, residual: res, tolerance: threshold, energy: 0.0, energy_history: vec![0.0] };
        return Ok(ScalarField { values: vec![0.0; f.len()], stats: Some(stats) });
    }
    let asm = Assembler::new(mesh);
    let mut phi = solve_linear(prob)?.values;
    let mut chol = factor(&asm.matrix(asm.values(mesh, |_| [[1.0, 0.0], [0.0, 1.0]]))?)?;
    let mut e = energy(prob, &f, &phi)?;
    let mut history = vec![e];
    for it in 0..max_iter {
        let grad = energy_gradient(prob, &f, &phi)?;
        let res = norm(&grad);
        if res <= threshold {
            let stats = SolveStats { iterations: it, residual: res, tolerance: threshold, energy: e, energy_history: history };
            let mut field = ScalarField { values: phi, stats: Some(stats) };
            field.remove_mean(&masses);
            return Ok(field);
        }
        let grads: Vec<Point> = (0..mesh.triangles.len()).map(|t| mesh.gradient(&phi, t)).collect();
        let scale = grads.iter().fold(0.0_f64, |a, g| a.max(geom::norm(*g)));
        let delta = 1e-8 * scale.max(1e-300);
        let vals = asm.values(mesh, |t| prob.cost.dual_hessian_reg(grads[t], delta));
        chol.refactor(&vals).map_err(|err| Error::numerical(format!("Cholesky refactorisation failed: {err}"), res))?;
        let minus: Vec<f64> = grad.iter().map(|g| -g).collect();
        let dir = solve_reduced(&chol, &minus);
        let slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        if slope >= 0.0 {
            return Err(Error::numerical("Newton direction is not a descent direction", res));
        }
        let mut alpha = 1.0;
        loop {
            let trial: Vec<f64> = phi.iter().zip(&dir).map(|(p, d)| p + alpha * d).collect();
            let et = energy(prob, &f, &trial)?;
            // Near the minimiser energy differences drown in rounding; a full
            // step that lowers the residual is then accepted as is.
            let flat = alpha == 1.0 && (et - e).abs() <= 1e-13 * (1.0 + e.abs());
            if et <= e + ARMIJO * alpha * slope || (flat && norm(&energy_gradient(prob, &f, &trial)?) < res) {
                phi = trial;
                e = et;
                break;
            }
            alpha *= 0.5;
            if alpha < MIN_STEP {
                return Err(Error::numerical("line search stalled", res));
            }
        }
        let total: f64 = masses.iter().sum();
        let mean = phi.iter().zip(&masses).map(|(v, m)| v * m).sum::<f64>() / total;
        for v in &mut phi {
            *v -= mean;
        }
        history.push(e);
    }
    let res = norm(&energy_gradient(prob, &f, &phi)?);
    Err(Error::numerical(format!("no convergence after {max_iter} iterations"), res))
}
