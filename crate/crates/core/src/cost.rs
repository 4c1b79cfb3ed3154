//! Costs `c(z) = F(|z|_A)` with `F(s) = s^p / p`, their conjugates and the
//! sampling-based checks of the structural inequalities.
//!
//! The radial family uses the Euclidean norm. The anisotropic family uses
//! `|z|_A = sqrt(z . A z)` for a symmetric positive-definite `A`; its conjugate
//! is obtained by inverting the scalar profile `s^(p-1) = t` numerically.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Point};

pub type Mat2 = [[f64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostFamily {
    #[serde(alias = "radialp", alias = "RadialP")]
    Radial,
    #[serde(alias = "anisotropicp", alias = "AnisotropicP")]
    Anisotropic,
}

/// A member of the cost family together with its certified ellipticity
/// constant `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub family: CostFamily,
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Mat2>,
    #[serde(rename = "lambda")]
    pub lambda_cap: f64,
}

const PROFILE_TOL: f64 = 1e-12;
const PROFILE_MAX_ITER: usize = 400;

impl CostSpec {
    pub fn radial(p: f64, lambda: f64) -> Result<Self> {
        let spec = Self { family: CostFamily::Radial, p, matrix: None, lambda_cap: lambda };
        spec.validate()?;
        Ok(spec)
    }

    pub fn anisotropic(p: f64, matrix: Mat2, lambda: f64) -> Result<Self> {
        let spec = Self { family: CostFamily::Anisotropic, p, matrix: Some(matrix), lambda_cap: lambda };
        spec.validate()?;
        Ok(spec)
    }

    /// Builds a radial spec without checking `p > 1`; used for negative controls.
    pub fn radial_unchecked(p: f64, lambda: f64) -> Self {
        Self { family: CostFamily::Radial, p, matrix: None, lambda_cap: lambda }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p.is_finite() && self.p > 1.0) {
            return Err(Error::invalid(format!("exponent p = {} must satisfy p > 1", self.p)));
        }
        if !(self.lambda_cap.is_finite() && self.lambda_cap >= 1.0) {
            return Err(Error::invalid(format!("lambda = {} must be >= 1", self.lambda_cap)));
        }
        match (self.family, self.matrix) {
            (CostFamily::Radial, None) => Ok(()),
            (CostFamily::Radial, Some(_)) => Err(Error::invalid("radial cost takes no matrix")),
            (CostFamily::Anisotropic, None) => Err(Error::invalid("anisotropic cost needs a matrix")),
            (CostFamily::Anisotropic, Some(a)) => {
                let sym = (a[0][1] - a[1][0]).abs() <= 1e-12 * (a[0][1].abs() + a[1][0].abs() + 1.0);
                let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
                let finite = a.iter().flatten().all(|v| v.is_finite());
                if finite && sym && a[0][0] > 0.0 && det > 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("anisotropy matrix must be symmetric positive definite"))
                }
            }
        }
    }

    /// Conjugate exponent `p' = p / (p - 1)`.
    pub fn p_dual(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    fn a(&self) -> Mat2 {
        self.matrix.unwrap_or([[1.0, 0.0], [0.0, 1.0]])
    }

    fn a_inv(&self) -> Mat2 {
        let a = self.a();
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]]
    }

    /// `c(z)`.
    pub fn eval(&self, z: Point) -> f64 {
        match self.family {
            CostFamily::Radial => geom::norm(z).powf(self.p) / self.p,
            CostFamily::Anisotropic => quad_norm(&self.a(), z).powf(self.p) / self.p,
        }
    }

    /// `c(z)` with input validation.
    pub fn try_eval(&self, z: Point) -> Result<f64> {
        check_finite(z)?;
        Ok(self.eval(z))
    }

    /// `grad c(z)`; the limit value 0 at the origin.
    pub fn grad(&self, z: Point) -> Point {
        match self.family {
            CostFamily::Radial => {
                let r = geom::norm(z);
                if r == 0.0 {
                    return [0.0, 0.0];
                }
                geom::scale(r.powf(self.p - 2.0), z)
            }
            CostFamily::Anisotropic => {
                let a = self.a();
                let s = quad_norm(&a, z);
                if s == 0.0 {
                    return [0.0, 0.0];
                }
                geom::scale(s.powf(self.p - 2.0), mat_vec(&a, z))
            }
        }
    }

    /// `c*(xi) = sup_x <xi, x> - c(x)`.
    pub fn dual(&self, xi: Point) -> f64 {
        match self.family {
            CostFamily::Radial => {
                let q = self.p_dual();
                geom::norm(xi).powf(q) / q
            }
            CostFamily::Anisotropic => {
                let z = self.dual_grad(xi);
                geom::dot(xi, z) - self.eval(z)
            }
        }
    }

    pub fn try_dual(&self, xi: Point) -> Result<f64> {
        check_finite(xi)?;
        match self.family {
            CostFamily::Radial => Ok(self.dual(xi)),
            CostFamily::Anisotropic => {
                let z = self.try_dual_grad(xi)?;
                Ok(geom::dot(xi, z) - self.eval(z))
            }
        }
    }

    /// `grad c*(xi)`, the inverse of [`CostSpec::grad`].
    pub fn dual_grad(&self, xi: Point) -> Point {
        self.try_dual_grad(xi).unwrap_or([f64::NAN, f64::NAN])
    }

    pub fn try_dual_grad(&self, xi: Point) -> Result<Point> {
        check_finite(xi)?;
        match self.family {
            CostFamily::Radial => {
                let r = geom::norm(xi);
                if r == 0.0 {
                    return Ok([0.0, 0.0]);
                }
                Ok(geom::scale(r.powf(self.p_dual() - 2.0), xi))
            }
            CostFamily::Anisotropic => {
                let b = self.a_inv();
                let t = quad_norm(&b, xi);
                if t == 0.0 {
                    return Ok([0.0, 0.0]);
                }
                let s = invert_profile(self.p, t)?;
                Ok(geom::scale(s / t, mat_vec(&b, xi)))
            }
        }
    }

    /// Hessian of `c*` at `xi` with the norm floored at `delta`; symmetric
    /// positive definite for `delta > 0`.
    pub fn dual_hessian_reg(&self, xi: Point, delta: f64) -> Mat2 {
        let q = self.p_dual();
        let b = self.a_inv();
        let t = quad_norm(&b, xi);
        let tr = t.max(delta);
        let bx = mat_vec(&b, xi);
        let w = if t > 0.0 { (q - 2.0) / (tr * tr) } else { 0.0 };
        let f = tr.powf(q - 2.0);
        let mut h = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                h[i][j] = f * (b[i][j] + w * bx[i] * bx[j]);
            }
        }
        h
    }

    /// Fenchel-Young defect `c(x) + c*(xi) - <xi, x>`.
    pub fn fenchel_young_gap(&self, x: Point, xi: Point) -> f64 {
        self.eval(x) + self.dual(xi) - geom::dot(xi, x)
    }
}

fn check_finite(z: Point) -> Result<()> {
    if geom::is_finite(z) {
        Ok(())
    } else {
        Err(Error::invalid(format!("non-finite argument {z:?}")))
    }
}

fn mat_vec(a: &Mat2, z: Point) -> Point {
    [a[0][0] * z[0] + a[0][1] * z[1], a[1][0] * z[0] + a[1][1] * z[1]]
}

fn quad_norm(a: &Mat2, z: Point) -> f64 {
    geom::dot(z, mat_vec(a, z)).max(0.0).sqrt()
}

/// Solves `s^(p-1) = t` for `s > 0` by Newton iteration safeguarded by bisection.
fn invert_profile(p: f64, t: f64) -> Result<f64> {
    let f = |s: f64| s.powf(p - 1.0) - t;
    let mut lo = 0.0_f64;
    let mut hi = t.max(1.0);
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::numerical("profile inversion: no bracket", f64::INFINITY));
        }
    }
    let mut s = 0.5 * (lo + hi);
    for _ in 0..PROFILE_MAX_ITER {
        let fs = f(s);
        if fs.abs() <= PROFILE_TOL * t || hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(s);
        }
        if fs > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let df = (p - 1.0) * s.powf(p - 2.0);
        let newton = s - fs / df;
        s = if df.is_finite() && df > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    let residual = f(s).abs() / t;
    if residual <= 1e-10 {
        Ok(s)
    } else {
        Err(Error::numerical("profile inversion did not converge", residual))
    }
}

/// `V_p(x, y) = (|x|^2 + |y|^2)^((p-2)/2) |x - y|^2`, with the limit 0 at `x = y = 0`.
pub fn v_p(p: f64, x: Point, y: Point) -> f64 {
    let d2 = geom::norm2(geom::sub(x, y));
    if d2 == 0.0 {
        return 0.0;
    }
    (geom::norm2(x) + geom::norm2(y)).powf(0.5 * (p - 2.0)) * d2
}

/// `U_p(x, y) = (|x| + |y|)^(p-1) |x - y|`.
pub fn u_p(p: f64, x: Point, y: Point) -> f64 {
    let d = geom::dist(x, y);
    if d == 0.0 {
        return 0.0;
    }
    (geom::norm(x) + geom::norm(y)).powf(p - 1.0) * d
}

/// Constant in `|V_p(z1,z2) - V_p(z1,z3)| <= K (|z1|+|z2|+|z3|)^(p-1) |z2-z3|`,
/// from bounding the gradient of `V_p` in its second slot.
pub fn vdiff_constant(p: f64) -> f64 {
    2.0 * (p - 2.0).abs() + 2.0 * std::f64::consts::SQRT_2
}

/// Cap used for the dual-side inequalities whose constants depend only on `(p, lambda)`.
pub fn dual_constant_cap(lambda: f64) -> f64 {
    lambda * lambda
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: Point,
    pub y: Point,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<Point>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub name: String,
    /// Largest constant needed on the samples.
    pub worst_constant: f64,
    /// Constant the check is held against.
    pub bound: f64,
    pub witness: Option<Witness>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub spec: CostSpec,
    pub sample_count: usize,
    pub seed: u64,
    pub checks: Vec<InequalityCheck>,
    /// Largest `|c(x) + c*(grad c(x)) - <grad c(x), x>| / (1 + |x|^p)`.
    pub fenchel_young_max_gap: f64,
    /// Smallest Fenchel-Young defect over random `(x, xi)`; should be `>= -1e-10`.
    pub fenchel_young_min_gap: f64,
    /// Largest `|grad c(grad c*(xi)) - xi| / (1 + |xi|)`.
    pub round_trip_error: f64,
    pub pass: bool,
}

impl AssumptionReport {
    pub fn check(&self, name: &str) -> Option<&InequalityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

const REL_TOL: f64 = 1e-12;

#[derive(Clone, Copy)]
struct Sample {
    x: Point,
    y: Point,
    z: Point,
    tau: f64,
    xi1: Point,
    xi2: Point,
}

fn log_uniform_radius(rng: &mut ChaCha8Rng) -> f64 {
    10f64.powf(rng.random_range(-3.0..=3.0))
}

fn random_point(rng: &mut ChaCha8Rng) -> Point {
    let r = log_uniform_radius(rng);
    let th = rng.random_range(0.0..std::f64::consts::TAU);
    [r * th.cos(), r * th.sin()]
}

const SPECIAL_DIRS: [Point; 6] = [
    [1.0, 0.0],
    [0.0, 1.0],
    [-1.0, 0.0],
    [0.0, -1.0],
    [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2],
    [std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2],
];

fn special_point(rng: &mut ChaCha8Rng) -> Point {
    let d = SPECIAL_DIRS[rng.random_range(0..SPECIAL_DIRS.len())];
    geom::scale(log_uniform_radius(rng), d)
}

/// Draws a pair whose geometry rotates through: independent, collinear along
/// one ray, a relative perturbation, and axis/diagonal directions.
fn draw_pair(rng: &mut ChaCha8Rng, mode: usize) -> (Point, Point) {
    match mode % 4 {
        0 => (random_point(rng), random_point(rng)),
        1 => {
            let x = special_point(rng);
            let s = 10f64.powf(rng.random_range(-2.0..=2.0));
            (x, geom::scale(s, x))
        }
        2 => {
            let x = random_point(rng);
            let eps = 10f64.powf(rng.random_range(-3.0..=0.0)) * geom::norm(x);
            let th = rng.random_range(0.0..std::f64::consts::TAU);
            (x, geom::add(x, [eps * th.cos(), eps * th.sin()]))
        }
        _ => (special_point(rng), special_point(rng)),
    }
}

fn draw_samples(n: usize, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let (x, y) = draw_pair(&mut rng, i);
            let z = random_point(&mut rng);
            let tau = rng.random_range(0.0..=1.0);
            let (xi1, xi2) = draw_pair(&mut rng, i + 1);
            Sample { x, y, z, tau, xi1, xi2 }
        })
        .collect()
}

/// Needed constant and violation flag for `lhs <= k * rhs`, with a relative
/// slack proportional to `scale`.
#[derive(Clone, Copy)]
struct Obs {
    needed: f64,
    violated: bool,
}

fn observe(lhs: f64, rhs: f64, k: f64, scale: f64) -> Obs {
    let slack = REL_TOL * scale.abs();
    let violated = !(lhs <= k * rhs + slack);
    let needed = if lhs <= slack {
        0.0
    } else if rhs > 0.0 {
        lhs / rhs
    } else {
        f64::INFINITY
    };
    Obs { needed, violated }
}

struct Accumulator {
    name: &'static str,
    bound: f64,
    worst: f64,
    witness: Option<Witness>,
    violated: bool,
    skipped: bool,
}

impl Accumulator {
    fn new(name: &'static str, bound: f64) -> Self {
        Self { name, bound, worst: 0.0, witness: None, violated: false, skipped: false }
    }

    fn push(&mut self, obs: Obs, w: Witness) {
        self.violated |= obs.violated;
        if obs.needed > self.worst || (obs.needed.is_nan() && !self.worst.is_nan()) {
            self.worst = obs.needed;
            self.witness = Some(w);
        }
    }

    fn finish(self) -> InequalityCheck {
        InequalityCheck {
            name: self.name.to_string(),
            worst_constant: if self.skipped { f64::INFINITY } else { self.worst },
            bound: self.bound,
            witness: self.witness,
            pass: !self.skipped && !self.violated,
        }
    }
}

const CHECK_NAMES: [&str; 8] = [
    "elliptic",
    "growth",
    "c_growth",
    "controlled_growth",
    "vdiff",
    "dual_p_convex",
    "dual_c_growth",
    "fenchel_young",
];

/// Per-sample observations for every check, in `CHECK_NAMES` order.
fn observe_sample(spec: &CostSpec, s: &Sample, dual_ok: bool) -> [(Obs, Witness); 8] {
    let p = spec.p;
    let lam = spec.lambda_cap;
    let (x, y, tau) = (s.x, s.y, s.tau);
    let pair = Witness { x, y, z: None, tau: None };
    let with_tau = Witness { tau: Some(tau), ..pair };

    let cx = spec.eval(x);
    let cy = spec.eval(y);
    let mid = geom::add(geom::scale(tau, x), geom::scale(1.0 - tau, y));
    let cm = spec.eval(mid);
    let gap = tau * cx + (1.0 - tau) * cy - cm;
    let vxy = v_p(p, x, y);
    let elliptic = observe(tau * (1.0 - tau) * vxy, gap, lam, tau * cx + (1.0 - tau) * cy + cm);

    let nx = geom::norm(x).powf(p);
    let growth_hi = observe(cx, nx, lam, cx);
    let growth_lo = observe(nx, cx, lam, nx);
    let growth = if growth_lo.needed > growth_hi.needed || growth_lo.violated {
        Obs { needed: growth_lo.needed.max(growth_hi.needed), violated: growth_lo.violated || growth_hi.violated }
    } else {
        Obs { needed: growth_hi.needed, violated: growth_hi.violated }
    };

    let c_growth = observe((cx - cy).abs(), u_p(p, x, y), lam, cx.abs() + cy.abs());

    let gx = spec.grad(x);
    let gy = spec.grad(y);
    let dx = geom::dist(x, y);
    let cg_rhs = if dx == 0.0 { 0.0 } else { (geom::norm(x) + geom::norm(y)).powf(p - 2.0) * dx };
    let controlled = observe(geom::dist(gx, gy), cg_rhs, lam, geom::norm(gx) + geom::norm(gy));

    let z1 = s.z;
    let v12 = v_p(p, z1, x);
    let v13 = v_p(p, z1, y);
    let sum = geom::norm(z1) + geom::norm(x) + geom::norm(y);
    let vd_rhs = if dx == 0.0 { 0.0 } else { sum.powf(p - 1.0) * dx };
    let vdiff = observe((v12 - v13).abs(), vd_rhs, vdiff_constant(p), v12.abs() + v13.abs());
    let vdiff_w = Witness { x, y, z: Some(z1), tau: None };

    let (dual_conv, dual_growth, fy) = if dual_ok {
        let q = spec.p_dual();
        let cap = dual_constant_cap(lam);
        let (a, b) = (s.xi1, s.xi2);
        let da = spec.dual(a);
        let db = spec.dual(b);
        let m = geom::add(geom::scale(tau, a), geom::scale(1.0 - tau, b));
        let dm = spec.dual(m);
        let dgap = tau * da + (1.0 - tau) * db - dm;
        let conv = observe(tau * (1.0 - tau) * v_p(q, a, b), dgap, cap, tau * da + (1.0 - tau) * db + dm);
        let growth = observe((da - db).abs(), u_p(q, a, b), cap, da.abs() + db.abs());
        // Fenchel-Young: the defect must be non-negative for arbitrary pairs.
        let fyg = spec.fenchel_young_gap(x, a);
        let fy_scale = cx + da + geom::norm(x) * geom::norm(a);
        let fy = Obs { needed: if fyg < 0.0 { -fyg / fy_scale.max(1.0) } else { 0.0 }, violated: fyg < -1e-10 * fy_scale.max(1.0) };
        (conv, growth, fy)
    } else {
        let bad = Obs { needed: f64::INFINITY, violated: true };
        (bad, bad, bad)
    };
    let dual_w = Witness { x: s.xi1, y: s.xi2, z: None, tau: Some(tau) };

    [
        (elliptic, with_tau),
        (growth, Witness { x, y: [0.0, 0.0], z: None, tau: None }),
        (c_growth, pair),
        (controlled, pair),
        (vdiff, vdiff_w),
        (dual_conv, dual_w),
        (dual_growth, Witness { tau: None, ..dual_w }),
        (fy, Witness { x, y: s.xi1, z: None, tau: None }),
    ]
}

/// Samples the structural inequalities and reports the worst constants seen.
///
/// The primal checks are held against `lambda_cap`; the variation check uses
/// [`vdiff_constant`] and the dual convexity/growth checks use
/// [`dual_constant_cap`]. Specs with `p <= 1` have no finite conjugate
/// exponent; their dual checks are marked failed without evaluation.
pub fn verify_assumptions(spec: &CostSpec, sample_count: usize, seed: u64) -> AssumptionReport {
    let n = sample_count.max(1);
    let samples = draw_samples(n, seed);
    let dual_ok = spec.p > 1.0 && spec.p.is_finite();
    let lam = spec.lambda_cap;
    let bounds = [
        lam,
        lam,
        lam,
        lam,
        vdiff_constant(spec.p),
        if dual_ok { dual_constant_cap(lam) } else { f64::NAN },
        if dual_ok { dual_constant_cap(lam) } else { f64::NAN },
        0.0,
    ];
    let mut acc: Vec<Accumulator> = CHECK_NAMES.iter().zip(bounds).map(|(n, b)| Accumulator::new(n, b)).collect();
    if !dual_ok {
        for a in &mut acc[5..8] {
            a.skipped = true;
        }
    }

    let observed: Vec<[(Obs, Witness); 8]> = samples.par_iter().map(|s| observe_sample(spec, s, dual_ok)).collect();
    for row in &observed {
        for (a, (obs, w)) in acc.iter_mut().zip(row.iter()) {
            if !a.skipped {
                a.push(*obs, *w);
            }
        }
    }

    let (fy_max, rt_err) = if dual_ok {
        samples
            .par_iter()
            .map(|s| {
                let g = spec.grad(s.x);
                let fy = spec.fenchel_young_gap(s.x, g).abs() / (1.0 + geom::norm(s.x).powf(spec.p));
                let back = spec.grad(spec.dual_grad(s.xi1));
                let rt = geom::dist(back, s.xi1) / (1.0 + geom::norm(s.xi1));
                (fy, rt)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold((0.0_f64, 0.0_f64), |(a, b), (c, d)| (a.max(c), b.max(d)))
    } else {
        (f64::INFINITY, f64::INFINITY)
    };

    let fy_min = if dual_ok {
        -acc[7].worst
    } else {
        f64::NEG_INFINITY
    };
    let checks: Vec<InequalityCheck> = acc.into_iter().map(Accumulator::finish).collect();
    let pass = checks.iter().all(|c| c.pass) && fy_max <= 1e-8 && rt_err <= 1e-8;
    AssumptionReport {
        spec: *spec,
        sample_count: n,
        seed,
        checks,
        fenchel_young_max_gap: fy_max,
        fenchel_young_min_gap: fy_min,
        round_trip_error: rt_err,
        pass,
    }
}
