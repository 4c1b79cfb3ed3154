//! Weighted point clouds, balls, Lebesgue quadratures and boundary densities.

use std::f64::consts::{PI, TAU};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Point};

/// Weighted atoms in dimension 1 or 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub dim: usize,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(dim: usize, points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::invalid(format!("dimension {dim} not in {{1, 2}}")));
        }
        if points.len() != weights.len() {
            return Err(Error::invalid("points and weights differ in length"));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::invalid(format!("weight {w} is not a finite non-negative number")));
        }
        if let Some(x) = points.iter().find(|x| !geom::is_finite(**x) || (dim == 1 && x[1] != 0.0)) {
            return Err(Error::invalid(format!("point {x:?} is not a valid {dim}-d point")));
        }
        Ok(Self { dim, points, weights })
    }

    pub fn empty(dim: usize) -> Self {
        Self { dim, points: Vec::new(), weights: Vec::new() }
    }

    /// Equal-weight atoms, each of mass `mass`.
    pub fn uniform(dim: usize, points: Vec<Point>, mass: f64) -> Result<Self> {
        let w = vec![mass; points.len()];
        Self::new(dim, points, w)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn push(&mut self, x: Point, w: f64) {
        self.points.push(x);
        self.weights.push(w);
    }

    /// Multiplies every weight by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self { dim: self.dim, points: self.points.clone(), weights: self.weights.iter().map(|w| w * s).collect() }
    }

    /// Sum of two measures (atoms concatenated).
    pub fn plus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.points.extend_from_slice(&other.points);
        out.weights.extend_from_slice(&other.weights);
        out
    }

    /// Keeps the atoms strictly inside `ball`.
    pub fn restrict(&self, ball: &Ball) -> Self {
        let mut out = Self::empty(self.dim);
        for (x, w) in self.iter() {
            if ball.contains(x) {
                out.push(x, w);
            }
        }
        out
    }

    pub fn mass_in(&self, ball: &Ball) -> f64 {
        self.iter().filter(|(x, _)| ball.contains(*x)).map(|(_, w)| w).sum()
    }

    /// `mu(O) / |O|`.
    pub fn kappa(&self, ball: &Ball) -> f64 {
        self.mass_in(ball) / ball.volume(self.dim)
    }

    pub fn moment(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let header: &[&str] = if self.dim == 1 { &["x", "weight"] } else { &["x", "y", "weight"] };
        wr.write_record(header).map_err(csv_err)?;
        for (x, m) in self.iter() {
            if self.dim == 1 {
                wr.write_record([x[0].to_string(), m.to_string()]).map_err(csv_err)?;
            } else {
                wr.write_record([x[0].to_string(), x[1].to_string(), m.to_string()]).map_err(csv_err)?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads `x[,y],weight` rows; the dimension follows the column count.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let dim = match rd.headers().map_err(csv_err)?.len() {
            2 => 1,
            3 => 2,
            n => return Err(Error::invalid(format!("expected 2 or 3 columns, found {n}"))),
        };
        let mut pts = Vec::new();
        let mut ws = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(csv_err)?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|f| f.trim().parse::<f64>().map_err(|e| Error::invalid(format!("bad number `{f}`: {e}"))))
                .collect::<Result<_>>()?;
            if dim == 1 {
                pts.push([vals[0], 0.0]);
                ws.push(vals[1]);
            } else {
                pts.push([vals[0], vals[1]]);
                ws.push(vals[2]);
            }
        }
        Self::new(dim, pts, ws)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Serde(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || !geom::is_finite(center) {
            return Err(Error::invalid(format!("invalid ball radius {radius}")));
        }
        Ok(Self { center, radius })
    }

    /// Ball of radius `r` around the origin; panics on a non-positive radius.
    pub fn centered(r: f64) -> Self {
        Self::new([0.0, 0.0], r).expect("positive radius")
    }

    pub fn volume(&self, dim: usize) -> f64 {
        geom::unit_ball_volume(dim) * self.radius.powi(dim as i32)
    }

    /// Strict interior membership.
    pub fn contains(&self, x: Point) -> bool {
        geom::dist(x, self.center) < self.radius
    }
}

/// Midpoint quadrature of Lebesgue measure on `ball`.
///
/// In 2-d the ball is cut into `resolution` rings of equal width; ring `j`
/// carries `2 round(pi (j + 1/2))` equal angular cells so that cells stay
/// roughly square and the grid is symmetric under `x -> -x`. Each cell gets
/// its exact area as weight. In 1-d the interval is split into `resolution`
/// equal cells.
pub fn lebesgue_quadrature(ball: &Ball, dim: usize, resolution: usize) -> Result<DiscreteMeasure> {
    if resolution < 2 {
        return Err(Error::invalid("quadrature resolution must be at least 2"));
    }
    let r = ball.radius;
    let c = ball.center;
    let mut m = DiscreteMeasure::empty(dim);
    match dim {
        1 => {
            let h = 2.0 * r / resolution as f64;
            for k in 0..resolution {
                m.push([c[0] - r + (k as f64 + 0.5) * h, 0.0], h);
            }
        }
        2 => {
            let dr = r / resolution as f64;
            for j in 0..resolution {
                let (r0, r1) = (j as f64 * dr, (j + 1) as f64 * dr);
                let n = ring_cells(j);
                let area = 0.5 * (r1 * r1 - r0 * r0) * TAU / n as f64;
                let rm = 0.5 * (r0 + r1);
                for k in 0..n {
                    let th = TAU * (k as f64 + 0.5) / n as f64;
                    m.push([c[0] + rm * th.cos(), c[1] + rm * th.sin()], area);
                }
            }
        }
        _ => return Err(Error::invalid(format!("dimension {dim} not in {{1, 2}}"))),
    }
    let target = ball.volume(dim);
    let s = target / m.total_mass();
    for w in &mut m.weights {
        *w *= s;
    }
    Ok(m)
}

/// Angular cell count of ring `j` in the polar quadrature.
pub fn ring_cells(j: usize) -> usize {
    2 * (PI * (j as f64 + 0.5)).round() as usize
}

/// Masses in equal angular bins on the sphere of radius `radius`.
///
/// In 2-d bin `k` covers angles `[k w, (k+1) w)` with `w = 2 pi / n`. In 1-d
/// there are two bins, `+R` and `-R`, carrying counting measure. Masses may be
/// signed when the data represents a net flux.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData {
    pub radius: f64,
    pub dim: usize,
    pub masses: Vec<f64>,
}

impl BoundaryData {
    pub fn zeros(radius: f64, dim: usize, n_theta: usize) -> Self {
        let n = if dim == 1 { 2 } else { n_theta };
        Self { radius, dim, masses: vec![0.0; n] }
    }

    pub fn n_bins(&self) -> usize {
        self.masses.len()
    }

    /// Angular bin width (radians); `pi` in 1-d.
    pub fn bin_width(&self) -> f64 {
        TAU / self.n_bins() as f64
    }

    /// Surface measure of one bin.
    pub fn bin_measure(&self) -> f64 {
        if self.dim == 1 {
            1.0
        } else {
            self.radius * self.bin_width()
        }
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.bin_width()
    }

    /// Point on the sphere at the bin centre.
    pub fn bin_point(&self, k: usize) -> Point {
        if self.dim == 1 {
            [if k == 0 { self.radius } else { -self.radius }, 0.0]
        } else {
            let t = self.bin_center(k);
            [self.radius * t.cos(), self.radius * t.sin()]
        }
    }

    /// Bin index of the direction of `x`.
    pub fn bin_of(&self, x: Point) -> usize {
        if self.dim == 1 {
            usize::from(x[0] < 0.0)
        } else {
            let k = (geom::angle(x) / self.bin_width()).floor() as usize;
            k.min(self.n_bins() - 1)
        }
    }

    pub fn density(&self) -> Vec<f64> {
        let a = self.bin_measure();
        self.masses.iter().map(|m| m / a).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn sup_density(&self) -> f64 {
        self.density().into_iter().fold(0.0, f64::max)
    }

    /// `int |g|^p` over the sphere for the bin-constant density.
    pub fn lp_norm_pow(&self, p: f64) -> f64 {
        let a = self.bin_measure();
        self.masses.iter().map(|m| (m / a).abs().powf(p) * a).sum()
    }

    /// `self - other` bin by bin.
    pub fn minus(&self, other: &Self) -> Result<Self> {
        if self.masses.len() != other.masses.len() || self.dim != other.dim {
            return Err(Error::invalid("boundary data with different binning"));
        }
        let masses = self.masses.iter().zip(&other.masses).map(|(a, b)| a - b).collect();
        Ok(Self { radius: self.radius, dim: self.dim, masses })
    }

    /// Atoms at the bin centres.
    pub fn to_measure(&self) -> DiscreteMeasure {
        let mut m = DiscreteMeasure::empty(self.dim);
        for (k, &w) in self.masses.iter().enumerate() {
            if w != 0.0 {
                m.push(self.bin_point(k), w);
            }
        }
        m
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["theta_center", "mass", "density"]).map_err(csv_err)?;
        let dens = self.density();
        for (k, m) in self.masses.iter().enumerate() {
            let th = if self.dim == 1 { if k == 0 { 0.0 } else { PI } } else { self.bin_center(k) };
            wr.write_record([th.to_string(), m.to_string(), dens[k].to_string()]).map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Pushes `mu` onto the sphere of radius `radius` along rays from the origin.
pub fn radial_project(mu: &DiscreteMeasure, radius: f64, n_theta: usize) -> Result<BoundaryData> {
    if n_theta == 0 && mu.dim == 2 {
        return Err(Error::invalid("need at least one angular bin"));
    }
    let mut b = BoundaryData::zeros(radius, mu.dim, n_theta);
    for (x, w) in mu.iter() {
        if geom::norm(x) == 0.0 {
            return Err(Error::invalid("radial projection of an atom at the origin"));
        }
        let k = b.bin_of(x);
        b.masses[k] += w;
    }
    Ok(b)
}

/// Circular convolution with a wrapped raised-cosine kernel of angular
/// half-width `r`, normalised on the bin lattice. No-op in 1-d.
pub fn mollify_boundary(b: &BoundaryData, r: f64) -> Result<BoundaryData> {
    if b.dim == 1 {
        return Ok(b.clone());
    }
    let w = b.bin_width();
    if !(r >= w * (1.0 - 1e-12)) {
        return Err(Error::invalid(format!("mollification scale {r} below bin width {w}")));
    }
    let n = b.n_bins() as isize;
    let half = ((r / w) - 1e-9).ceil() as isize - 1;
    let mut kernel: Vec<(isize, f64)> = (-half..=half)
        .map(|k| {
            let s = k as f64 * w / r;
            (k, 0.5 * (1.0 + (PI * s).cos()))
        })
        .collect();
    let total: f64 = kernel.iter().map(|(_, v)| v).sum();
    for (_, v) in &mut kernel {
        *v /= total;
    }
    let mut out = vec![0.0; b.n_bins()];
    for (i, &m) in b.masses.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        for &(k, v) in &kernel {
            let j = (i as isize + k).rem_euclid(n) as usize;
            out[j] += v * m;
        }
    }
    Ok(BoundaryData { radius: b.radius, dim: b.dim, masses: out })
}

/// Half-width of the annulus, relative to the radius, used by the projection estimate.
pub const PROJECTION_EPS: f64 = 0.1;
const PROJECTION_RADIAL_BINS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionCheck {
    /// `R^(1-d) (int g)^p`.
    pub left: f64,
    /// `int_{dB_R} g_hat^p`.
    pub middle: f64,
    /// `sup g^(p-1) int |R - |x||^(p-1) g`.
    pub right: f64,
    /// `middle / (k_lower left)`.
    pub lower_ratio: f64,
    /// `right / (k_upper middle)`.
    pub upper_ratio: f64,
    pub k_lower: f64,
    pub k_upper: f64,
    pub degenerate: bool,
    pub pass: bool,
}

/// Evaluates the two-sided radial projection estimate for a density `g`
/// supported in the annulus `(1 - eps) R <= |x| <= (1 + eps) R`.
///
/// The atoms of `g` are binned into a polar histogram (`n_theta` wedges,
/// 8 radial shells) and treated as the piecewise constant density it defines.
/// With that reading the constants
/// `k_lower = (d w_d)^(1-p) R^((d-1)(2-p))` (Jensen on the sphere) and
/// `k_upper = (2 (1+eps)^(d-1))^(1-p) / p` (concentrating the wedge mass next
/// to the sphere) make both ratios at least 1.
pub fn projection_lemma_check(g: &DiscreteMeasure, radius: f64, n_theta: usize, p: f64) -> Result<ProjectionCheck> {
    let eps = PROJECTION_EPS;
    let d = g.dim;
    let (lo, hi) = ((1.0 - eps) * radius, (1.0 + eps) * radius);
    for (x, w) in g.iter() {
        let r = geom::norm(x);
        if w > 0.0 && !(r >= lo * (1.0 - 1e-12) && r <= hi * (1.0 + 1e-12)) {
            return Err(Error::invalid(format!("atom at radius {r} outside the annulus [{lo}, {hi}]")));
        }
    }
    let proj = radial_project(g, radius, n_theta)?;
    let n_ang = proj.n_bins();
    let nr = PROJECTION_RADIAL_BINS;
    let dr = (hi - lo) / nr as f64;
    let mut hist = vec![0.0; n_ang * nr];
    for (x, w) in g.iter() {
        let a = proj.bin_of(x);
        let s = (((geom::norm(x) - lo) / dr).floor().max(0.0) as usize).min(nr - 1);
        hist[a * nr + s] += w;
    }
    let ang = if d == 1 { 1.0 } else { proj.bin_width() };
    let mut sup = 0.0_f64;
    let mut weighted = 0.0;
    for a in 0..n_ang {
        for s in 0..nr {
            let m = hist[a * nr + s];
            if m == 0.0 {
                continue;
            }
            let (r0, r1) = (lo + s as f64 * dr, lo + (s + 1) as f64 * dr);
            let vol = if d == 1 { r1 - r0 } else { 0.5 * ang * (r1 * r1 - r0 * r0) };
            let dens = m / vol;
            sup = sup.max(dens);
            weighted += dens * ang * shell_integral(radius, r0, r1, p - 1.0, d);
        }
    }
    let mass = g.total_mass();
    let pf = p;
    let left = radius.powf(1.0 - d as f64) * mass.powf(pf);
    let middle = proj.lp_norm_pow(pf);
    let right = sup.powf(pf - 1.0) * weighted;
    let k_lower = (d as f64 * geom::unit_ball_volume(d)).powf(1.0 - pf) * radius.powf((d as f64 - 1.0) * (2.0 - pf));
    let k_upper = (2.0 * (1.0 + eps).powi(d as i32 - 1)).powf(1.0 - pf) / pf;
    if mass == 0.0 {
        return Ok(ProjectionCheck {
            left,
            middle,
            right,
            lower_ratio: 1.0,
            upper_ratio: 1.0,
            k_lower,
            k_upper,
            degenerate: true,
            pass: true,
        });
    }
    let lower_ratio = middle / (k_lower * left);
    let upper_ratio = right / (k_upper * middle);
    let tol = 1e-9;
    Ok(ProjectionCheck {
        left,
        middle,
        right,
        lower_ratio,
        upper_ratio,
        k_lower,
        k_upper,
        degenerate: false,
        pass: lower_ratio >= 1.0 - tol && upper_ratio >= 1.0 - tol,
    })
}

/// `int_{r0}^{r1} |R - r|^a r^(d-1) dr` in closed form (`d` in {1, 2}).
fn shell_integral(radius: f64, r0: f64, r1: f64, a: f64, d: usize) -> f64 {
    // Antiderivative in u = |r - R| on each side of R.
    let side = |u0: f64, u1: f64, sign: f64| {
        let prim = |u: f64| {
            let base = u.powf(a + 1.0) / (a + 1.0);
            if d == 1 {
                base
            } else {
                radius * base + sign * u.powf(a + 2.0) / (a + 2.0)
            }
        };
        prim(u1) - prim(u0)
    };
    let mut total = 0.0;
    if r0 < radius {
        let top = r1.min(radius);
        total += side(radius - top, radius - r0, -1.0);
    }
    if r1 > radius {
        let bot = r0.max(radius);
        total += side(bot - radius, r1 - radius, 1.0);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn atoms(v: &[(Point, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::new(2, v.iter().map(|a| a.0).collect(), v.iter().map(|a| a.1).collect()).unwrap()
    }

    #[test]
    fn restrict_examples() {
        let m = atoms(&[([0.0, 0.0], 1.0), ([5.0, 0.0], 1.0)]);
        let b = Ball::centered(1.0);
        assert_eq!(m.restrict(&b), atoms(&[([0.0, 0.0], 1.0)]));
        assert!(DiscreteMeasure::empty(2).restrict(&b).is_empty());
        assert!(atoms(&[([1.0, 0.0], 1.0)]).restrict(&b).is_empty());
    }

    #[test]
    fn kappa_examples() {
        let m = atoms(&[([0.1, 0.0], 1.0), ([-0.2, 0.3], 1.0)]);
        assert_relative_eq!(m.kappa(&Ball::centered(1.0)), 2.0 / PI);
        assert_eq!(m.kappa(&Ball::new([10.0, 10.0], 1.0).unwrap()), 0.0);
        let q = lebesgue_quadrature(&Ball::centered(4.0), 2, 64).unwrap();
        assert!((q.kappa(&Ball::centered(2.0)) - 1.0).abs() <= 1e-3);
    }

    #[test]
    fn quadrature_mass_and_moments() {
        let q = lebesgue_quadrature(&Ball::centered(1.0), 2, 7).unwrap();
        assert_relative_eq!(q.total_mass(), PI, max_relative = 1e-12);
        let q1 = lebesgue_quadrature(&Ball::centered(4.0), 1, 10).unwrap();
        assert_relative_eq!(q1.total_mass(), 8.0, max_relative = 1e-12);
        let err = |res| {
            let q = lebesgue_quadrature(&Ball::centered(1.0), 2, res).unwrap();
            (q.moment(geom::norm2) - PI / 2.0).abs()
        };
        let (e1, e2) = (err(16), err(32));
        assert!(e2 < 1e-3);
        assert!(e1 / e2 > 3.5, "order-2 convergence: {e1} / {e2}");
        // Reflection symmetry kills the first moment.
        let q = lebesgue_quadrature(&Ball::centered(2.0), 2, 9).unwrap();
        assert!(q.moment(|x| x[0]).abs() < 1e-12 && q.moment(|x| x[1]).abs() < 1e-12);
    }

    #[test]
    fn projection_examples() {
        let b = radial_project(&atoms(&[([0.5, 0.0], 1.0)]), 2.0, 16).unwrap();
        assert_eq!(b.masses[0], 1.0);
        assert_eq!(b.total_mass(), 1.0);
        assert!(radial_project(&atoms(&[([0.0, 0.0], 1.0)]), 2.0, 16).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 20000;
        let mut ring = DiscreteMeasure::empty(2);
        for _ in 0..n {
            let t: f64 = rng.random_range(0.0..TAU);
            ring.push([1.9 * t.cos(), 1.9 * t.sin()], 1.0 / n as f64);
        }
        let b = radial_project(&ring, 2.0, 16).unwrap();
        for m in &b.masses {
            assert!((m - 1.0 / 16.0).abs() < 0.01);
        }
    }

    #[test]
    fn projection_rotates_with_input() {
        let n = 12;
        let w = TAU / n as f64;
        let m = atoms(&[([1.0, 0.3], 1.0), ([-0.4, 0.7], 2.0), ([0.2, -1.1], 0.5)]);
        let rot = |x: Point| {
            let (c, s) = (w.cos(), w.sin());
            [c * x[0] - s * x[1], s * x[0] + c * x[1]]
        };
        let mr = atoms(&m.iter().map(|(x, w)| (rot(x), w)).collect::<Vec<_>>());
        let a = radial_project(&m, 2.0, n).unwrap();
        let b = radial_project(&mr, 2.0, n).unwrap();
        for k in 0..n {
            assert_eq!(a.masses[k], b.masses[(k + 1) % n]);
        }
    }

    #[test]
    fn mollify_examples() {
        let b = BoundaryData { radius: 2.0, dim: 2, masses: vec![0.25; 32] };
        let w = b.bin_width();
        let m = mollify_boundary(&b, 3.0 * w).unwrap();
        for v in &m.masses {
            assert_relative_eq!(*v, 0.25, max_relative = 1e-12);
        }
        let mut spike = BoundaryData::zeros(2.0, 2, 32);
        spike.masses[10] = 1.0;
        let m = mollify_boundary(&spike, 3.0 * w).unwrap();
        let support: Vec<usize> = (0..32).filter(|&k| m.masses[k] > 0.0).collect();
        assert!(support.len() <= 7);
        assert_eq!(support, vec![8, 9, 10, 11, 12]);
        assert_relative_eq!(m.masses[9], m.masses[11], max_relative = 1e-14);
        assert!(mollify_boundary(&spike, 0.5 * w).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let b = BoundaryData { radius: 2.5, dim: 2, masses: (0..40).map(|_| rng.random::<f64>()).collect() };
            let m = mollify_boundary(&b, 4.0 * b.bin_width()).unwrap();
            assert_relative_eq!(m.total_mass(), b.total_mass(), max_relative = 1e-12);
            assert!(m.sup_density() <= b.sup_density() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn projection_lemma_examples() {
        let r = 2.0;
        let n = 32;
        let ring: Vec<(Point, f64)> = (0..n * 4)
            .map(|k| {
                let t = TAU * (k as f64 + 0.5) / (n * 4) as f64;
                ([r * t.cos(), r * t.sin()], 0.01)
            })
            .collect();
        let c = projection_lemma_check(&atoms(&ring), r, n, 2.0).unwrap();
        assert!(c.pass);
        assert_relative_eq!(c.lower_ratio, 1.0, max_relative = 1e-12);

        let c = projection_lemma_check(&atoms(&[([2.1, 0.0], 1.0)]), r, n, 1.5).unwrap();
        assert!(c.pass && c.left > 0.0 && c.middle > 0.0 && c.right > 0.0);

        let c = projection_lemma_check(&DiscreteMeasure::empty(2), r, n, 3.0).unwrap();
        assert!(c.degenerate && c.pass);

        assert!(projection_lemma_check(&atoms(&[([1.0, 0.0], 1.0)]), r, n, 2.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let m = atoms(&[([0.1, -2.5], 0.3), ([1e-17, 4.0], 2.0)]);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(DiscreteMeasure::read_csv(&buf[..]).unwrap(), m);
    }
}
