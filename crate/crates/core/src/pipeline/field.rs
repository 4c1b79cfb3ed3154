//! Gradient fields `D phi` on `B_R` as seen by the pipeline: the P1 solution
//! on a disk mesh in 2-d, and the closed-form flux on an interval in 1-d.

use crate::cost::CostSpec;
use crate::error::{Error, Result};
use crate::geom::{self, Point};
use crate::measure::BoundaryData;
use crate::pde::{DiskMesh, ScalarField};
use crate::quadrature::Rule;

pub trait GradientField: Sync {
    fn radius(&self) -> f64;

    /// `D phi(x)` and whether `x` lies off the discretisation.
    fn gradient(&self, x: Point) -> (Point, bool);

    /// Weighted samples `(dt, D phi(a + t (b - a)))` integrating exactly (mesh)
    /// or to quadrature accuracy (interval) over `[t0, t1]`.
    fn pieces(&self, a: Point, b: Point, t0: f64, t1: f64) -> Vec<(f64, Point)>;

    /// `int_{B_R} h(D phi) dx`.
    fn integrate(&self, h: &dyn Fn(Point) -> Result<f64>) -> Result<f64>;

    /// `sup h(D phi)` over the part of the discretisation inside `B_r`.
    fn sup_in(&self, r: f64, h: &dyn Fn(Point) -> f64) -> f64;
}

pub struct MeshField<'a> {
    pub mesh: &'a DiskMesh,
    pub phi: &'a ScalarField,
}

impl GradientField for MeshField<'_> {
    fn radius(&self) -> f64 {
        self.mesh.radius
    }

    fn gradient(&self, x: Point) -> (Point, bool) {
        let s = self.phi.gradient_at(self.mesh, x);
        (s.gradient, s.extrapolated)
    }

    fn pieces(&self, a: Point, b: Point, t0: f64, t1: f64) -> Vec<(f64, Point)> {
        self.phi.gradient_along(self.mesh, a, b, t0, t1).into_iter().map(|(dt, s)| (dt, s.gradient)).collect()
    }

    fn integrate(&self, h: &dyn Fn(Point) -> Result<f64>) -> Result<f64> {
        let mut total = 0.0;
        for t in 0..self.mesh.triangles.len() {
            total += self.mesh.area(t) * h(self.mesh.gradient(&self.phi.values, t))?;
        }
        Ok(total)
    }

    fn sup_in(&self, r: f64, h: &dyn Fn(Point) -> f64) -> f64 {
        (0..self.mesh.triangles.len())
            .filter(|&t| geom::norm(self.mesh.centroid(t)) < r)
            .fold(0.0_f64, |m, t| m.max(h(self.mesh.gradient(&self.phi.values, t))))
    }
}

const LINE_RULE: usize = 8;
const LINE_PANELS: usize = 16;

/// The 1-d problem `-(grad c*(phi'))' = c_R` on `(-R, R)` with outward flux
/// data at `+R` (bin 0) and `-R` (bin 1). The flux `F = grad c*(phi')` is
/// affine, `F(x) = F(-R) - c_R (x + R)`, and `phi' = grad c(F)`.
#[derive(Debug, Clone, Copy)]
pub struct LineField {
    pub radius: f64,
    pub c_r: f64,
    pub left_flux: f64,
    pub cost: CostSpec,
}

impl LineField {
    pub fn new(data: &BoundaryData, cost: CostSpec) -> Result<Self> {
        if data.dim != 1 || data.n_bins() != 2 {
            return Err(Error::invalid("interval flux needs two-point boundary data"));
        }
        let radius = data.radius;
        let c_r = -data.total_mass() / (2.0 * radius);
        Ok(Self { radius, c_r, left_flux: -data.masses[1], cost })
    }

    pub fn flux(&self, x: f64) -> f64 {
        self.left_flux - self.c_r * (x + self.radius)
    }

    fn grad_at(&self, x: f64) -> Point {
        self.cost.grad([self.flux(x), 0.0])
    }
}

impl GradientField for LineField {
    fn radius(&self) -> f64 {
        self.radius
    }

    fn gradient(&self, x: Point) -> (Point, bool) {
        (self.grad_at(x[0]), x[0].abs() > self.radius)
    }

    fn pieces(&self, a: Point, b: Point, t0: f64, t1: f64) -> Vec<(f64, Point)> {
        let rule = Rule::new(LINE_RULE);
        rule.on(t0, t1).map(|(t, w)| (w, self.grad_at(a[0] + t * (b[0] - a[0])))).collect()
    }

    fn integrate(&self, h: &dyn Fn(Point) -> Result<f64>) -> Result<f64> {
        let rule = Rule::new(LINE_RULE);
        let step = 2.0 * self.radius / LINE_PANELS as f64;
        let mut total = 0.0;
        for k in 0..LINE_PANELS {
            let lo = -self.radius + k as f64 * step;
            for (x, w) in rule.on(lo, lo + step) {
                total += w * h(self.grad_at(x))?;
            }
        }
        Ok(total)
    }

    fn sup_in(&self, r: f64, h: &dyn Fn(Point) -> f64) -> f64 {
        // |F| is affine, so |phi'| peaks at an end of [-r, r].
        let r = r.min(self.radius);
        h(self.grad_at(-r)).max(h(self.grad_at(r)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_flux_matches_boundary_data() {
        let mut data = BoundaryData::zeros(2.0, 1, 2);
        data.masses = vec![0.3, -0.1];
        let f = LineField::new(&data, CostSpec::radial(3.0, 8.0).unwrap()).unwrap();
        assert!((f.flux(2.0) - 0.3).abs() < 1e-15);
        assert!((-f.flux(-2.0) + 0.1).abs() < 1e-15);
        assert!((f.c_r + 0.05).abs() < 1e-15);
    }

    #[test]
    fn mesh_pieces_integrate_gradients_exactly() {
        let mesh = DiskMesh::build(1.0, 0.2).unwrap();
        let phi = ScalarField::from_fn(&mesh, |x| (2.0 * x[0]).sin() + x[1] * x[1]);
        let field = MeshField { mesh: &mesh, phi: &phi };
        let (a, b) = ([-0.7, 0.3], [0.5, -0.4]);
        let d = geom::sub(b, a);
        let along: f64 = field.pieces(a, b, 0.1, 0.9).iter().map(|(dt, g)| dt * geom::dot(*g, d)).sum();
        let exact = phi.value_at(&mesh, geom::lerp(a, b, 0.9)) - phi.value_at(&mesh, geom::lerp(a, b, 0.1));
        assert!((along - exact).abs() < 1e-12, "{along} {exact}");
    }
}
