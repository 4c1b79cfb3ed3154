use linot::cost::CostSpec;
use linot::geom::{self, Point};
use linot::harness::{generate, InstanceFamily};
use linot::ot::solve_exact;
use linot::pde::{solve_neumann, DiskMesh, NeumannProblem, ScalarField};
use linot::pipeline::*;
use linot::Error;

fn radial(p: f64) -> CostSpec {
    CostSpec::radial(p, if p == 2.0 { 2.0 } else { 8.0 }).unwrap()
}

fn config(rings: usize) -> PipelineConfig {
    PipelineConfig { resolution: rings, mesh_h: 0.2, ..PipelineConfig::default() }
}

fn sine(a: f64, rings: usize) -> InstanceFamily {
    InstanceFamily::SmoothSine { amplitude: a, wave: [1.0, 0.0], rings }
}

fn linear_field(mesh: &DiskMesh, a: Point) -> ScalarField {
    ScalarField { values: mesh.nodes.iter().map(|&x| geom::dot(a, x)).collect(), stats: None }
}

/// Entry and exit times of `x + t (y - x)` in the closed disk of radius `r`,
/// from the roots of the quadratic.
fn oracle_times(x: Point, y: Point, r: f64) -> Option<(f64, f64)> {
    let d = geom::sub(y, x);
    let (a, b, c) = (geom::norm2(d), 2.0 * geom::dot(x, d), geom::norm2(x) - r * r);
    if a == 0.0 {
        return (c <= 0.0).then_some((0.0, 1.0));
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let lo = ((-b - disc.sqrt()) / (2.0 * a)).max(0.0);
    let hi = ((-b + disc.sqrt()) / (2.0 * a)).min(1.0);
    (lo <= hi).then_some((lo, hi))
}

#[test]
fn identity_instance_has_no_displacement() {
    let (l, m) = generate(&InstanceFamily::Identity { rings: 12 }, 2, 1).unwrap();
    let rep = run_linearization(&l, &m, &radial(2.0), 0.5, &config(12)).unwrap();
    assert_eq!(rep.lhs_main, 0.0);
    assert_eq!(rep.e4, 0.0);
    assert!(rep.ledger.pass);
    assert!(rep.ledger.identity_defect.unwrap().abs() <= 1e-10);
}

#[test]
fn quadratic_ledger_matches_expanded_squares() {
    for a in [0.2, 0.05] {
        let (l, m) = generate(&sine(a, 12), 2, 1).unwrap();
        let rep = run_linearization(&l, &m, &radial(2.0), 0.5, &config(12)).unwrap();
        assert!(rep.ledger.pass, "margin {}", rep.ledger.margin);
        let defect = rep.ledger.identity_defect.unwrap();
        assert!(defect.abs() <= 1e-10, "defect {defect:e}");
    }
}

#[test]
fn ledger_with_linear_potential_matches_closed_form() {
    // D phi = g constant, so for the quadratic cost every integrand is constant along a trajectory.
    let c = radial(2.0);
    let (l, m) = generate(&InstanceFamily::AtomicCloud { jitter: 0.4, rings: 10 }, 2, 5).unwrap();
    let plan = solve_exact(&l, &m, &c).unwrap();
    let mesh = DiskMesh::build(2.0, 0.25).unwrap();
    let g = [0.03, -0.02];
    let phi = linear_field(&mesh, g);
    let ledger = quasi_orthogonality_ledger(&plan, &MeshField { mesh: &mesh, phi: &phi }, &c).unwrap();
    let (mut lhs_v, mut pairing, mut cost, mut dual_along) = (0.0, 0.0, 0.0, 0.0);
    for (x, y, w) in plan.triples() {
        if let Some((s, t)) = oracle_times(x, y, 2.0) {
            let v = geom::sub(y, x);
            lhs_v += w * (t - s) * geom::norm2(geom::sub(v, g));
            pairing += w * (t - s) * geom::dot(geom::sub(v, g), g);
            cost += w * 0.5 * geom::norm2(v);
            dual_along += w * (t - s) * 0.5 * geom::norm2(g);
        }
    }
    let dual_energy = mesh.total_area() * 0.5 * geom::norm2(g);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-10 * (1.0 + b.abs());
    assert!(close(ledger.lhs_v, lhs_v));
    assert!(close(ledger.term_b, -pairing));
    assert!(close(ledger.cost_omega, cost));
    assert!(close(ledger.dual_energy, dual_energy));
    assert!(close(ledger.term_c, dual_energy - dual_along));
    assert!(ledger.pass);
}

#[test]
fn ledger_holds_for_non_quadratic_costs() {
    for p in [1.5, 3.0] {
        let c = radial(p);
        for seed in 1..=10 {
            let fam = if seed % 2 == 0 {
                InstanceFamily::AtomicCloud { jitter: 0.05 * seed as f64 / 2.0, rings: 8 }
            } else {
                InstanceFamily::AnnulusNoise { amplitude: 0.1 * seed as f64 / 5.0, rings: 8 }
            };
            let (l, m) = generate(&fam, 2, seed).unwrap();
            match run_linearization(&l, &m, &c, 0.5, &config(8)) {
                Ok(rep) => {
                    assert!(rep.ledger.pass, "p {p} seed {seed}: margin {}", rep.ledger.margin);
                    assert!(rep.ledger.identity_defect.is_none());
                }
                Err(Error::Gate { .. }) => {}
                Err(e) => panic!("p {p} seed {seed}: {e}"),
            }
        }
    }
}

#[test]
fn ledger_survives_a_perturbed_potential_while_the_pairing_moves() {
    let c = radial(2.0);
    let (l, m) = generate(&sine(0.1, 10), 2, 1).unwrap();
    let plan = solve_exact(&l, &m, &c).unwrap();
    let mesh = DiskMesh::build(2.0, 0.2).unwrap();
    let prob = NeumannProblem::from_fn(mesh.clone(), c, |theta| 0.05 * theta.cos()).unwrap();
    let phi = solve_neumann(&prob, 1e-10, 500).unwrap();
    let mut shifted = phi.clone();
    for (v, x) in shifted.values.iter_mut().zip(&mesh.nodes) {
        *v += x[0];
    }
    let base = term_estimates(&plan, &MeshField { mesh: &mesh, phi: &phi }, &c, 0.5, 1.0, 1.0).unwrap();
    let moved = term_estimates(&plan, &MeshField { mesh: &mesh, phi: &shifted }, &c, 0.5, 1.0, 1.0).unwrap();
    assert!((base.pde_pairing - moved.pde_pairing).abs() > 1e-3);
    assert!(quasi_orthogonality_ledger(&plan, &MeshField { mesh: &mesh, phi: &shifted }, &c).unwrap().pass);
}

#[test]
fn tau_only_moves_the_budget() {
    let (l, m) = generate(&sine(0.1, 10), 2, 1).unwrap();
    let a = run_linearization(&l, &m, &radial(2.0), 0.5, &config(10)).unwrap();
    let b = run_linearization(&l, &m, &radial(2.0), 0.25, &config(10)).unwrap();
    assert_eq!(a.lhs_main, b.lhs_main);
    assert_eq!(a.ledger, b.ledger);
    assert_eq!(a.term_estimates.energy_gap, b.term_estimates.energy_gap);
    assert!(b.term_estimates.budget < a.term_estimates.budget);
}

#[test]
fn zero_data_gives_zero_terms() {
    let (l, _) = generate(&InstanceFamily::Identity { rings: 10 }, 2, 1).unwrap();
    let rep = run_linearization(&l, &l, &radial(3.0), 0.5, &config(10)).unwrap();
    let t = &rep.term_estimates;
    assert_eq!((t.energy_gap, t.pde_pairing, t.fubini_gap), (0.0, 0.0, 0.0));
    assert_eq!(rep.sup_gradient, 0.0);
}

#[test]
fn tight_gate_is_reported_as_gate_error() {
    let (l, m) = generate(&sine(0.2, 10), 2, 1).unwrap();
    let cfg = PipelineConfig { gate: 1e-9, ..config(10) };
    assert!(matches!(run_linearization(&l, &m, &radial(2.0), 0.5, &cfg), Err(Error::Gate { .. })));
}

#[test]
fn one_dimensional_pipeline_runs_on_the_line_field() {
    let (l, m) = generate(&sine(0.1, 40), 1, 1).unwrap();
    for p in [2.0, 3.0] {
        let rep = run_linearization(&l, &m, &radial(p), 0.5, &config(40)).unwrap();
        assert_eq!(rep.dim, 1);
        assert!(rep.ledger.pass, "p {p}: margin {}", rep.ledger.margin);
        assert!(rep.e4 > 0.0 && rep.lhs_main >= 0.0);
    }
}

#[test]
fn line_field_flux_is_affine_with_the_boundary_data() {
    let mut data = linot::measure::BoundaryData::zeros(2.0, 1, 2);
    data.masses = vec![0.3, -0.1];
    let f = LineField::new(&data, radial(2.0)).unwrap();
    // Outward flux 0.3 at +R and 0.1 inward at -R, i.e. F(-R) = 0.1, constant source balancing the total.
    assert!((f.flux(-2.0) - 0.1).abs() < 1e-15);
    assert!((f.flux(2.0) - 0.3).abs() < 1e-15);
    assert!((f.c_r + 0.05).abs() < 1e-15);
}

#[test]
fn scaling_study_is_deterministic() {
    let c = radial(2.0);
    let run = || scaling_study(&[0.2, 0.1, 0.05], |s| generate(&sine(s, 10), 2, 1), &c, 0.5, &config(10)).unwrap();
    let a = run();
    let b = run();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.rows.len(), 3);
    assert!(a.slope.is_some());
}
