//! End-to-end acceptance suite: one pass/fail line per criterion.
//!
//! Runs as a plain binary (no libtest harness) so that the criterion lines
//! are always printed; exits non-zero when any criterion fails.

use std::time::{Duration, Instant};

use linot::cost::{verify_assumptions, CostSpec};
use linot::harness::{generate, run_lemma, write_file, InstanceFamily, LemmaName, Report};
use linot::measure::DiscreteMeasure;
use linot::ot::{brute_force, check_cyclical_monotonicity, monotone_1d, solve_exact, TransportPlan};
use linot::pde::{solve_neumann, DiskMesh, NeumannProblem, ScalarField, DEFAULT_MAX_ITER, DEFAULT_TOL};
use linot::pipeline::{run_linearization, LinearizationReport, PipelineConfig};
use linot::{geom, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const COST_SAMPLES: usize = 10_000;
const BRUTE_FORCE_TOL: f64 = 1e-12;
const MONOTONE_TOL: f64 = 1e-9;
const CYCLIC_TUPLES: usize = 10_000;
const CONVERGENCE_RATIO: f64 = 3.0;
const SPREAD_LIMIT: f64 = 10.0;
const IDENTITY_TOL: f64 = 1e-10;
const SLOPE_FLOOR: f64 = 1.0;
const AMPLITUDES: [f64; 3] = [0.2, 0.1, 0.05];
const MESHES: [f64; 3] = [0.2, 0.1, 0.05];

type Runs = Vec<(f64, Result<LinearizationReport, Error>)>;

struct Verdict {
    pass: bool,
    detail: String,
}

fn budget(start: Instant, limit: Duration) -> (bool, String) {
    let el = start.elapsed();
    (el <= limit, format!("{:.1}s of {}s", el.as_secs_f64(), limit.as_secs()))
}

fn radial(p: f64) -> CostSpec {
    CostSpec::radial(p, if p == 2.0 { 2.0 } else { 8.0 }).unwrap()
}

fn cloud(rng: &mut ChaCha8Rng, n: usize) -> DiscreteMeasure {
    let pts = (0..n).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
    DiscreteMeasure::uniform(2, pts, 1.0).unwrap()
}

fn line(xs: Vec<f64>, ws: Vec<f64>) -> DiscreteMeasure {
    DiscreteMeasure::new(1, xs.into_iter().map(|x| [x, 0.0]).collect(), ws).unwrap()
}

fn spread(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut specs = vec![];
    for p in [1.5, 2.0, 3.0] {
        specs.push((format!("radial p={p}"), radial(p)));
        specs.push((format!("anisotropic p={p}"), CostSpec::anisotropic(p, [[2.0, 0.5], [0.5, 1.0]], 64.0).unwrap()));
    }
    let mut failed = vec![];
    for (name, spec) in &specs {
        if !verify_assumptions(spec, COST_SAMPLES, 1).pass {
            failed.push(name.clone());
        }
    }
    let rejects_p1 = CostSpec::radial(1.0, 2.0).is_err();
    let (fast, time) = budget(start, Duration::from_secs(5));
    Verdict {
        pass: failed.is_empty() && rejects_p1 && fast,
        detail: format!("{} specs, failed {failed:?}, p=1 rejected {rejects_p1}, {time}", specs.len()),
    }
}

fn criterion_2(plans: &mut Vec<(TransportPlan, CostSpec)>) -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_bf = 0.0_f64;
    for k in 0..100 {
        let c = radial([1.5, 2.0, 3.0][k % 3]);
        let n = 1 + k % 7;
        let (a, b) = (cloud(&mut rng, n), cloud(&mut rng, n));
        let plan = solve_exact(&a, &b, &c).unwrap();
        worst_bf = worst_bf.max((plan.cost(&c) - brute_force(&a, &b, &c).unwrap().cost(&c)).abs());
        plans.push((plan, c));
    }
    let mut worst_1d = 0.0_f64;
    for k in 0..20 {
        let c = radial([1.5, 2.0, 3.0][k % 3]);
        let wa: Vec<f64> = (0..50).map(|_| rng.random_range(0.1..1.0)).collect();
        let wb: Vec<f64> = (0..50).map(|_| rng.random_range(0.1..1.0)).collect();
        let s = wa.iter().sum::<f64>() / wb.iter().sum::<f64>();
        let wb = wb.into_iter().map(|w| w * s).collect();
        let a = line((0..50).map(|_| rng.random_range(-2.0..2.0)).collect(), wa);
        let b = line((0..50).map(|_| rng.random_range(-2.0..2.0)).collect(), wb);
        let plan = solve_exact(&a, &b, &c).unwrap();
        worst_1d = worst_1d.max((plan.cost(&c) - monotone_1d(&a, &b).unwrap().cost(&c)).abs());
        plans.push((plan, c));
    }
    let (fast, time) = budget(start, Duration::from_secs(30));
    Verdict {
        pass: worst_bf <= BRUTE_FORCE_TOL && worst_1d <= MONOTONE_TOL && fast,
        detail: format!("max |exact - brute force| {worst_bf:.2e} (100 instances), max |exact - monotone| {worst_1d:.2e} (20 instances), {time}"),
    }
}

fn criterion_3(plans: &[(TransportPlan, CostSpec)]) -> Verdict {
    let mut violations = 0;
    for (k, (plan, c)) in plans.iter().enumerate() {
        for n in 2..=4 {
            violations += check_cyclical_monotonicity(plan, c, n, CYCLIC_TUPLES / 3, k as u64).unwrap().len();
        }
    }
    let c = radial(2.0);
    let xs: Vec<f64> = (0..10).map(|k| k as f64 * 0.3).collect();
    let a = line(xs.clone(), vec![1.0; 10]);
    let b = line(xs.iter().map(|x| x + 0.05).collect(), vec![1.0; 10]);
    let mut planted = monotone_1d(&a, &b).unwrap();
    planted.entries[2].j = 7;
    planted.entries[7].j = 2;
    let detected = !check_cyclical_monotonicity(&planted, &c, 2, CYCLIC_TUPLES, 1).unwrap().is_empty();
    Verdict {
        pass: violations == 0 && detected,
        detail: format!("{violations} violations over {} plans, planted swap detected {detected}", plans.len()),
    }
}

fn nodal_error(mesh: &DiskMesh, phi: &ScalarField, exact: impl Fn(geom::Point) -> f64) -> f64 {
    let reference = ScalarField::from_fn(mesh, exact);
    let diff: Vec<f64> = phi.values.iter().zip(&reference.values).map(|(a, b)| a - b).collect();
    let masses = mesh.node_masses();
    let mean = diff.iter().zip(&masses).map(|(d, m)| d * m).sum::<f64>() / masses.iter().sum::<f64>();
    diff.iter().fold(0.0_f64, |acc, d| acc.max((d - mean).abs()))
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let solve = |p: f64, h: f64, g: fn(f64) -> f64| {
        let mesh = DiskMesh::build(1.0, h).unwrap();
        let prob = NeumannProblem::from_fn(mesh, radial(p), g).unwrap();
        let phi = solve_neumann(&prob, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        (prob.mesh, phi)
    };
    let mut parts = vec![];
    let mut pass = true;
    let mut record = |name: &str, errs: Vec<f64>| {
        let ratios = [errs[0] / errs[1], errs[1] / errs[2]];
        pass &= ratios.iter().all(|&r| r >= CONVERGENCE_RATIO);
        parts.push(format!("{name} ratios {:.2}/{:.2}", ratios[0], ratios[1]));
    };
    record(
        "cos p=2",
        MESHES
            .iter()
            .map(|&h| {
                let (mesh, phi) = solve(2.0, h, f64::cos);
                nodal_error(&mesh, &phi, |x| x[0])
            })
            .collect(),
    );
    for p in [1.5, 3.0] {
        let errs = MESHES
            .iter()
            .map(|&h| {
                let (mesh, phi) = solve(p, h, |_| 1.0);
                nodal_error(&mesh, &phi, |x| geom::norm(x).powf(p) / p)
            })
            .collect();
        record(&format!("radial p={p}"), errs);
    }
    let (fast, time) = budget(start, Duration::from_secs(120));
    Verdict { pass: pass && fast, detail: format!("{}, {time}", parts.join(", ")) }
}

fn criterion_5(json: &mut Vec<String>) -> Verdict {
    let start = Instant::now();
    let seeds: Vec<u64> = (1..=20).collect();
    let mut failed = vec![];
    let mut worst = 0.0_f64;
    for c in [radial(2.0), radial(3.0)] {
        for lemma in LemmaName::ALL {
            let battery = run_lemma(lemma, &c, &seeds).unwrap();
            for s in &battery.spreads {
                worst = worst.max(s.max_over_median.unwrap_or(0.0));
            }
            if !battery.pass || battery.rows.len() < 20 {
                failed.push(format!("{lemma} p={}", c.p));
            }
            json.push(Report::new("verify-lemma", &(lemma, &c), &[lemma.as_str()], battery.pass, &battery).unwrap().to_json().unwrap());
        }
    }
    let (fast, time) = budget(start, Duration::from_secs(600));
    Verdict {
        pass: failed.is_empty() && worst <= SPREAD_LIMIT && fast,
        detail: format!("{} batteries of 20, failed {failed:?}, worst max/median {worst:.2}, {time}", 2 * LemmaName::ALL.len()),
    }
}

fn smooth_sine(a: f64) -> InstanceFamily {
    InstanceFamily::SmoothSine { amplitude: a, wave: [1.0, 0.0], rings: 19 }
}

fn family_runs(p: f64) -> Runs {
    let config = PipelineConfig::default();
    AMPLITUDES
        .iter()
        .map(|&a| {
            let (l, m) = generate(&smooth_sine(a), 2, 1).unwrap();
            (a, run_linearization(&l, &m, &radial(p), 0.5, &config))
        })
        .collect()
}

fn criterion_6(runs: &[(f64, Runs)], elapsed: Duration) -> Verdict {
    let mut pass = elapsed <= Duration::from_secs(600);
    let mut parts = vec![];
    for (p, rows) in runs {
        let ratios: Vec<f64> = rows.iter().filter_map(|(_, r)| r.as_ref().ok().map(|r| r.linfty.bound_check)).collect();
        let exponent = rows.iter().find_map(|(_, r)| r.as_ref().ok().map(|r| r.linfty.exponent)).unwrap_or(f64::NAN);
        let s = spread(&ratios);
        pass &= ratios.len() == rows.len() && s <= SPREAD_LIMIT && (exponent - 1.0 / (p + 2.0)).abs() < 1e-15;
        let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
        parts.push(format!("p={p}: ratios {} max/min {s:.2}", shown.join("/")));
    }
    Verdict { pass, detail: format!("{}, {:.1}s", parts.join("; "), elapsed.as_secs_f64()) }
}

fn criterion_7(runs: &[(f64, Runs)]) -> Verdict {
    let mut converged = 0;
    let mut worst_margin = f64::INFINITY;
    let mut worst_defect = 0.0_f64;
    let mut pass = true;
    let (l, m) = generate(&InstanceFamily::Identity { rings: 19 }, 2, 1).unwrap();
    let identity = run_linearization(&l, &m, &radial(2.0), 0.5, &PipelineConfig::default());
    let all = runs.iter().flat_map(|(_, rows)| rows.iter().map(|(_, r)| r)).chain(std::iter::once(&identity));
    for rep in all.filter_map(|r| r.as_ref().ok()) {
        converged += 1;
        pass &= rep.ledger.pass;
        worst_margin = worst_margin.min(rep.ledger.margin);
        if let Some(d) = rep.ledger.identity_defect {
            worst_defect = worst_defect.max(d.abs());
        }
    }
    pass &= worst_defect <= IDENTITY_TOL && identity.is_ok();
    Verdict { pass, detail: format!("{converged} converged runs, min margin {worst_margin:.3e}, max p=2 identity defect {worst_defect:.2e}") }
}

fn criterion_8(rows: &Runs, elapsed: Duration) -> Verdict {
    let reps: Vec<&LinearizationReport> = rows.iter().filter_map(|(_, r)| r.as_ref().ok()).collect();
    if reps.len() != rows.len() {
        return Verdict { pass: false, detail: "a run failed".into() };
    }
    let xs: Vec<f64> = reps.iter().map(|r| r.e4.ln()).collect();
    let ys: Vec<f64> = reps.iter().map(|r| r.lhs_main.ln()).collect();
    let slope = geom::fit_slope(&xs, &ys).unwrap_or(f64::NAN);
    let grads: Vec<f64> = reps.iter().map(|r| r.gradient_ratio.unwrap_or(f64::NAN)).collect();
    let s = spread(&grads);
    let d_over_e: Vec<String> = reps.iter().map(|r| format!("{:.1}", r.d4 / r.e4)).collect();
    let n = generate(&smooth_sine(AMPLITUDES[0]), 2, 1).map(|(l, _)| l.len()).unwrap_or(0);
    let pass = slope > SLOPE_FLOOR && s <= SPREAD_LIMIT && elapsed <= Duration::from_secs(1200);
    Verdict {
        pass,
        detail: format!(
            "slope {slope:.3}, gradient constant max/min {s:.2}, D4/E4 {}, n {n}, h {}, {:.1}s",
            d_over_e.join("/"),
            PipelineConfig::default().mesh_h,
            elapsed.as_secs_f64()
        ),
    }
}

fn result_files(p2: &Runs, lemma_json: &[String]) -> Vec<(String, String)> {
    let mut files = vec![];
    for (a, r) in p2 {
        let rep = r.as_ref().ok();
        files.push((format!("linearize_{a}.json"), Report::new("linearize", &smooth_sine(*a), &[], rep.is_some(), rep).unwrap().to_json().unwrap()));
    }
    for (k, j) in lemma_json.iter().enumerate() {
        files.push((format!("lemma_{k}.json"), j.clone()));
    }
    let cost = verify_assumptions(&radial(3.0), COST_SAMPLES, 1);
    files.push(("check_cost.json".into(), Report::new("check-cost", &radial(3.0), &[], cost.pass, &cost).unwrap().to_json().unwrap()));
    files
}

fn criterion_9(first: &[(String, String)], lemma_seeds: usize) -> Verdict {
    let mut json = vec![];
    let seeds: Vec<u64> = (1..=lemma_seeds as u64).collect();
    for c in [radial(2.0), radial(3.0)] {
        for lemma in LemmaName::ALL {
            let battery = run_lemma(lemma, &c, &seeds).unwrap();
            json.push(Report::new("verify-lemma", &(lemma, &c), &[lemma.as_str()], battery.pass, &battery).unwrap().to_json().unwrap());
        }
    }
    let second = result_files(&family_runs(2.0), &json);
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for (dir, files) in dirs.iter().zip([first, &second]) {
        for (name, body) in files {
            write_file(dir.path(), name, body).unwrap();
        }
    }
    let mut differing = vec![];
    for (name, _) in first {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        if a != b {
            differing.push(name.clone());
        }
    }
    Verdict {
        pass: differing.is_empty() && first.len() == second.len(),
        detail: format!("{} result files compared, differing {differing:?}", first.len()),
    }
}

fn main() {
    let mut verdicts: Vec<(usize, Verdict)> = vec![];
    let mut report = |n: usize, v: Verdict| {
        println!("[{}] criterion {n}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        verdicts.push((n, v));
    };
    report(1, criterion_1());
    let mut plans = vec![];
    report(2, criterion_2(&mut plans));
    report(3, criterion_3(&plans));
    report(4, criterion_4());
    let mut lemma_json = vec![];
    report(5, criterion_5(&mut lemma_json));

    let start = Instant::now();
    let runs: Vec<(f64, Runs)> = [2.0, 3.0].iter().map(|&p| (p, family_runs(p))).collect();
    let family_time = start.elapsed();
    report(6, criterion_6(&runs, family_time));
    report(7, criterion_7(&runs));
    report(8, criterion_8(&runs[0].1, family_time / 2));
    let first = result_files(&runs[0].1, &lemma_json);
    report(9, criterion_9(&first, 20));

    let failed: Vec<usize> = verdicts.iter().filter(|(_, v)| !v.pass).map(|(n, _)| *n).collect();
    println!("acceptance: {}/{} criteria pass", verdicts.len() - failed.len(), verdicts.len());
    if !failed.is_empty() {
        println!("failing criteria: {failed:?}");
        std::process::exit(1);
    }
}
