//! Seeded batteries for the individual inequality checks. Each battery runs
//! one instance per seed and reports a row per instance plus the spread of
//! its ratio-type columns.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::family::{generate, InstanceFamily};
use crate::cost::{CostFamily, CostSpec};
use crate::error::{Error, Result};
use crate::geom::{self, Point};
use crate::measure::{mollify_boundary, projection_lemma_check, Ball, BoundaryData, DiscreteMeasure};
use crate::ot::{
    add_constant_check, c2measures_check, data_d, data_restriction_check, energy_e, localisation_check, restriction_radii, solve_exact,
    triangle_check, AffineField, Normalization, ADD_CONSTANT_BOUND,
};
use crate::pde::{holder_product_check, regularity_diagnostics, solve_neumann, DiskMesh, NeumannProblem, ScalarField, BETA};
use crate::pipeline::{run_linearization, PipelineConfig};
use crate::trajectory::linfty_displacement;

/// Largest accepted `max / median` of a ratio column across a battery.
pub const MAX_OVER_MEDIAN: f64 = 10.0;
/// Identity defect accepted for the quadratic cost.
pub const IDENTITY_TOLERANCE: f64 = 1e-10;
/// Ring count of the battery instances.
pub const BATTERY_RINGS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LemmaName {
    Triangle,
    Projection,
    Linfty,
    C2measures,
    Localisation,
    DataRestriction,
    Regularity,
    Orthogonality,
}

impl LemmaName {
    pub const ALL: [LemmaName; 8] = [
        Self::Triangle,
        Self::Projection,
        Self::Linfty,
        Self::C2measures,
        Self::Localisation,
        Self::DataRestriction,
        Self::Regularity,
        Self::Orthogonality,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Triangle => "triangle",
            Self::Projection => "projection",
            Self::Linfty => "linfty",
            Self::C2measures => "c2measures",
            Self::Localisation => "localisation",
            Self::DataRestriction => "data-restriction",
            Self::Regularity => "regularity",
            Self::Orthogonality => "orthogonality",
        }
    }

    /// Column names of the battery CSV, after `seed` and before `pass`.
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Self::Triangle => &["w12", "w23", "w13", "rhs", "add_constant_ratio"],
            Self::Projection => &["left", "middle", "right", "lower_ratio", "upper_ratio"],
            Self::Linfty => &["sup_disp", "e4", "d4", "bound_ratio"],
            Self::C2measures => &["lhs", "rhs", "constant", "w", "alpha"],
            Self::Localisation => &["radius", "lhs", "w_local", "rhs", "n_crossing"],
            Self::DataRestriction => &["integral", "d4", "ratio"],
            Self::Regularity => &["energy_ratio", "interior_ratio", "fitted_s", "holder_product_ratio"],
            Self::Orthogonality => &["margin", "lhs_v", "term_a", "term_b", "term_c", "identity_defect"],
        }
    }

    /// Columns whose spread across the battery is checked against [`MAX_OVER_MEDIAN`].
    pub fn ratio_columns(self) -> &'static [&'static str] {
        match self {
            Self::Triangle => &["add_constant_ratio"],
            Self::Projection => &["lower_ratio", "upper_ratio"],
            Self::Linfty => &["bound_ratio"],
            Self::DataRestriction => &["ratio"],
            Self::Regularity => &["energy_ratio", "interior_ratio", "holder_product_ratio"],
            Self::C2measures | Self::Localisation | Self::Orthogonality => &[],
        }
    }
}

impl fmt::Display for LemmaName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LemmaName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|l| l.as_str() == s).ok_or_else(|| {
            let known: Vec<&str> = Self::ALL.iter().map(|l| l.as_str()).collect();
            Error::InvalidInput(format!("unknown lemma `{s}`; expected one of {}", known.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaRow {
    pub seed: u64,
    pub values: Vec<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadCheck {
    pub column: String,
    pub max: f64,
    pub median: f64,
    pub max_over_median: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaBattery {
    pub lemma: LemmaName,
    pub cost: CostSpec,
    pub columns: Vec<String>,
    pub rows: Vec<LemmaRow>,
    pub spreads: Vec<SpreadCheck>,
    pub pass: bool,
}

impl LemmaBattery {
    pub fn n_failed(&self) -> usize {
        self.rows.iter().filter(|r| !r.pass).count()
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("seed,{},pass\n", self.columns.join(","));
        for r in &self.rows {
            let vals: Vec<String> = r.values.iter().map(|v| v.to_string()).collect();
            writeln!(s, "{},{},{}", r.seed, vals.join(","), r.pass).expect("writing to a string");
        }
        s
    }
}

/// Spread of the positive finite values of one column. Columns that are
/// identically zero pass trivially.
fn spread(column: &str, values: &[f64]) -> SpreadCheck {
    let pos: Vec<f64> = values.iter().copied().filter(|v| v.is_finite() && *v > 0.0).collect();
    if pos.is_empty() {
        let pass = values.iter().all(|v| *v == 0.0);
        return SpreadCheck { column: column.into(), max: 0.0, median: 0.0, max_over_median: None, pass };
    }
    let max = pos.iter().copied().fold(0.0, f64::max);
    let median = geom::median(&pos);
    let r = max / median;
    let finite = pos.len() == values.len();
    SpreadCheck { column: column.into(), max, median, max_over_median: Some(r), pass: finite && r <= MAX_OVER_MEDIAN }
}

/// Default battery seeds `1..=20`.
pub fn default_seeds() -> Vec<u64> {
    (1..=20).collect()
}

/// Runs the battery for `lemma` with one instance per seed.
pub fn run_lemma(lemma: LemmaName, c: &CostSpec, seeds: &[u64]) -> Result<LemmaBattery> {
    c.validate()?;
    if seeds.is_empty() {
        return Err(Error::InvalidInput("a battery needs at least one seed".into()));
    }
    let rows: Vec<LemmaRow> = seeds.par_iter().map(|&s| run_row(lemma, c, s)).collect::<Result<_>>()?;
    let columns: Vec<String> = lemma.columns().iter().map(|s| s.to_string()).collect();
    let spreads: Vec<SpreadCheck> = lemma
        .ratio_columns()
        .iter()
        .map(|&col| {
            let k = lemma.columns().iter().position(|&c| c == col).expect("ratio column is a column");
            let vals: Vec<f64> = rows.iter().map(|r| r.values[k]).collect();
            spread(col, &vals)
        })
        .collect();
    let pass = rows.iter().all(|r| r.pass) && spreads.iter().all(|s| s.pass);
    Ok(LemmaBattery { lemma, cost: *c, columns, rows, spreads, pass })
}

fn rng(lemma: LemmaName, seed: u64) -> ChaCha8Rng {
    let tag = LemmaName::ALL.iter().position(|&l| l == lemma).expect("listed") as u64;
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ tag)
}

fn cloud(rng: &mut ChaCha8Rng, n: usize, half: f64) -> DiscreteMeasure {
    let pts = (0..n).map(|_| [rng.random_range(-half..half), rng.random_range(-half..half)]).collect();
    DiscreteMeasure::uniform(2, pts, 1.0).expect("positive mass")
}

fn unit(rng: &mut ChaCha8Rng) -> Point {
    let t = rng.random_range(0.0..std::f64::consts::TAU);
    [t.cos(), t.sin()]
}

/// A smooth-sine instance with random amplitude in `[0.05, 0.2]` and random wave direction.
fn smooth_instance(rng: &mut ChaCha8Rng, rings: usize) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    let amplitude = rng.random_range(0.05..0.2);
    let wave = unit(rng);
    generate(&InstanceFamily::SmoothSine { amplitude, wave, rings }, 2, 0)
}

fn run_row(lemma: LemmaName, c: &CostSpec, seed: u64) -> Result<LemmaRow> {
    let mut rng = rng(lemma, seed);
    let (values, pass) = match lemma {
        LemmaName::Triangle => {
            let (a, b, d) = (cloud(&mut rng, 8, 1.5), cloud(&mut rng, 8, 1.5), cloud(&mut rng, 8, 1.5));
            let t = triangle_check(&a, &b, &d, 0.5, c)?;
            let k = add_constant_check(&a, &b, c)?;
            let ratio = k.ratio.unwrap_or(0.0);
            (vec![t.w12, t.w23, t.w13, t.rhs, ratio], t.pass && k.pass && ratio <= ADD_CONSTANT_BOUND)
        }
        LemmaName::Projection => {
            let radius = 2.0;
            let eps = crate::measure::PROJECTION_EPS;
            let n = 40;
            let mut g = DiscreteMeasure::empty(2);
            for _ in 0..n {
                let r = radius * rng.random_range(1.0 - eps..1.0 + eps);
                g.push(geom::scale(r, unit(&mut rng)), rng.random_range(0.5..1.5) / n as f64);
            }
            let p = projection_lemma_check(&g, radius, 32, c.p)?;
            (vec![p.left, p.middle, p.right, p.lower_ratio, p.upper_ratio], p.pass)
        }
        LemmaName::Linfty => {
            let (l, m) = smooth_instance(&mut rng, BATTERY_RINGS)?;
            let plan = solve_exact(&l, &m, c)?;
            let e4 = energy_e(&plan, 4.0, c, Normalization::ScaleInvariant);
            let d4 = data_d(&l, &m, 4.0, c, BATTERY_RINGS)?;
            let r = linfty_displacement(&plan, c.p, e4 + d4);
            (vec![r.sup_disp, e4, d4, r.bound_check], r.stays_in_b4 && r.bound_check.is_finite())
        }
        LemmaName::C2measures => {
            let (_, m) = smooth_instance(&mut rng, BATTERY_RINGS)?;
            let alpha = rng.random_range(0.5..=1.0);
            let xi = AffineField { slope: geom::scale(rng.random_range(0.5..2.0), unit(&mut rng)), offset: rng.random_range(-1.0..1.0) };
            let r = c2measures_check(&xi, &m, 2.0, alpha, c, BATTERY_RINGS)?;
            (vec![r.lhs, r.rhs, r.constant, r.w, alpha], r.pass)
        }
        LemmaName::Localisation => {
            let (l, m) = smooth_instance(&mut rng, BATTERY_RINGS)?;
            let radius = rng.random_range(2.0..3.0);
            let plan = solve_exact(&l, &m, c)?;
            let e = energy_e(&plan, 4.0, c, Normalization::PlainVolume) + data_d(&l, &m, 4.0, c, BATTERY_RINGS)?;
            let r = localisation_check(&plan, radius, c, 0.1, 0.5, e)?;
            (vec![radius, r.lhs, r.w_local, r.rhs, r.n_crossing as f64], r.pass)
        }
        LemmaName::DataRestriction => {
            let (_, m) = smooth_instance(&mut rng, BATTERY_RINGS)?;
            let r = data_restriction_check(&m, c, &restriction_radii(), BATTERY_RINGS)?;
            (vec![r.integral_estimate, r.d4, r.ratio.unwrap_or(0.0)], r.pass)
        }
        LemmaName::Regularity => regularity_row(&mut rng, c)?,
        LemmaName::Orthogonality => {
            let (l, m) = smooth_instance(&mut rng, BATTERY_RINGS)?;
            let cfg = PipelineConfig { resolution: BATTERY_RINGS, mesh_h: 0.2, ..PipelineConfig::default() };
            let rep = run_linearization(&l, &m, c, 0.5, &cfg)?;
            let g = &rep.ledger;
            let defect = g.identity_defect.unwrap_or(0.0);
            let exact = c.family != CostFamily::Radial || c.p != 2.0 || defect.abs() <= IDENTITY_TOLERANCE;
            (vec![g.margin, g.lhs_v, g.term_a, g.term_b, g.term_c, defect], g.pass && exact)
        }
    };
    Ok(LemmaRow { seed, values, pass })
}

/// Random low-mode boundary flux on `B_2`, its solution, and a mollified ladder.
fn regularity_row(rng: &mut ChaCha8Rng, c: &CostSpec) -> Result<(Vec<f64>, bool)> {
    let radius = 2.0;
    let n_theta = 64;
    let mesh = DiskMesh::build(radius, 0.2)?;
    let coeffs: Vec<(f64, f64)> = (1..=3).map(|k| (rng.random_range(-1.0..1.0) / k as f64, rng.random_range(-1.0..1.0) / k as f64)).collect();
    let mut data = BoundaryData::zeros(radius, 2, n_theta);
    let w = data.bin_measure();
    for k in 0..n_theta {
        let t = data.bin_center(k);
        let g: f64 = coeffs.iter().enumerate().map(|(j, (a, b))| a * ((j + 1) as f64 * t).cos() + b * ((j + 1) as f64 * t).sin()).sum();
        data.masses[k] = g * w;
    }
    let solve = |d: &BoundaryData| -> Result<(NeumannProblem, ScalarField)> {
        let prob = NeumannProblem::from_boundary_data(mesh.clone(), *c, d)?;
        let phi = solve_neumann(&prob, 1e-8, crate::pde::DEFAULT_MAX_ITER)?;
        Ok((prob, phi))
    };
    let (prob, phi) = solve(&data)?;
    let ladder: Vec<(f64, ScalarField)> = [0.4, 0.2, 0.1]
        .par_iter()
        .map(|&r| Ok((r, solve(&mollify_boundary(&data, r)?)?.1)))
        .collect::<Result<_>>()?;
    let d = regularity_diagnostics(&prob, &phi, &ladder)?;
    let h = holder_product_check(&phi, &mesh, c, &Ball::centered(radius - 0.5), BETA)?;
    let vals = vec![
        d.energy_ratio.unwrap_or(f64::NAN),
        d.interior_ratio.unwrap_or(f64::NAN),
        d.fitted_s.unwrap_or(f64::NAN),
        h.ratio.unwrap_or(f64::NAN),
    ];
    let pass = vals.iter().all(|v| v.is_finite()) && d.fitted_s.is_some_and(|s| s > 0.0);
    Ok((vals, pass))
}
