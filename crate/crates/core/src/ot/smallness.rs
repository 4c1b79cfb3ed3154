//! The local energy `E(R)` and the data term `D(R)`.

use serde::{Deserialize, Serialize};

use super::{transport_cost, TransportPlan};
use crate::cost::CostSpec;
use crate::error::{Error, Result};
use crate::geom;
use crate::measure::{lebesgue_quadrature, Ball, DiscreteMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide by `|B_R| R^p`.
    #[default]
    ScaleInvariant,
    /// Divide by `|B_R|`.
    PlainVolume,
}

/// Which transport functional enters `D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataMetric {
    /// `W_c` for the configured cost.
    #[default]
    Cost,
    /// `W_p^p`, the transport cost of `|z|^p`.
    PowerP,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallnessReport {
    pub normalization: Normalization,
    pub metric: DataMetric,
    /// `(R, E(R))`.
    pub e_values: Vec<(f64, f64)>,
    /// `(R, D(R))`.
    pub d_values: Vec<(f64, f64)>,
}

/// Cost of the entries with source or target strictly inside `B_R`.
pub fn local_cost(plan: &TransportPlan, radius: f64, c: &CostSpec) -> f64 {
    let ball = Ball::centered(radius);
    plan.triples().filter(|(x, y, _)| ball.contains(*x) || ball.contains(*y)).map(|(x, y, m)| m * c.eval(geom::sub(x, y))).sum()
}

/// `E(R)` under the chosen normalisation.
pub fn energy_e(plan: &TransportPlan, radius: f64, c: &CostSpec, norm: Normalization) -> f64 {
    let vol = Ball::centered(radius).volume(plan.dim());
    let denom = match norm {
        Normalization::ScaleInvariant => vol * radius.powf(c.p),
        Normalization::PlainVolume => vol,
    };
    local_cost(plan, radius, c) / denom
}

/// `D(R)` with `W_c` as transport functional.
pub fn data_d(lambda: &DiscreteMeasure, mu: &DiscreteMeasure, radius: f64, c: &CostSpec, resolution: usize) -> Result<f64> {
    data_d_with(lambda, mu, radius, c, resolution, DataMetric::Cost)
}

pub fn data_d_with(
    lambda: &DiscreteMeasure,
    mu: &DiscreteMeasure,
    radius: f64,
    c: &CostSpec,
    resolution: usize,
    metric: DataMetric,
) -> Result<f64> {
    Ok(data_term(lambda, radius, c, resolution, metric)? + data_term(mu, radius, c, resolution, metric)?)
}

/// `W(nu|B_R, kappa dx|B_R) / |B_R| + R^p kappa^(1-p) |kappa - 1|^p` for one measure.
pub fn data_term(nu: &DiscreteMeasure, radius: f64, c: &CostSpec, resolution: usize, metric: DataMetric) -> Result<f64> {
    let (w, kappa) = local_uniform_distance(nu, radius, c, resolution, metric)?;
    let vol = Ball::centered(radius).volume(nu.dim);
    Ok(w / vol + radius.powf(c.p) * kappa.powf(1.0 - c.p) * (kappa - 1.0).abs().powf(c.p))
}

/// `(W(nu|B_R, kappa dx|B_R), kappa)`.
pub fn local_uniform_distance(nu: &DiscreteMeasure, radius: f64, c: &CostSpec, resolution: usize, metric: DataMetric) -> Result<(f64, f64)> {
    let ball = Ball::centered(radius);
    let local = nu.restrict(&ball);
    let kappa = local.total_mass() / ball.volume(nu.dim);
    if kappa <= 0.0 {
        return Err(Error::invalid(format!("no mass inside B_{radius}")));
    }
    let uniform = lebesgue_quadrature(&ball, nu.dim, resolution)?.scaled(kappa);
    let w = match metric {
        DataMetric::Cost => transport_cost(&local, &uniform, c)?,
        DataMetric::PowerP => {
            let plain = CostSpec::radial(c.p, c.lambda_cap)?;
            c.p * transport_cost(&local, &uniform, &plain)?
        }
    };
    Ok((w, kappa))
}
