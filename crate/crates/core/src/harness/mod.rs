//! Instance generators, configuration, caching and report output.

mod cache;
mod config;
mod family;
mod lemmas;
mod output;

use serde::Serialize;

pub use cache::{cache_key, cached, canonical_json, Cache};
pub use config::{ExperimentConfig, OutputConfig, ResolutionConfig, ToleranceConfig};
pub use family::{base_quadrature, generate, InstanceFamily, OUTER_RADIUS};
pub use lemmas::{default_seeds, run_lemma, LemmaBattery, LemmaName, LemmaRow, SpreadCheck, BATTERY_RINGS, IDENTITY_TOLERANCE, MAX_OVER_MEDIAN};
pub use output::{resolve_output_dir, schema_markdown, write_file, Report, SuiteConstants, OUTPUT_ROOT_ENV, SCHEMA_VERSION};

use crate::error::Result;
use crate::measure::DiscreteMeasure;
use crate::pipeline::{run_linearization, scaling_study, LinearizationReport, StudyTable};

/// The inputs a computation depends on; the output location is left out so
/// that moving results does not invalidate the cache.
#[derive(Serialize)]
struct Inputs<'a> {
    cost: &'a crate::cost::CostSpec,
    dimension: usize,
    instance: &'a InstanceFamily,
    resolution: &'a ResolutionConfig,
    tolerance: &'a ToleranceConfig,
    seed: u64,
    scales: &'a [f64],
}

fn inputs<'a>(cfg: &'a ExperimentConfig, seed: u64, scales: &'a [f64]) -> Inputs<'a> {
    Inputs {
        cost: &cfg.cost,
        dimension: cfg.dimension,
        instance: &cfg.instance,
        resolution: &cfg.resolution,
        tolerance: &cfg.tolerance,
        seed,
        scales,
    }
}

/// Cache key of the configured run for one seed.
pub fn run_key(cfg: &ExperimentConfig, seed: u64, stage: &str) -> Result<String> {
    let scales: &[f64] = if stage == "study-scaling" { &cfg.scales } else { &[] };
    cache_key(&inputs(cfg, seed, scales), stage)
}

pub fn instance(cfg: &ExperimentConfig, seed: u64) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    generate(&cfg.instance, cfg.dimension, seed)
}

/// `run_linearization` for every configured seed, in seed order.
pub fn linearize(cfg: &ExperimentConfig, cache: Option<&Cache>) -> Result<Vec<(u64, LinearizationReport)>> {
    cfg.validate()?;
    let pipeline = cfg.pipeline();
    cfg.seeds
        .iter()
        .map(|&seed| {
            let key = run_key(cfg, seed, "linearize")?;
            let rep = cached(cache, &key, || {
                let (l, m) = instance(cfg, seed)?;
                run_linearization(&l, &m, &cfg.cost, cfg.tolerance.tau, &pipeline)
            })?;
            Ok((seed, rep))
        })
        .collect()
}

/// Scaling study over `cfg.scales` for the first seed.
pub fn study(cfg: &ExperimentConfig, cache: Option<&Cache>) -> Result<StudyTable> {
    cfg.validate()?;
    let seed = cfg.seeds[0];
    let key = run_key(cfg, seed, "study-scaling")?;
    cached(cache, &key, || {
        let generate_at = |s: f64| generate(&cfg.instance.with_scale(s), cfg.dimension, seed);
        scaling_study(&cfg.scales, generate_at, &cfg.cost, cfg.tolerance.tau, &cfg.pipeline())
    })
}
