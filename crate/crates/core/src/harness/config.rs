use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::family::InstanceFamily;
use crate::cost::CostSpec;
use crate::error::{Error, Result};
use crate::ot::{DataMetric, Normalization};
use crate::pde::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::pipeline::PipelineConfig;
use crate::trajectory::default_candidates;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResolutionConfig {
    /// Ring count of the instance quadrature and of the data term.
    pub rings: usize,
    pub mesh_h: f64,
    pub n_theta: usize,
    pub candidates: Vec<f64>,
    pub mollify_bins: f64,
}

impl Default for ResolutionConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self { rings: p.resolution, mesh_h: p.mesh_h, n_theta: p.n_theta, candidates: default_candidates(), mollify_bins: p.mollify_bins }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceConfig {
    /// Weight of `E` in the term budget.
    pub tau: f64,
    pub gate: f64,
    pub solver_tol: f64,
    pub max_iter: usize,
    pub normalization: Normalization,
    pub metric: DataMetric,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            tau: 0.5,
            gate: 0.5,
            solver_tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            normalization: Normalization::ScaleInvariant,
            metric: DataMetric::Cost,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Relative paths resolve against the output root.
    pub dir: PathBuf,
    /// Directory of the content-addressed cache; `None` disables caching.
    pub cache: Option<PathBuf>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("results"), cache: None }
    }
}

/// One experiment, read from TOML.
///
/// ```toml
/// dimension = 2
/// seeds = [1, 2, 3]
///
/// [cost]
/// family = "radial"
/// p = 2.0
/// lambda = 2.0
///
/// [instance]
/// kind = "smooth_sine"
/// amplitude = 0.1
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub cost: CostSpec,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    pub instance: InstanceFamily,
    #[serde(default)]
    pub resolution: ResolutionConfig,
    #[serde(default)]
    pub tolerance: ToleranceConfig,
    pub seeds: Vec<u64>,
    /// Scales for `study scaling`.
    #[serde(default)]
    pub scales: Vec<f64>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_dimension() -> usize {
    2
}

impl ExperimentConfig {
    pub fn new(cost: CostSpec, instance: InstanceFamily, seeds: Vec<u64>) -> Self {
        Self {
            cost,
            dimension: 2,
            instance,
            resolution: ResolutionConfig::default(),
            tolerance: ToleranceConfig::default(),
            seeds,
            scales: Vec::new(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Serde(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.cost.validate()?;
        if !matches!(self.dimension, 1 | 2) {
            return Err(Error::InvalidInput(format!("dimension {} not in {{1, 2}}", self.dimension)));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidInput("at least one explicit seed is required".into()));
        }
        let r = &self.resolution;
        if r.rings == 0 || !(r.mesh_h > 0.0) || r.n_theta == 0 || !(r.mollify_bins > 0.0) {
            return Err(Error::InvalidInput("resolutions must be positive".into()));
        }
        if self.scales.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidInput("scales must be finite".into()));
        }
        if self.instance.rings() != r.rings {
            return Err(Error::InvalidInput(format!(
                "instance rings {} differ from resolution rings {}",
                self.instance.rings(),
                r.rings
            )));
        }
        self.pipeline().validate()
    }

    pub fn pipeline(&self) -> PipelineConfig {
        let r = &self.resolution;
        let t = &self.tolerance;
        PipelineConfig {
            mesh_h: r.mesh_h,
            n_theta: r.n_theta,
            mollify_bins: r.mollify_bins,
            gate: t.gate,
            resolution: r.rings,
            candidates: r.candidates.clone(),
            tol: t.solver_tol,
            max_iter: t.max_iter,
            normalization: t.normalization,
            metric: t.metric,
            time_resolved: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_toml_fills_defaults() {
        let cfg = ExperimentConfig::from_toml(
            "seeds = [3]\n[cost]\nfamily = \"radial\"\np = 2.0\nlambda = 2.0\n[instance]\nkind = \"identity\"\n",
        )
        .unwrap();
        assert_eq!(cfg.dimension, 2);
        assert_eq!(cfg.resolution, ResolutionConfig::default());
        assert_eq!(cfg.instance, InstanceFamily::Identity { rings: 19 });
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_and_missing_seeds_are_rejected() {
        let base = "[cost]\nfamily = \"radial\"\np = 2.0\nlambda = 2.0\n[instance]\nkind = \"identity\"\n";
        assert!(ExperimentConfig::from_toml(base).is_err());
        assert!(ExperimentConfig::from_toml(&format!("seeds = []\n{base}")).is_err());
        assert!(ExperimentConfig::from_toml(&format!("seeds = [1]\ncolour = 3\n{base}")).is_err());
    }
}
