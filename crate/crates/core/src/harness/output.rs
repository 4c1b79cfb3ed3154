use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::cache::cache_key;
use super::lemmas::{LemmaName, BATTERY_RINGS, IDENTITY_TOLERANCE, MAX_OVER_MEDIAN};
use crate::error::{Error, Result};
use crate::measure::PROJECTION_EPS;
use crate::ot::{ADD_CONSTANT_BOUND, CYCLIC_TOLERANCE, DATA_RESTRICTION_BOUND, INEQUALITY_SLACK};
use crate::pde::BETA;
use crate::pipeline::{LEDGER_SLACK, TERM_BUDGET_C};

pub const SCHEMA_VERSION: u32 = 1;
/// Overrides the root that relative output directories resolve against.
pub const OUTPUT_ROOT_ENV: &str = "LINOT_OUTPUT_ROOT";

/// Frozen constants used by the checks, embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConstants {
    pub ledger_slack: f64,
    pub term_budget_c: f64,
    pub add_constant_bound: f64,
    pub data_restriction_bound: f64,
    pub inequality_slack: f64,
    pub cyclic_tolerance: f64,
    pub projection_eps: f64,
    pub holder_beta: f64,
    pub max_over_median: f64,
    pub identity_tolerance: f64,
    pub battery_rings: usize,
}

impl SuiteConstants {
    pub fn current() -> Self {
        Self {
            ledger_slack: LEDGER_SLACK,
            term_budget_c: TERM_BUDGET_C,
            add_constant_bound: ADD_CONSTANT_BOUND,
            data_restriction_bound: DATA_RESTRICTION_BOUND,
            inequality_slack: INEQUALITY_SLACK,
            cyclic_tolerance: CYCLIC_TOLERANCE,
            projection_eps: PROJECTION_EPS,
            holder_beta: BETA,
            max_over_median: MAX_OVER_MEDIAN,
            identity_tolerance: IDENTITY_TOLERANCE,
            battery_rings: BATTERY_RINGS,
        }
    }
}

/// Versioned wrapper around every JSON result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report<T> {
    pub schema_version: u32,
    /// Which command produced the result.
    pub kind: String,
    /// Cache key of the inputs.
    pub config_hash: String,
    /// Names of the checks the result bears on.
    pub checks: Vec<String>,
    pub constants: SuiteConstants,
    pub pass: bool,
    pub result: T,
}

impl<T: Serialize> Report<T> {
    pub fn new<C: Serialize + ?Sized>(kind: &str, config: &C, checks: &[&str], pass: bool, result: T) -> Result<Self> {
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            kind: kind.into(),
            config_hash: cache_key(config, kind)?,
            checks: checks.iter().map(|s| s.to_string()).collect(),
            constants: SuiteConstants::current(),
            pass,
            result,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }
}

/// `dir` itself when absolute, otherwise `dir` under the output root
/// (the environment override, or the working directory).
pub fn resolve_output_dir(dir: &Path) -> PathBuf {
    if dir.is_absolute() {
        return dir.to_path_buf();
    }
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(dir),
        _ => dir.to_path_buf(),
    }
}

/// Writes `contents` to `dir/name` through a temporary file.
pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, &path)?;
    Ok(path)
}

/// Documentation of every CSV and JSON file the harness writes.
pub fn schema_markdown() -> String {
    let mut s = String::new();
    s.push_str("# Output schema\n\n");
    s.push_str(&format!("JSON reports carry `schema_version = {SCHEMA_VERSION}`.\n\n"));
    s.push_str("## JSON reports\n\n");
    s.push_str("Every `*.json` file is an object with these fields:\n\n");
    s.push_str("| field | meaning |\n|---|---|\n");
    for (k, v) in [
        ("schema_version", "integer format version"),
        ("kind", "producing command: check-cost, ot-solve, verify-lemma, linearize, study-scaling, report"),
        ("config_hash", "SHA-256 of the command name and the canonical JSON of its inputs"),
        ("checks", "names of the checks the result bears on"),
        ("constants", "frozen suite constants in force"),
        ("pass", "overall verdict"),
        ("result", "command-specific payload"),
    ] {
        s.push_str(&format!("| `{k}` | {v} |\n"));
    }
    s.push_str("\n## study_scaling.csv\n\n");
    s.push_str("`scale,E4,D4,lhs_main,sup_disp,R_selected`: one row per scale; failed scales keep only `scale`.\n\n");
    s.push_str("## study_scaling.dat\n\nTwo whitespace-separated columns `log_E4 log_lhs_main`, with a `#` header.\n\n");
    s.push_str("## plan.csv\n\n`i,j,mass`: one row per plan entry, indices into the source and target CSV rows.\n\n");
    s.push_str("## radius_scores.csv\n\nScores of the candidate radii scanned by `linearize`.\n\n");
    s.push_str("## lemma_<name>.csv\n\n`seed,<columns>,pass`, one row per battery instance:\n\n");
    s.push_str("| lemma | columns | spread-checked |\n|---|---|---|\n");
    for l in LemmaName::ALL {
        s.push_str(&format!("| `{}` | {} | {} |\n", l, l.columns().join(", "), l.ratio_columns().join(", ")));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_lists_every_lemma() {
        let s = schema_markdown();
        for l in LemmaName::ALL {
            assert!(s.contains(&format!("`{l}`")));
        }
    }

    #[test]
    fn report_hash_tracks_config() {
        let a = Report::new("linearize", &serde_json::json!({"p": 2.0}), &[], true, 1).unwrap();
        let b = Report::new("linearize", &serde_json::json!({"p": 3.0}), &[], true, 1).unwrap();
        assert_ne!(a.config_hash, b.config_hash);
        assert!(a.to_json().unwrap().contains("\"schema_version\": 1"));
    }
}
