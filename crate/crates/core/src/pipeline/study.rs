use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_linearization, LinearizationReport, PipelineConfig};
use crate::cost::CostSpec;
use crate::error::{Error, Result};
use crate::geom;
use crate::measure::DiscreteMeasure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub scale: f64,
    pub report: Option<LinearizationReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyTable {
    pub rows: Vec<StudyRow>,
    /// Slope of `log lhs_main` against `log E(4)`; `None` when fewer than two
    /// rows have both positive.
    pub slope: Option<f64>,
}

impl StudyTable {
    pub fn reports(&self) -> impl Iterator<Item = (f64, &LinearizationReport)> {
        self.rows.iter().filter_map(|r| r.report.as_ref().map(|rep| (r.scale, rep)))
    }

    /// `scale,E4,D4,lhs_main,sup_disp,R_selected`; failed rows keep only the scale.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("scale,E4,D4,lhs_main,sup_disp,R_selected\n");
        for row in &self.rows {
            match &row.report {
                Some(r) => writeln!(s, "{},{},{},{},{},{}", row.scale, r.e4, r.d4, r.lhs_main, r.linfty.sup_disp, r.r_selected),
                None => writeln!(s, "{},,,,,", row.scale),
            }
            .expect("writing to a string");
        }
        s
    }

    /// Two columns, `log E4` and `log lhs_main`, for rows where both are positive.
    pub fn to_dat(&self) -> String {
        let mut s = String::from("# log_E4 log_lhs_main\n");
        for (_, r) in self.reports() {
            if r.e4 > 0.0 && r.lhs_main > 0.0 {
                writeln!(s, "{} {}", r.e4.ln(), r.lhs_main.ln()).expect("writing to a string");
            }
        }
        s
    }
}

/// Runs the pipeline on the instance produced for each scale. Per-scale
/// failures are recorded in the row; rows keep the order of `scales`.
pub fn scaling_study<G>(scales: &[f64], generate: G, c: &CostSpec, tau: f64, config: &PipelineConfig) -> Result<StudyTable>
where
    G: Fn(f64) -> Result<(DiscreteMeasure, DiscreteMeasure)> + Sync,
{
    if scales.len() < 3 {
        return Err(Error::invalid("a scaling study needs at least 3 scales"));
    }
    let rows: Vec<StudyRow> = scales
        .par_iter()
        .map(|&scale| {
            let run = generate(scale).and_then(|(l, m)| run_linearization(&l, &m, c, tau, config));
            match run {
                Ok(r) => StudyRow { scale, report: Some(r), error: None },
                Err(e) => StudyRow { scale, report: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| r.report.as_ref())
        .filter(|r| r.e4 > 0.0 && r.lhs_main > 0.0)
        .map(|r| (r.e4.ln(), r.lhs_main.ln()))
        .unzip();
    let slope = if xs.len() >= 2 { geom::fit_slope(&xs, &ys) } else { None };
    Ok(StudyTable { rows, slope })
}
