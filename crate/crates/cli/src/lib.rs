//! Command-line front end. Exit codes: 0 pass, 1 error, 2 a check failed,
//! 64 usage error.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use linot::cost::{verify_assumptions, CostFamily, CostSpec};
use linot::harness::{
    self, resolve_output_dir, run_lemma, schema_markdown, write_file, Cache, ExperimentConfig, InstanceFamily, LemmaName, Report,
};
use linot::measure::DiscreteMeasure;
use linot::ot::solve_exact;
use linot::Error;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "linot", version, about = "Numerical laboratory for linearised optimal transport")]
struct Cli {
    /// Output directory; relative paths resolve under $LINOT_OUTPUT_ROOT when set.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the structural inequalities of a cost on random samples.
    CheckCost(CheckCostArgs),
    /// Exact optimal transport between two CSV measures or a generated instance.
    Ot {
        #[command(subcommand)]
        command: OtCommand,
    },
    /// Run an inequality battery.
    Verify {
        #[command(subcommand)]
        command: VerifyCommand,
    },
    /// Run the linearisation pipeline once per seed.
    Linearize(RunArgs),
    /// Sweep the instance scale and fit the decay exponent.
    Study {
        #[command(subcommand)]
        command: StudyCommand,
    },
    /// Summarise the JSON reports in the output directory and write SCHEMA.md.
    Report,
}

#[derive(Subcommand, Debug)]
enum OtCommand {
    Solve(OtSolveArgs),
}

#[derive(Subcommand, Debug)]
enum VerifyCommand {
    Lemma(LemmaArgs),
}

#[derive(Subcommand, Debug)]
enum StudyCommand {
    Scaling(StudyArgs),
}

#[derive(Args, Debug, Clone)]
struct CostArgs {
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Ellipticity constant; defaults to the certified value for the family and `p`.
    #[arg(long)]
    lambda: Option<f64>,
    /// Anisotropy matrix `a11,a12,a21,a22`; selects the anisotropic family.
    #[arg(long, value_delimiter = ',')]
    matrix: Option<Vec<f64>>,
}

impl CostArgs {
    fn spec(&self, family: CostFamily) -> anyhow::Result<CostSpec> {
        let family = if self.matrix.is_some() { CostFamily::Anisotropic } else { family };
        let lambda = self.lambda.unwrap_or_else(|| default_lambda(family, self.p));
        let spec = match (family, &self.matrix) {
            (CostFamily::Radial, _) => CostSpec::radial(self.p, lambda)?,
            (CostFamily::Anisotropic, Some(m)) if m.len() != 4 => bail!("--matrix needs four entries, got {}", m.len()),
            (CostFamily::Anisotropic, Some(m)) => CostSpec::anisotropic(self.p, [[m[0], m[1]], [m[2], m[3]]], lambda)?,
            (CostFamily::Anisotropic, None) => bail!("the anisotropic family needs --matrix"),
        };
        Ok(spec)
    }
}

/// Certified constants: 2 for the quadratic radial cost, 8 for other radial
/// exponents in the tested range, 64 for anisotropic costs.
fn default_lambda(family: CostFamily, p: f64) -> f64 {
    match family {
        CostFamily::Radial if p == 2.0 => 2.0,
        CostFamily::Radial => 8.0,
        CostFamily::Anisotropic => 64.0,
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum CostFamilyArg {
    Radial,
    Anisotropic,
}

impl From<CostFamilyArg> for CostFamily {
    fn from(f: CostFamilyArg) -> Self {
        match f {
            CostFamilyArg::Radial => CostFamily::Radial,
            CostFamilyArg::Anisotropic => CostFamily::Anisotropic,
        }
    }
}

#[derive(Args, Debug)]
struct CheckCostArgs {
    #[arg(long, value_enum, default_value = "radial")]
    family: CostFamilyArg,
    #[command(flatten)]
    cost: CostArgs,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum InstanceArg {
    Identity,
    SmoothSine,
    AtomicCloud,
    AnnulusNoise,
}

#[derive(Args, Debug, Clone)]
struct InstanceArgs {
    /// TOML experiment file; instance and cost flags are ignored when given.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "smooth-sine")]
    family: InstanceArg,
    /// Scale parameter of the family (amplitude or jitter).
    #[arg(long, default_value_t = 0.1)]
    scale: f64,
    #[arg(long, default_value_t = 19)]
    rings: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    seeds: Vec<u64>,
    #[command(flatten)]
    cost: CostArgs,
    /// Directory of the result cache.
    #[arg(long)]
    cache: Option<PathBuf>,
}

impl InstanceArgs {
    fn experiment(&self) -> anyhow::Result<ExperimentConfig> {
        if let Some(path) = &self.config {
            return ExperimentConfig::load(path).with_context(|| format!("reading {}", path.display()));
        }
        let rings = self.rings;
        let s = self.scale;
        let instance = match self.family {
            InstanceArg::Identity => InstanceFamily::Identity { rings },
            InstanceArg::SmoothSine => InstanceFamily::SmoothSine { amplitude: s, wave: [1.0, 0.0], rings },
            InstanceArg::AtomicCloud => InstanceFamily::AtomicCloud { jitter: s, rings },
            InstanceArg::AnnulusNoise => InstanceFamily::AnnulusNoise { amplitude: s, rings },
        };
        let mut cfg = ExperimentConfig::new(self.cost.spec(CostFamily::Radial)?, instance, self.seeds.clone());
        cfg.dimension = self.dim;
        cfg.resolution.rings = rings;
        cfg.validate()?;
        Ok(cfg)
    }

    fn cache(&self, cfg: &ExperimentConfig) -> anyhow::Result<Option<Cache>> {
        let dir = self.cache.clone().or_else(|| cfg.output.cache.clone());
        Ok(dir.map(|d| Cache::new(resolve_output_dir(&d))).transpose()?)
    }
}

#[derive(Args, Debug)]
struct OtSolveArgs {
    /// Source measure CSV (`x[,y],weight`).
    #[arg(long, requires = "target")]
    source: Option<PathBuf>,
    #[arg(long, requires = "source")]
    target: Option<PathBuf>,
    #[command(flatten)]
    instance: InstanceArgs,
}

#[derive(Args, Debug)]
struct LemmaArgs {
    #[arg(value_parser = parse_lemma)]
    name: LemmaName,
    /// Number of battery instances, seeded `1..=N`.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[command(flatten)]
    cost: CostArgs,
}

fn parse_lemma(s: &str) -> Result<LemmaName, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    instance: InstanceArgs,
}

#[derive(Args, Debug)]
struct StudyArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Overrides the scales of the configuration file.
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<f64>>,
}

struct Outcome {
    pass: bool,
    summary: String,
}

/// Parses `argv` (including the program name), runs the command and returns the exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let out = resolve_output_dir(cli.out.as_deref().unwrap_or(Path::new("results")));
    match execute(cli.command, &out) {
        Ok(o) => {
            println!("{}", o.summary);
            if o.pass {
                EXIT_PASS
            } else {
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}

fn write_report<T: serde::Serialize, C: serde::Serialize + ?Sized>(
    out: &Path,
    name: &str,
    kind: &str,
    config: &C,
    checks: &[&str],
    pass: bool,
    result: T,
) -> anyhow::Result<()> {
    let report = Report::new(kind, config, checks, pass, result)?;
    write_file(out, name, &report.to_json()?)?;
    write_file(out, "SCHEMA.md", &schema_markdown())?;
    Ok(())
}

fn execute(command: Command, out: &Path) -> anyhow::Result<Outcome> {
    match command {
        Command::CheckCost(a) => check_cost(a, out),
        Command::Ot { command: OtCommand::Solve(a) } => ot_solve(a, out),
        Command::Verify { command: VerifyCommand::Lemma(a) } => verify_lemma(a, out),
        Command::Linearize(a) => linearize(a, out),
        Command::Study { command: StudyCommand::Scaling(a) } => study(a, out),
        Command::Report => report(out),
    }
}

fn check_cost(a: CheckCostArgs, out: &Path) -> anyhow::Result<Outcome> {
    let spec = a.cost.spec(a.family.into())?;
    let rep = verify_assumptions(&spec, a.samples, a.seed);
    let failed: Vec<&str> = rep.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    let summary = if rep.pass {
        format!("check-cost: pass ({} checks, {} samples, p = {}, lambda = {})", rep.checks.len(), a.samples, spec.p, spec.lambda_cap)
    } else {
        format!("check-cost: FAIL ({})", failed.join(", "))
    };
    let inputs = (spec, a.samples, a.seed);
    write_report(out, "check_cost.json", "check-cost", &inputs, &["cost-assumptions"], rep.pass, &rep)?;
    Ok(Outcome { pass: rep.pass, summary })
}

fn read_measure(path: &Path) -> anyhow::Result<DiscreteMeasure> {
    let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(DiscreteMeasure::read_csv(f)?)
}

fn ot_solve(a: OtSolveArgs, out: &Path) -> anyhow::Result<Outcome> {
    let (lambda, mu, cost, label) = match (&a.source, &a.target) {
        (Some(s), Some(t)) => {
            let cost = a.instance.cost.spec(CostFamily::Radial)?;
            (read_measure(s)?, read_measure(t)?, cost, format!("{} -> {}", s.display(), t.display()))
        }
        _ => {
            let cfg = a.instance.experiment()?;
            let seed = cfg.seeds[0];
            let (l, m) = harness::instance(&cfg, seed)?;
            (l, m, cfg.cost, format!("{} seed {seed}", cfg.instance.name()))
        }
    };
    let plan = solve_exact(&lambda, &mu, &cost)?;
    let mut csv = Vec::new();
    plan.write_csv(&mut csv)?;
    write_file(out, "plan.csv", std::str::from_utf8(&csv)?)?;
    let header = plan.header_json(&cost);
    let inputs = serde_json::json!({ "source": &lambda, "target": &mu, "cost": cost });
    write_report(out, "ot_solve.json", "ot-solve", &inputs, &["exact-transport"], true, &header)?;
    Ok(Outcome { pass: true, summary: format!("ot solve: {label}: cost {:e}, {} entries", plan.cost(&cost), plan.entries.len()) })
}

fn verify_lemma(a: LemmaArgs, out: &Path) -> anyhow::Result<Outcome> {
    if a.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let cost = a.cost.spec(CostFamily::Radial)?;
    let seeds: Vec<u64> = (1..=a.seeds).collect();
    let battery = run_lemma(a.name, &cost, &seeds)?;
    let stem = format!("lemma_{}", a.name.as_str().replace('-', "_"));
    write_file(out, &format!("{stem}.csv"), &battery.to_csv())?;
    let inputs = (a.name, cost, &seeds);
    write_report(out, &format!("{stem}.json"), "verify-lemma", &inputs, &[a.name.as_str()], battery.pass, &battery)?;
    let spreads: Vec<String> =
        battery.spreads.iter().map(|s| format!("{} max/median {}", s.column, s.max_over_median.map_or("-".into(), |r| format!("{r:.3}")))).collect();
    let verdict = if battery.pass { "pass" } else { "FAIL" };
    let summary = format!(
        "verify lemma {}: {verdict} ({}/{} instances pass{}{})",
        a.name,
        battery.rows.len() - battery.n_failed(),
        battery.rows.len(),
        if spreads.is_empty() { "" } else { "; " },
        spreads.join(", ")
    );
    Ok(Outcome { pass: battery.pass, summary })
}

/// A violated smallness gate counts as a failed check rather than an error.
fn gate_violation(e: &Error) -> Option<&Error> {
    match e {
        Error::Gate { .. } => Some(e),
        Error::Stage { source, .. } => gate_violation(source),
        _ => None,
    }
}

fn linearize(a: RunArgs, out: &Path) -> anyhow::Result<Outcome> {
    let cfg = a.instance.experiment()?;
    let cache = a.instance.cache(&cfg)?;
    let runs = match harness::linearize(&cfg, cache.as_ref()) {
        Ok(r) => r,
        Err(e) => {
            if let Some(g) = gate_violation(&e) {
                return Ok(Outcome { pass: false, summary: format!("linearize: FAIL ({g})") });
            }
            return Err(e.into());
        }
    };
    let pass = runs.iter().all(|(_, r)| r.ledger.pass && r.v_comparison.pass);
    let scores: String = runs.first().map(|(_, r)| r.radius_selection.to_csv()).unwrap_or_default();
    write_file(out, "radius_scores.csv", &scores)?;
    let checks = ["main-estimate", "orthogonality", "term-estimates", "linfty"];
    write_report(out, "linearize.json", "linearize", &cfg, &checks, pass, &runs)?;
    let (seed, r) = runs.first().ok_or_else(|| anyhow!("no seeds"))?;
    let summary = format!(
        "linearize: {} (seed {seed}: E4 {:.4e}, D4 {:.4e}, lhs_main {:.4e}, R {:.2}, ledger {}{})",
        if pass { "pass" } else { "FAIL" },
        r.e4,
        r.d4,
        r.lhs_main,
        r.r_selected,
        if r.ledger.pass { "ok" } else { "violated" },
        if runs.len() > 1 { format!(", {} seeds", runs.len()) } else { String::new() }
    );
    Ok(Outcome { pass, summary })
}

fn study(a: StudyArgs, out: &Path) -> anyhow::Result<Outcome> {
    let mut cfg = a.instance.experiment()?;
    if let Some(s) = a.scales {
        cfg.scales = s;
    }
    if cfg.scales.is_empty() {
        cfg.scales = vec![0.2, 0.1, 0.05];
    }
    let cache = a.instance.cache(&cfg)?;
    let table = harness::study(&cfg, cache.as_ref())?;
    write_file(out, "study_scaling.csv", &table.to_csv())?;
    write_file(out, "study_scaling.dat", &table.to_dat())?;
    let failed = table.rows.iter().filter(|r| r.error.is_some()).count();
    let pass = failed == 0 && table.slope.is_none_or(|s| s > 1.0);
    write_report(out, "study_scaling.json", "study-scaling", &cfg, &["scaling"], pass, &table)?;
    let slope = table.slope.map_or("undefined".into(), |s| format!("{s:.3}"));
    Ok(Outcome { pass, summary: format!("study scaling: {} ({} scales, {failed} failed, slope {slope})", if pass { "pass" } else { "FAIL" }, table.rows.len()) })
}

fn report(out: &Path) -> anyhow::Result<Outcome> {
    let mut entries: Vec<(String, String, bool, String)> = Vec::new();
    if out.is_dir() {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(out)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
        paths.sort();
        for p in paths {
            if p.extension().is_none_or(|e| e != "json") || p.file_name().is_some_and(|n| n == "report.json") {
                continue;
            }
            let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&p)?).with_context(|| format!("parsing {}", p.display()))?;
            if v.get("schema_version").is_none() {
                continue;
            }
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let kind = v["kind"].as_str().unwrap_or("").to_string();
            let pass = v["pass"].as_bool().unwrap_or(false);
            let hash = v["config_hash"].as_str().unwrap_or("").to_string();
            entries.push((name, kind, pass, hash));
        }
    }
    let mut csv = String::from("file,kind,pass,config_hash\n");
    for (n, k, p, h) in &entries {
        csv.push_str(&format!("{n},{k},{p},{h}\n"));
    }
    write_file(out, "summary.csv", &csv)?;
    let pass = entries.iter().all(|e| e.2);
    let rows: Vec<serde_json::Value> = entries.iter().map(|(n, k, p, h)| serde_json::json!({"file": n, "kind": k, "pass": p, "config_hash": h})).collect();
    write_report(out, "report.json", "report", &rows, &[], pass, &rows)?;
    let failed = entries.iter().filter(|e| !e.2).count();
    Ok(Outcome { pass, summary: format!("report: {} reports, {failed} failing, in {}", entries.len(), out.display()) })
}
