use std::path::Path;

use linot_cli::{run_cli, EXIT_CHECK_FAILED, EXIT_PASS, EXIT_USAGE};

fn run(out: &Path, args: &[&str]) -> i32 {
    let mut argv = vec!["linot".to_string(), "--out".into(), out.display().to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    run_cli(argv)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn check_cost_quadratic_passes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["check-cost", "--family", "radial", "--p", "2", "--lambda", "2"]), EXIT_PASS);
    let v = json(&dir.path().join("check_cost.json"));
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["pass"], true);
    assert!(dir.path().join("SCHEMA.md").exists());
}

#[test]
fn check_cost_with_too_small_lambda_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["check-cost", "--p", "3", "--lambda", "1.01", "--samples", "2000"]), EXIT_CHECK_FAILED);
}

#[test]
fn triangle_battery_writes_one_row_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["verify", "lemma", "triangle", "--seeds", "10"]), EXIT_PASS);
    let csv = std::fs::read_to_string(dir.path().join("lemma_triangle.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 11);
    assert!(lines[0].starts_with("seed,"));
    assert!(lines[1..].iter().all(|l| l.ends_with(",true")));
}

#[test]
fn unknown_lemma_and_flag_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["verify", "lemma", "pythagoras"]), EXIT_USAGE);
    assert_eq!(run(dir.path(), &["linearize", "--bogus"]), EXIT_USAGE);
    assert_eq!(run(dir.path(), &["--help"]), EXIT_PASS);
    assert!(!dir.path().join("SCHEMA.md").exists());
}

#[test]
fn identity_linearization_has_zero_main_term() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["linearize", "--family", "identity", "--rings", "12"]), EXIT_PASS);
    let v = json(&dir.path().join("linearize.json"));
    let r = &v["result"][0][1];
    assert_eq!(r["lhs_main"].as_f64().unwrap(), 0.0);
    assert_eq!(r["e4"].as_f64().unwrap(), 0.0);
    assert!(dir.path().join("radius_scores.csv").exists());
}

#[test]
fn ot_solve_round_trips_csv_measures() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src.csv");
    let tgt = dir.path().join("tgt.csv");
    std::fs::write(&src, "x,y,weight\n0,0,1\n1,0,1\n").unwrap();
    std::fs::write(&tgt, "x,y,weight\n1.1,0,1\n0.1,0,1\n").unwrap();
    let code = run(
        dir.path(),
        &["ot", "solve", "--source", src.to_str().unwrap(), "--target", tgt.to_str().unwrap(), "--p", "2", "--lambda", "2"],
    );
    assert_eq!(code, EXIT_PASS);
    let plan = std::fs::read_to_string(dir.path().join("plan.csv")).unwrap();
    assert_eq!(plan.lines().next(), Some("i,j,mass"));
    // Quadratic cost pairs each atom with its nearby translate.
    let pairs: Vec<(usize, usize)> = plan
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap())
        })
        .collect();
    assert_eq!(pairs.len(), 2);
    assert!(pairs.contains(&(0, 1)) && pairs.contains(&(1, 0)));
}

#[test]
fn study_needs_three_scales_and_report_summarises() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["study", "scaling", "--rings", "10", "--scales", "0.2,0.1"]), 1);
    assert_eq!(run(dir.path(), &["check-cost"]), EXIT_PASS);
    assert_eq!(run(dir.path(), &["report"]), EXIT_PASS);
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(summary.contains("check_cost.json,check-cost,true,"));
}

#[test]
fn config_file_drives_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "seeds = [4]\n[cost]\nfamily = \"radial\"\np = 2.0\nlambda = 2.0\n[instance]\nkind = \"atomic_cloud\"\njitter = 0.1\nrings = 8\n[resolution]\nrings = 8\n",
    )
    .unwrap();
    assert_eq!(run(dir.path(), &["ot", "solve", "--config", cfg.to_str().unwrap()]), EXIT_PASS);
    std::fs::write(&cfg, "seeds = [4]\nbogus = 1\n").unwrap();
    assert_eq!(run(dir.path(), &["ot", "solve", "--config", cfg.to_str().unwrap()]), 1);
}

#[test]
fn separate_processes_write_identical_files() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        for args in [
            &["verify", "lemma", "triangle", "--seeds", "5"][..],
            &["linearize", "--family", "smooth-sine", "--scale", "0.1", "--rings", "10"][..],
            &["report"][..],
        ] {
            let status = std::process::Command::new(env!("CARGO_BIN_EXE_linot"))
                .arg("--out")
                .arg(dir.path())
                .args(args)
                .stdout(std::process::Stdio::null())
                .status()
                .unwrap();
            assert!(status.success(), "{args:?}");
        }
    }
    let mut names: Vec<_> = std::fs::read_dir(dirs[0].path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 7);
    for n in names {
        let a = std::fs::read(dirs[0].path().join(&n)).unwrap();
        let b = std::fs::read(dirs[1].path().join(&n)).unwrap();
        assert_eq!(a, b, "{n:?}");
    }
}

#[test]
fn anisotropic_cost_takes_a_comma_separated_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["check-cost", "--family", "anisotropic", "--p", "3", "--matrix", "1,0,0,4", "--samples", "2000"];
    assert_eq!(run(dir.path(), &args), EXIT_PASS);
    assert_eq!(run(dir.path(), &["check-cost", "--matrix", "1,0,4"]), 1);
}
