use rootbarrier_cli::config::RunConfig;
use rootbarrier_cli::run;
use serde_json::Value;
use std::path::{Path, PathBuf};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn cli(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> i32 {
    let mut args = vec!["rootbarrier".to_owned(), cmd.to_owned()];
    args.extend(["--config".into(), config.display().to_string(), "--out".into(), out.display().to_string()]);
    args.extend(extra.iter().map(|s| s.to_string()));
    run(args)
}

/// Copies a fixture config into `dir` with textual replacements applied.
fn edited(dir: &Path, name: &str, edits: &[(&str, &str)]) -> PathBuf {
    let mut text = std::fs::read_to_string(fixture(name)).unwrap();
    for (from, to) in edits {
        assert!(text.contains(from), "{from} not in {name}");
        text = text.replace(from, to);
    }
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: PathBuf) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    assert!(!text.contains('\r'));
    text.lines().skip(1).map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

#[test]
fn gaussian_solve_gives_vertical_barriers() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli("solve", &fixture("gaussian.toml"), dir.path(), &[]), 0);
    let solve = read_json(dir.path().join("solve.json"));
    let dt = solve["grid"]["dt"].as_f64().unwrap();
    let rows = csv_rows(dir.path().join("barriers.csv"));
    let mut checked = 0;
    for row in rows {
        let (s, x): (f64, f64) = (row[1].parse().unwrap(), row[2].parse().unwrap());
        if x.abs() <= 3.0 {
            let r: f64 = row[3].parse().unwrap();
            assert!((r - s).abs() <= 5.0 * dt, "s={s} x={x} r={r}");
            checked += 1;
        }
    }
    assert!(checked > 400);
    let echoed = RunConfig::parse(&std::fs::read_to_string(dir.path().join("config.toml")).unwrap()).unwrap();
    assert_eq!(echoed.to_toml(), RunConfig::load(&fixture("gaussian.toml")).unwrap().to_toml());
    let manifest = read_json(dir.path().join("manifest.json"));
    for f in ["barriers.csv", "surface.csv", "solve.json", "config.toml"] {
        assert_eq!(manifest["sha256"][f].as_str().unwrap().len(), 64, "{f}");
    }
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(cli("solve", &fixture("reversed.toml"), &out, &[]), 1);
    let typo = edited(dir.path(), "gaussian.toml", &[("dx = 0.05", "dxx = 0.05")]);
    assert_eq!(cli("solve", &typo, &out, &[]), 1);
    let err = RunConfig::load(&typo).unwrap_err();
    assert!(err.0.contains("unknown key"), "{err}");
    let stray = edited(dir.path(), "two_atom.toml", &[("kind = \"two_atom\"", "kind = \"two_atom\"\nt0 = 1.0")]);
    assert_eq!(cli("solve", &stray, &out, &[]), 1);
    assert!(RunConfig::load(&stray).unwrap().validate().unwrap_err().0.contains("unknown key"));
    assert_eq!(cli("solve", &dir.path().join("missing.toml"), &out, &[]), 1);
    assert_eq!(cli("solve", &fixture("gaussian.toml"), &out, &["--threads", "0"]), 1);
    assert_eq!(run(["rootbarrier", "frobnicate"]), 1);
    let alt = edited(dir.path(), "three_point.toml", &[("seed = 5", "seed = 5\nalternative = true")]);
    assert_eq!(cli("verify", &alt, &out, &[]), 1);
}

#[test]
fn atomic_table_path_is_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli("solve", &fixture("atomic_table.toml"), dir.path(), &[]), 0);
}

#[test]
fn constant_family_limit_is_the_initial_potential() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli("limit", &fixture("constant.toml"), dir.path(), &[]), 0);
    let conv = read_json(dir.path().join("convergence.json"));
    assert_eq!(conv["levels"], 1);
    for row in csv_rows(dir.path().join("limit.csv")) {
        let x: f64 = row[2].parse().unwrap();
        let u: f64 = row[3].parse().unwrap();
        let exact = -0.5 * ((x - 1.0).abs() + (x + 1.0).abs());
        assert!((u - exact).abs() < 1e-12, "x={x}: {u} vs {exact}");
    }
}

#[test]
fn gaussian_limit_converges() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli("limit", &fixture("gaussian.toml"), dir.path(), &[]), 0);
    let conv = read_json(dir.path().join("convergence.json"));
    let diffs: Vec<f64> =
        conv["history"].as_array().unwrap().iter().filter_map(|h| h["cauchy_diff"].as_f64()).collect();
    assert_eq!(diffs.len(), 2);
    assert!(diffs[1] < diffs[0]);
    assert!(conv["history"][0].get("runtime_ms").is_none());
    assert_eq!(conv["outside_assumptions"], false);
}

#[test]
fn singular_scaling_is_flagged_but_runs() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli("limit", &fixture("scaled_singular.toml"), dir.path(), &[]), 0);
    let conv = read_json(dir.path().join("convergence.json"));
    assert_eq!(conv["outside_assumptions"], true);
    assert_eq!(conv["assumptions"]["continuous"], false);
}

#[test]
fn root_against_the_alternative() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited(dir.path(), "normal_alternative.toml", &[("paths = 100000", "paths = 40000")]);
    let out = dir.path().join("out");
    assert_eq!(cli("verify", &cfg, &out, &[]), 0);
    let emb = read_json(out.join("embedding.json"));
    let linear = &emb["functionals"][0];
    assert_eq!(linear["rate"], "t");
    let root = linear["root"]["mean"].as_f64().unwrap();
    let alt = &linear["alternative"];
    assert!((root - 0.5).abs() <= 5.0 * 0.0025, "{root}");
    let (mean, se) = (alt["mean"].as_f64().unwrap(), alt["stderr"].as_f64().unwrap());
    assert!((mean - 2.5).abs() <= 4.0 * se, "{mean} ± {se}");
    for f in emb["functionals"].as_array().unwrap() {
        assert!(f["root"]["mean"].as_f64() <= f["alternative"]["mean"].as_f64(), "{f}");
    }
}

#[test]
fn repeated_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited(dir.path(), "two_atom.toml", &[("paths = 100000", "paths = 20000")]);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(cli("verify", &cfg, &a, &["--dump-raw"]), 0);
    assert_eq!(cli("verify", &cfg, &b, &["--dump-raw", "--threads", "3"]), 0);
    for f in ["embedding.json", "paths.csv", "config.toml"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let (ma, mb) = (read_json(a.join("manifest.json")), read_json(b.join("manifest.json")));
    assert_eq!(ma["sha256"], mb["sha256"]);
}

#[test]
fn failing_checks_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    // Horizon too short to stop every path of the exit-time embedding.
    let cfg = edited(
        dir.path(),
        "two_atom.toml",
        &[("horizon = 8.0", "horizon = 0.5"), ("paths = 100000", "paths = 2000"), ("[0.25, 0.5, 1.0]", "[0.25]")],
    );
    assert_eq!(cli("verify", &cfg, &dir.path().join("h"), &[]), 2);
    // A zero residual tolerance cannot be met.
    let cfg = edited(dir.path(), "three_point.toml", &[("[simulation]", "[tolerances]\nc_pde = 0.0\n\n[simulation]")]);
    assert_eq!(cli("limit", &cfg, &dir.path().join("t"), &[]), 2);
}

#[test]
fn raw_dump_is_capped() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited(dir.path(), "gaussian.toml", &[("paths = 100000", "paths = 2000000")]);
    assert_eq!(cli("verify", &cfg, dir.path(), &["--dump-raw"]), 1);
}
