use std::fs;
use std::path::Path;

use tiemortar_cli::run;

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv: Vec<&str> = std::iter::once("tiemortar").chain(args.iter().copied()).collect();
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn field(text: &str, prefix: &str, word: usize) -> f64 {
    let line = text.lines().find(|l| l.starts_with(prefix)).expect(prefix);
    line[prefix.len()..].split_whitespace().nth(word).unwrap().parse().unwrap()
}

#[test]
fn patch_test_solve_has_no_tangential_traction() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    let (code, out, err) = call(&["solve", "--preset", "patch-test", "--method", "mixed-p1p1", "--output", o]);
    assert_eq!(code, 0, "{err}");
    let ln = field(&out, "lambda_n:", 1);
    let lt = field(&out, "max |lambda_t|:", 0);
    assert!(lt <= 1e-8 * ln.abs(), "{out}");
    let csv = fs::read_to_string(dir.path().join("lambda_profile_mixed-p1p1_0.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("s,lambda_n,lambda_t"));
}

#[test]
fn infsup_p1p0_decays() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    let (code, out, err) = call(&["infsup", "--preset", "square-square", "--pair", "p1p0", "--levels", "4", "-o", o]);
    assert_eq!(code, 0, "{err}");
    let betas: Vec<f64> = out
        .lines()
        .skip(1)
        .take(4)
        .map(|l| l.split_whitespace().nth(2).unwrap().parse().unwrap())
        .collect();
    assert!(betas.windows(2).all(|w| w[1] < w[0]), "{out}");

    // same numbers as the diagnostics module
    let csv = fs::read_to_string(dir.path().join("infsup.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("constant,level,h,value"));
    let p = tiemortar::saddle::square_square(3, true).unwrap();
    let d = tiemortar::saddle::Discretization::new(&p, 1, tiemortar::MultiplierKind::P0, usize::MAX).unwrap();
    let beta = tiemortar::diagnostics::infsup_mesh_norm(&d).unwrap().value;
    let last: f64 = lines.last().unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert_eq!(last, beta);
}

#[test]
fn study_writes_artifacts_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    let args = [
        "study",
        "--preset",
        "square-square",
        "--methods",
        "mixed-p1p1,stab-p1p1",
        "--levels",
        "3",
        "--nonmatching",
        "--output",
        o,
    ];
    let (code, out, err) = call(&args);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("rate mixed-p1p1"));
    for f in ["convergence.csv", "rates.csv", "convergence_lambda.svg", "convergence_energy.svg"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let first = fs::read(dir.path().join("convergence.csv")).unwrap();
    let rates = fs::read(dir.path().join("rates.csv")).unwrap();
    assert_eq!(call(&args).0, 0);
    assert_eq!(first, fs::read(dir.path().join("convergence.csv")).unwrap());
    assert_eq!(rates, fs::read(dir.path().join("rates.csv")).unwrap());
    let leftovers: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().contains(".tmp"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn constants_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    let (code, out, err) = call(&["constants", "--levels", "3", "-o", o]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out.lines().filter(|l| l.trim_start().starts_with(char::is_numeric)).count(), 3);
    let csv = fs::read_to_string(dir.path().join("constants.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 3);
    assert!(csv.contains("\nC_I,2,"));
    assert!(csv.contains("\nC_E,0,"));
}

#[test]
fn dump_system_format() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    let (code, out, err) = call(&["dump-system", "--method", "stab-p1p0", "--nonmatching", "-o", o]);
    assert_eq!(code, 0, "{err}");
    let m = fs::read_to_string(dir.path().join("system_matrix.txt")).unwrap();
    let rhs = fs::read_to_string(dir.path().join("system_rhs.txt")).unwrap();
    let dim: usize = out.split("dimension ").nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
    assert_eq!(rhs.lines().count(), dim);
    for line in m.lines() {
        let parts: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(parts.len(), 3);
        assert!(parts[0].parse::<usize>().unwrap() < dim);
        assert!(parts[1].parse::<usize>().unwrap() < dim);
        parts[2].parse::<f64>().unwrap();
    }
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap().to_string();
    let cfg = write(dir.path(), "run.cfg", "# patch run\npreset = patch-test\nmethod = stab-p1p1\nalpha = 1e-5\n");
    let (code, out, err) = call(&["solve", "--config", &cfg, "-o", &o]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("alpha: 1.000000e-5"), "{out}");
    let (code, out, _) = call(&["solve", "--config", &cfg, "--alpha", "2e-5", "-o", &o]);
    assert_eq!(code, 0);
    assert!(out.contains("alpha: 2.000000e-5"), "{out}");
    let (code, out, _) = call(&["solve", "--config", &cfg, "--method", "stab-p1p1", "--continuity", "discontinuous", "-o", &o]);
    assert_eq!(code, 0);
    assert!(out.starts_with("stab-p1p1d"), "{out}");
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad_key = write(dir.path(), "a.cfg", "levels = 3\n\ncolour = red\n");
    let (code, _, err) = call(&["study", "--config", &bad_key]);
    assert_eq!(code, 1);
    assert!(err.contains("line 3") && err.contains("colour"), "{err}");

    let alpha = write(dir.path(), "b.cfg", "alpha = -1\n");
    let (code, _, err) = call(&["solve", "--method", "stab-p1p1", "--config", &alpha]);
    assert_eq!(code, 1);
    assert!(err.contains("alpha must be positive"), "{err}");

    let cont = write(dir.path(), "c.cfg", "multiplier = P0-continuous\n");
    let (code, _, err) = call(&["solve", "--method", "stab-p1p1", "--config", &cont]);
    assert_eq!(code, 1);
    assert!(err.contains("line 1"), "{err}");

    assert_eq!(call(&["solve", "--method", "stab-p1p1", "--alpha", "-1"]).0, 1);
    assert_eq!(call(&["solve"]).0, 1);
    assert!(call(&["solve"]).2.contains("missing required key `method`"));
    assert_eq!(call(&["solve", "--method", "mixed-p9p1"]).0, 1);
    assert_eq!(call(&["solve", "--method", "mixed-p1p1", "--alpha", "0.1"]).0, 1);
    assert_eq!(call(&["study", "--levels", "2"]).0, 1);
    assert_eq!(call(&["frobnicate"]).0, 1);
    assert_eq!(call(&["study", "--levels", "many"]).0, 1);
    let (code, _, err) = call(&["study", "--seed", "4"]);
    assert_eq!(code, 1);
    assert!(err.contains("deterministic"));
    assert_eq!(call(&["solve", "--seed=4", "--method", "mixed-p1p1"]).0, 1);
}

#[test]
fn size_guard_is_a_validation_error() {
    let (code, _, err) = call(&["solve", "--method", "mixed-p1p1", "--level", "3", "--max-dofs", "100"]);
    assert_eq!(code, 1);
    assert!(err.contains("too large"), "{err}");
}

#[test]
fn help_exits_cleanly() {
    let (code, out, _) = call(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("Exit codes"));
    for sub in ["solve", "study", "infsup", "constants", "dump-system"] {
        assert!(out.contains(sub), "{sub}");
    }
}
