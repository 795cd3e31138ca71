//! Command-line driver: `solve`, `study`, `infsup`, `constants` and
//! `dump-system` on the built-in geometry presets.

pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use tiemortar::diagnostics::{
    estimate_trace_constant, extension_constant, infsup_mesh_norm, projection_stability, uniformity_report,
    write_reports_csv, SpectralReport,
};
use tiemortar::saddle::{build_system_with_limit, Discretization, DEFAULT_MAX_DOFS};
use tiemortar::study::{run_study, write_atomic, StudyConfig};
use tiemortar::{solve, Alpha, Error, MethodSpec, MultiplierKind, Preset, Result};

pub use config::{parse_config, Continuity, Pair, Settings};

/// Worker threads for study runs (default 1).
pub const THREADS_ENV: &str = "TIEMORTAR_THREADS";

const DEFAULTS: &str = "\
Defaults: preset = square-square, matching meshes, level = 0, levels = 5 for
study and 4 for infsup/constants, methods = mixed-p1p1,stab-p1p1, pair = p1p1,
reference_extra = 2, alpha = C_I/10 (estimated), output = current directory.

Config files hold `key = value` lines with `#` comments. Keys: preset, method,
methods, pair, level, levels, reference_extra, alpha, degree, multiplier,
continuity, matching, infsup, max_dofs, output. Command-line flags win.

Exit codes: 0 success, 1 invalid input, 2 solver or numerical failure.
Environment: TIEMORTAR_THREADS sets the worker count for study runs.";

#[derive(Debug, Parser)]
#[command(name = "tiemortar", version, about = "Tie contact of two elastic bodies with mortar multipliers", after_help = DEFAULTS)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one problem and print multiplier statistics.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Method name, e.g. mixed-p1p1, stab-p1p0, stab-p2p1.
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        level: Option<usize>,
    },
    /// Convergence study against a fine stabilized P2-P1 reference.
    Study {
        #[command(flatten)]
        common: Common,
        /// Comma-separated method names.
        #[arg(long)]
        methods: Option<String>,
        #[arg(long)]
        levels: Option<usize>,
        /// Refinements of the reference beyond the finest level (>= 2).
        #[arg(long)]
        reference_extra: Option<usize>,
        /// Skip the per-level inf-sup estimate.
        #[arg(long)]
        no_infsup: bool,
    },
    /// Discrete inf-sup constant per refinement level.
    Infsup {
        #[command(flatten)]
        common: Common,
        /// Element pair, e.g. p1p1, p1p0, p1p1d, p2p1.
        #[arg(long)]
        pair: Option<String>,
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Trace, extension and projection constants per refinement level.
    Constants {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Write the assembled saddle-point matrix and right-hand side.
    DumpSystem {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        level: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// Config file with `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// square-square or patch-test.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, conflicts_with = "nonmatching")]
    pub matching: bool,
    #[arg(long)]
    pub nonmatching: bool,
    /// Stabilization parameter (> 0) for stabilized methods.
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Displacement degree override (1 or 2).
    #[arg(long)]
    pub degree: Option<usize>,
    /// Multiplier space override, e.g. P0, P1-continuous, P1-discontinuous.
    #[arg(long)]
    pub multiplier: Option<String>,
    /// continuous or discontinuous.
    #[arg(long)]
    pub continuity: Option<String>,
    /// Size guard for the direct solver.
    #[arg(long)]
    pub max_dofs: Option<usize>,
}

/// Exit code for an error: 1 for invalid input, 2 for solver failures.
pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::Config(_)
        | Error::Parse { .. }
        | Error::Incompressible(_)
        | Error::InvalidGeometry(_)
        | Error::EmptyInterface
        | Error::UnsupportedGeometry(_)
        | Error::TooLarge { .. }
        | Error::OffEdge { .. } => 1,
        _ => 2,
    }
}

impl Common {
    fn settings(&self) -> Result<Settings> {
        let mut s = Settings {
            output: self.output.clone(),
            max_dofs: self.max_dofs,
            degree: self.degree,
            ..Settings::default()
        };
        if let Some(p) = &self.preset {
            s.preset = Some(Preset::parse(p)?);
        }
        if self.matching {
            s.matching = Some(true);
        }
        if self.nonmatching {
            s.matching = Some(false);
        }
        if let Some(a) = self.alpha {
            s.alpha = Some(config::check_alpha(a)?);
        }
        if let Some(m) = &self.multiplier {
            s.multiplier = Some(MultiplierKind::parse(m)?);
        }
        if let Some(c) = &self.continuity {
            s.continuity = Some(Continuity::parse(c)?);
        }
        Ok(s)
    }
}

/// Reads the config file (if any) and overlays the command-line values.
fn resolve(common: &Common, cli: Settings) -> Result<Settings> {
    let base = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
            parse_config(&text).map_err(|e| e.context(format!("{}", path.display())))?
        }
        None => Settings::default(),
    };
    Ok(base.overlay(common.settings()?).overlay(cli))
}

fn apply_space(s: &Settings, degree: &mut usize, multiplier: &mut MultiplierKind) -> Result<()> {
    if let Some(k) = s.degree {
        if k != 1 && k != 2 {
            return Err(Error::Config(format!("displacement degree must be 1 or 2, got {k}")));
        }
        *degree = k;
    }
    if let Some(m) = s.multiplier {
        *multiplier = m;
    }
    if let Some(c) = s.continuity {
        *multiplier = match (multiplier.degree(), c) {
            (0, Continuity::Discontinuous) => MultiplierKind::P0,
            (0, Continuity::Continuous) => {
                return Err(Error::Config(
                    "a continuous multiplier needs degree l >= 1 (P0 cannot be continuous)".into(),
                ))
            }
            (_, Continuity::Continuous) => MultiplierKind::P1Continuous,
            (_, Continuity::Discontinuous) => MultiplierKind::P1Discontinuous,
        };
    }
    Ok(())
}

/// Applies the degree, multiplier, continuity and alpha overrides.
fn apply_overrides(s: &Settings, methods: &mut [MethodSpec]) -> Result<()> {
    for m in methods.iter_mut() {
        apply_space(s, &mut m.degree, &mut m.multiplier)?;
        m.validate()?;
    }
    if let Some(a) = s.alpha {
        if !methods.iter().any(MethodSpec::is_stabilized) {
            return Err(Error::Config(
                "alpha is set but no stabilized method is selected".into(),
            ));
        }
        for m in methods.iter_mut() {
            *m = m.with_alpha(Alpha::Fixed(a));
        }
    }
    Ok(())
}

fn required<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| {
        Error::Config(format!(
            "missing required key `{key}` (set `--{}` or `{key} = ...` in the config file)",
            key.replace('_', "-")
        ))
    })
}

fn output_dir(s: &Settings) -> PathBuf {
    s.output.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn threads() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
    }
}

fn method_from(s: &Settings) -> Result<MethodSpec> {
    let mut m = [required(s.method, "method")?];
    apply_overrides(s, &mut m)?;
    Ok(m[0])
}

fn cmd_solve(s: &Settings, out: &mut dyn Write) -> Result<()> {
    let method = method_from(s)?;
    let preset = s.preset.unwrap_or(Preset::SquareSquare);
    let level = s.level.unwrap_or(0);
    let matching = s.matching.unwrap_or(true);
    let problem = preset.build(level, matching)?;
    let sys = build_system_with_limit(&problem, &method, s.max_dofs.unwrap_or(DEFAULT_MAX_DOFS))?;
    let sol = solve(&sys)?;
    let d = &sys.disc;
    let profile = d.space.profile(&sol.lambda);
    let n = profile.len() as f64;
    let (mut lo, mut hi, mut sum, mut tmax) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0.0f64);
    for &(_, ln, lt) in &profile {
        lo = lo.min(ln);
        hi = hi.max(ln);
        sum += ln;
        tmax = tmax.max(lt.abs());
    }
    let name = method.to_string();
    writeln!(
        out,
        "{name} on {} level {level} ({})",
        preset.as_str(),
        if matching { "matching" } else { "nonmatching" }
    )?;
    writeln!(
        out,
        "dofs: {} (side 1: {}, side 2: {}, multiplier: {})",
        sys.dim(),
        d.n1(),
        d.n2(),
        d.n_mult()
    )?;
    if let Some(a) = sys.alpha {
        writeln!(out, "alpha: {a:.6e}")?;
    }
    writeln!(out, "lambda_n: min {lo:.6e} max {hi:.6e} mean {:.6e}", sum / n)?;
    writeln!(out, "max |lambda_t|: {tmax:.6e}")?;
    writeln!(out, "relative residual: {:.3e}", sol.residual)?;
    let path = output_dir(s).join(format!("lambda_profile_{name}_{level}.csv"));
    let mut csv = Vec::new();
    d.space.write_profile_csv(&sol.lambda, &mut csv)?;
    write_atomic(&path, &csv)?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

fn cmd_study(s: &Settings, out: &mut dyn Write) -> Result<()> {
    let mut methods = match &s.methods {
        Some(m) => m.clone(),
        None => config::parse_methods("mixed-p1p1,stab-p1p1")?,
    };
    apply_overrides(s, &mut methods)?;
    let mut cfg = StudyConfig::new(
        s.preset.unwrap_or(Preset::SquareSquare),
        s.matching.unwrap_or(true),
        methods,
    );
    if let Some(l) = s.levels {
        cfg.levels = l;
    }
    if let Some(r) = s.reference_extra {
        cfg.reference_extra = r;
    }
    if let Some(i) = s.infsup {
        cfg.infsup = i;
    }
    if let Some(m) = s.max_dofs {
        cfg.max_dofs = m;
    }
    cfg.threads = threads()?;
    let dir = output_dir(s);
    cfg.output_dir = Some(dir.clone());
    let report = run_study(&cfg)?;
    writeln!(out, "reference dofs: {}", report.reference_dofs)?;
    writeln!(out, "{:<14} {:>5} {:>10} {:>8} {:>12} {:>12}", "method", "level", "h", "dofs", "err_lambda", "err_energy")?;
    for r in &report.rows {
        writeln!(
            out,
            "{:<14} {:>5} {:>10.4e} {:>8} {:>12.4e} {:>12.4e}",
            r.method, r.level, r.h, r.dofs, r.err_lambda, r.err_energy
        )?;
    }
    for r in &report.rates {
        writeln!(
            out,
            "rate {}: multiplier {:.3}, energy {:.3}",
            r.method, r.slope_lambda, r.slope_energy
        )?;
    }
    writeln!(out, "wrote {}", dir.display())?;
    Ok(())
}

fn write_reports(path: &Path, reports: &[SpectralReport]) -> Result<()> {
    let mut csv = Vec::new();
    write_reports_csv(reports, &mut csv)?;
    write_atomic(path, &csv)
}

fn cmd_infsup(s: &Settings, out: &mut dyn Write) -> Result<()> {
    let pair = s.pair.unwrap_or(Pair {
        degree: 1,
        multiplier: MultiplierKind::P1Continuous,
    });
    let (mut degree, mut multiplier) = (pair.degree, pair.multiplier);
    apply_space(s, &mut degree, &mut multiplier)?;
    let preset = s.preset.unwrap_or(Preset::SquareSquare);
    let matching = s.matching.unwrap_or(true);
    let levels = s.levels.unwrap_or(4);
    let mut reports = Vec::new();
    writeln!(out, "{:>5} {:>12} {:>12}", "level", "h", "beta_h")?;
    for level in 0..levels {
        let problem = preset.build(level, matching)?;
        let disc = Discretization::new(&problem, degree, multiplier, s.max_dofs.unwrap_or(DEFAULT_MAX_DOFS))?;
        let r = infsup_mesh_norm(&disc)
            .map_err(|e| e.context(format!("level {level}")))?
            .at_level(level);
        writeln!(out, "{:>5} {:>12.4e} {:>12.4e}", level, r.h, r.value)?;
        reports.push(r);
    }
    let path = output_dir(s).join("infsup.csv");
    write_reports(&path, &reports)?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

fn cmd_constants(s: &Settings, out: &mut dyn Write) -> Result<()> {
    let degree = s.degree.unwrap_or(1);
    if degree != 1 && degree != 2 {
        return Err(Error::Config(format!("displacement degree must be 1 or 2, got {degree}")));
    }
    let preset = s.preset.unwrap_or(Preset::SquareSquare);
    let matching = s.matching.unwrap_or(true);
    let levels = s.levels.unwrap_or(4);
    let mut reports = Vec::new();
    writeln!(out, "{:>5} {:>12} {:>12} {:>12} {:>12} {:>10}", "level", "h", "C_I", "C_E", "C_pi", "uniformity")?;
    for level in 0..levels {
        let problem = preset.build(level, matching)?;
        let ctx = |e: Error| e.context(format!("level {level}"));
        let trace = tiemortar::mesh::extract_trace_mesh(&problem.mesh1)?;
        let ci = estimate_trace_constant(&problem.mesh1, &problem.material, degree).map_err(ctx)?;
        let ce = extension_constant(&problem.mesh1).map_err(ctx)?;
        let cp = projection_stability(&trace).map_err(ctx)?;
        let un = uniformity_report(&trace);
        writeln!(
            out,
            "{:>5} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>10.4}",
            level, ci.h, ci.value, ce.value, cp.value, un.value
        )?;
        reports.extend([ci, ce, cp, un].map(|r| r.at_level(level)));
    }
    let path = output_dir(s).join("constants.csv");
    write_reports(&path, &reports)?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

fn cmd_dump(s: &Settings, out: &mut dyn Write) -> Result<()> {
    let method = method_from(s)?;
    let preset = s.preset.unwrap_or(Preset::SquareSquare);
    let level = s.level.unwrap_or(0);
    let problem = preset.build(level, s.matching.unwrap_or(true))?;
    let sys = build_system_with_limit(&problem, &method, s.max_dofs.unwrap_or(DEFAULT_MAX_DOFS))?;
    let dir = output_dir(s);
    let mut m = Vec::new();
    sys.write_matrix(&mut m)?;
    write_atomic(&dir.join("system_matrix.txt"), &m)?;
    let mut r = Vec::new();
    sys.write_rhs(&mut r)?;
    write_atomic(&dir.join("system_rhs.txt"), &r)?;
    let (_, o2, om) = sys.offsets();
    writeln!(
        out,
        "{method}: dimension {}, {} nonzeros; blocks start at 0, {o2}, {om}",
        sys.dim(),
        sys.matrix.nnz()
    )?;
    writeln!(out, "wrote {}", dir.display())?;
    Ok(())
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Solve { common, method, level } => {
            let s = Settings {
                method: method.as_deref().map(MethodSpec::parse).transpose()?,
                level,
                ..Settings::default()
            };
            cmd_solve(&resolve(&common, s)?, out)
        }
        Command::Study {
            common,
            methods,
            levels,
            reference_extra,
            no_infsup,
        } => {
            let s = Settings {
                methods: methods.as_deref().map(config::parse_methods).transpose()?,
                levels,
                reference_extra,
                infsup: no_infsup.then_some(false),
                ..Settings::default()
            };
            cmd_study(&resolve(&common, s)?, out)
        }
        Command::Infsup { common, pair, levels } => {
            let s = Settings {
                pair: pair.as_deref().map(Pair::parse).transpose()?,
                levels,
                ..Settings::default()
            };
            cmd_infsup(&resolve(&common, s)?, out)
        }
        Command::Constants { common, levels } => {
            let s = Settings {
                levels,
                ..Settings::default()
            };
            cmd_constants(&resolve(&common, s)?, out)
        }
        Command::DumpSystem { common, method, level } => {
            let s = Settings {
                method: method.as_deref().map(MethodSpec::parse).transpose()?,
                level,
                ..Settings::default()
            };
            cmd_dump(&resolve(&common, s)?, out)
        }
    }
}

/// Runs the command line `args` (program name first) and returns the exit
/// code. Normal output goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    if args
        .iter()
        .skip(1)
        .any(|a| a == "--seed" || a.to_string_lossy().starts_with("--seed="))
    {
        let _ = writeln!(err, "error: --seed is not accepted: the pipeline is fully deterministic");
        return 1;
    }
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    1
                }
            };
        }
    };
    match dispatch(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_error_kind() {
        assert_eq!(exit_code(&Error::Config("x".into())), 1);
        assert_eq!(exit_code(&Error::Parse { line: 3, msg: "x".into() }), 1);
        assert_eq!(exit_code(&Error::Incompressible(0.5)), 1);
        assert_eq!(exit_code(&Error::Inaccurate(1e-3)), 2);
        assert_eq!(exit_code(&Error::SingularSystem { dof: 1, block: "x" }), 2);
        assert_eq!(exit_code(&Error::Config("x".into()).context("file")), 1);
    }

    #[test]
    fn continuity_override() {
        let s = Settings {
            continuity: Some(Continuity::Discontinuous),
            ..Settings::default()
        };
        let mut m = [MethodSpec::parse("mixed-p1p1").unwrap()];
        apply_overrides(&s, &mut m).unwrap();
        assert_eq!(m[0].to_string(), "mixed-p1p1d");
        let s = Settings {
            continuity: Some(Continuity::Continuous),
            ..Settings::default()
        };
        let mut m = [MethodSpec::parse("stab-p1p0").unwrap()];
        assert!(apply_overrides(&s, &mut m).is_err());
    }

    #[test]
    fn alpha_needs_a_stabilized_method() {
        let s = Settings {
            alpha: Some(1e-3),
            ..Settings::default()
        };
        let mut m = [MethodSpec::parse("mixed-p1p1").unwrap()];
        assert!(apply_overrides(&s, &mut m).is_err());
        let mut m = [MethodSpec::parse("mixed-p1p1").unwrap(), MethodSpec::parse("stab-p1p1").unwrap()];
        apply_overrides(&s, &mut m).unwrap();
        assert_eq!(m[1].alpha, Some(Alpha::Fixed(1e-3)));
        assert_eq!(m[0].alpha, None);
    }
}
