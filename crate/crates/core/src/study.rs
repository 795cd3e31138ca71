//! Convergence studies against a fine reference solution: error norms, rate
//! fits, CSV tables and log-log plots.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::diagnostics::{estimate_trace_constant, infsup_mesh_norm, SpectralReport};
use crate::error::{Error, Result};
use crate::fem::{evaluate, DofMap};
use crate::interface::{merge_partitions, MultiplierSpace};
use crate::mesh::{mesh_uniformity_ratio, Mesh2D, PointLocator};
use crate::quadrature::LineRule;
use crate::saddle::{
    assemble, Alpha, Discretization, MethodSpec, Preset, SaddleSystem, Solution, DEFAULT_MAX_DOFS,
};
use crate::sparse::CsrMatrix;

/// `‖h^{1/2}(λ_h − λ_ref)‖_{0,Γ}` with `h` the edge length of the coarse
/// multiplier mesh, integrated with 4-point Gauss on the merged partition.
pub fn multiplier_error(
    space: &MultiplierSpace,
    lambda: &[f64],
    reference: &MultiplierSpace,
    lambda_ref: &[f64],
) -> Result<f64> {
    let merged = merge_partitions(&space.trace, &reference.trace)?;
    let rule = LineRule::gauss(4);
    let mut sum = 0.0;
    for seg in &merged.segments {
        let h = space.trace.h(seg.edge1);
        for (s, w) in rule.on(seg.left, seg.right) {
            let a = space.evaluate_on_edge(lambda, seg.edge1, s);
            let b = reference.evaluate_on_edge(lambda_ref, seg.edge2, s);
            sum += h * w * ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2));
        }
    }
    Ok(sum.sqrt())
}

/// Nodal values of a field on `coarse` at the nodes of a nested refinement.
pub fn transfer(
    coarse: &Mesh2D,
    coarse_dofs: &DofMap,
    u: &[f64],
    fine: &Mesh2D,
    fine_dofs: &DofMap,
) -> Result<Vec<f64>> {
    let loc = PointLocator::new(coarse);
    let tol = 1e-10;
    let mut out = vec![0.0; fine_dofs.n_dofs()];
    for t in 0..fine.n_triangles() {
        let p = fine.triangle_points(t);
        let c = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
        let (parent, _) = loc.locate(c, tol).ok_or_else(|| {
            Error::Config(format!("reference triangle {t} lies outside the study mesh"))
        })?;
        let q = coarse.triangle_points(parent);
        for v in p {
            let b = crate::fem::barycentric(q, v);
            if b.iter().any(|&x| x < -tol) {
                return Err(Error::Config(
                    "reference mesh is not a nested refinement of the study mesh".into(),
                ));
            }
        }
        for &node in &fine_dofs.cell_nodes[t] {
            let val = evaluate(u, coarse, coarse_dofs, parent, fine_dofs.nodes[node]);
            out[DofMap::dof(node, 0)] = val[0];
            out[DofMap::dof(node, 1)] = val[1];
        }
    }
    Ok(out)
}

fn energy(stiffness: &CsrMatrix, u: &[f64]) -> f64 {
    stiffness.bilinear(u, u).max(0.0)
}

/// `|||u_ref − u_h|||` summed over both bodies, on the reference meshes.
pub fn energy_error(
    disc: &Discretization,
    solution: &Solution,
    reference: &Discretization,
    reference_solution: &Solution,
) -> Result<f64> {
    let mut sum = 0.0;
    for (mesh, dofs, u, rmesh, rdofs, ru, stiff) in [
        (
            &disc.problem.mesh1,
            &disc.dofs1,
            &solution.u1,
            &reference.problem.mesh1,
            &reference.dofs1,
            &reference_solution.u1,
            &reference.stiff1.matrix,
        ),
        (
            &disc.problem.mesh2,
            &disc.dofs2,
            &solution.u2,
            &reference.problem.mesh2,
            &reference.dofs2,
            &reference_solution.u2,
            &reference.stiff2.matrix,
        ),
    ] {
        let coarse = transfer(mesh, dofs, u, rmesh, rdofs)?;
        let diff: Vec<f64> = ru.iter().zip(&coarse).map(|(a, b)| a - b).collect();
        sum += energy(stiff, &diff);
    }
    Ok(sum.sqrt())
}

/// Least-squares slope of `log(error)` against `log(h)`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::Config(format!(
            "a rate fit needs at least 3 levels, got {}",
            points.len()
        )));
    }
    if let Some(i) = points.iter().position(|&(_, e)| e == 0.0) {
        return Err(Error::ExactSolution(i));
    }
    if points.iter().any(|&(h, e)| !(h > 0.0 && e > 0.0)) {
        return Err(Error::Numerical("rate fit needs positive h and errors".into()));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Fraction of adjacent interface-edge pairs across which the tangential
/// multiplier (sampled at edge midpoints) changes sign.
pub fn tangential_oscillation(space: &MultiplierSpace, lambda: &[f64]) -> f64 {
    let t = space.trace.line.tangent;
    let ne = space.trace.n_edges();
    if ne < 2 {
        return 0.0;
    }
    let vals: Vec<f64> = (0..ne)
        .map(|e| {
            let (a, b) = space.trace.edge(e);
            let l = space.evaluate_on_edge(lambda, e, 0.5 * (a + b));
            l[0] * t[0] + l[1] * t[1]
        })
        .collect();
    let changes = vals.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
    changes as f64 / (ne - 1) as f64
}

#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub preset: Preset,
    pub matching: bool,
    pub methods: Vec<MethodSpec>,
    /// Number of levels; level `l` has `4·2^l` side-1 cells per side.
    pub levels: usize,
    pub reference: MethodSpec,
    /// Uniform refinements of the reference beyond the finest level.
    pub reference_extra: usize,
    pub output_dir: Option<PathBuf>,
    /// Also estimate `β_h` per level.
    pub infsup: bool,
    pub max_dofs: usize,
    /// Size limit for the reference solve.
    pub reference_max_dofs: usize,
    /// Worker threads for the (method, level) runs.
    pub threads: usize,
}

impl StudyConfig {
    pub fn new(preset: Preset, matching: bool, methods: Vec<MethodSpec>) -> Self {
        StudyConfig {
            preset,
            matching,
            methods,
            levels: 5,
            reference: MethodSpec::parse("stab-p2p1").expect("valid method"),
            reference_extra: DEFAULT_REFERENCE_EXTRA,
            output_dir: None,
            infsup: true,
            max_dofs: DEFAULT_MAX_DOFS,
            reference_max_dofs: REFERENCE_MAX_DOFS,
            threads: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels < 3 {
            return Err(Error::Config(format!(
                "a study needs at least 3 levels for the rate fit, got {}",
                self.levels
            )));
        }
        if self.reference_extra < 2 {
            return Err(Error::Config(format!(
                "the reference needs at least 2 refinements beyond the finest level, got {}",
                self.reference_extra
            )));
        }
        if self.threads == 0 {
            return Err(Error::Config("thread count must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        for m in self.methods.iter().chain([&self.reference]) {
            m.validate()?;
        }
        Ok(())
    }
}

/// Uniform refinements of the reference beyond the finest study level.
pub const DEFAULT_REFERENCE_EXTRA: usize = 2;

/// Size limit applied to the reference solve.
pub const REFERENCE_MAX_DOFS: usize = 1_500_000;

#[derive(Clone, Debug, PartialEq)]
pub struct LevelResult {
    pub method: String,
    pub level: usize,
    pub h: f64,
    pub dofs: usize,
    pub err_lambda: f64,
    pub err_energy: f64,
    pub uniformity: f64,
    pub beta_h: Option<f64>,
    pub alpha: Option<f64>,
    pub oscillation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateResult {
    pub method: String,
    pub slope_lambda: f64,
    pub slope_energy: f64,
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub rows: Vec<LevelResult>,
    pub rates: Vec<RateResult>,
    pub reference_dofs: usize,
    pub diagnostics: Vec<SpectralReport>,
}

impl ConvergenceReport {
    pub fn method_rows(&self, method: &str) -> Vec<&LevelResult> {
        self.rows.iter().filter(|r| r.method == method).collect()
    }

    pub fn rate(&self, method: &str) -> Option<&RateResult> {
        self.rates.iter().find(|r| r.method == method)
    }

    pub fn convergence_csv(&self) -> String {
        let mut s = String::from("method,level,h,dofs,err_lambda,err_energy,uniformity,beta_h\n");
        for r in &self.rows {
            let beta = r.beta_h.map(|b| format!("{b:?}")).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{:?},{},{:?},{:?},{:?},{}",
                r.method, r.level, r.h, r.dofs, r.err_lambda, r.err_energy, r.uniformity, beta
            );
        }
        s
    }

    pub fn rates_csv(&self) -> String {
        let mut s = String::from("method,slope_lambda,slope_energy\n");
        for r in &self.rates {
            let _ = writeln!(s, "{},{:?},{:?}", r.method, r.slope_lambda, r.slope_energy);
        }
        s
    }
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

/// Resolves `Alpha::Auto` for a system assembled on `disc`.
fn resolve_alpha(method: &MethodSpec, mesh1: &Mesh2D, disc: &Discretization) -> Result<Option<f64>> {
    Ok(match method.alpha {
        None => None,
        Some(Alpha::Fixed(a)) => Some(a),
        Some(Alpha::Auto) => {
            Some(estimate_trace_constant(mesh1, &disc.problem.material, method.degree)?.value / 10.0)
        }
    })
}

/// Solves the reference problem. An automatic alpha is taken from the
/// trace constant on the coarsest level, which is mesh independent.
pub fn solve_reference(config: &StudyConfig) -> Result<(SaddleSystem, Solution)> {
    let level = config.levels - 1 + config.reference_extra;
    let problem = config.preset.build(level, config.matching)?;
    let disc = Discretization::new(
        &problem,
        config.reference.degree,
        config.reference.multiplier,
        config.reference_max_dofs,
    )?;
    let coarse = config.preset.build(0, config.matching)?;
    let alpha = resolve_alpha(&config.reference, &coarse.mesh1, &disc)?;
    let sys = assemble(disc, config.reference, alpha)?;
    let sol = crate::saddle::solve(&sys)?;
    Ok((sys, sol))
}

struct CaseOutput {
    row: LevelResult,
    diagnostics: Vec<SpectralReport>,
    profile: (String, Vec<u8>),
}

fn run_case(
    config: &StudyConfig,
    method: &MethodSpec,
    level: usize,
    ref_sys: &SaddleSystem,
    ref_sol: &Solution,
) -> Result<CaseOutput> {
    let name = method.to_string();
    let ctx = |e: Error| e.context(format!("{name} at level {level}"));
    let problem = config.preset.build(level, config.matching).map_err(ctx)?;
    let disc = Discretization::new(&problem, method.degree, method.multiplier, config.max_dofs).map_err(ctx)?;
    let alpha = resolve_alpha(method, &problem.mesh1, &disc).map_err(ctx)?;
    let beta = if config.infsup {
        Some(infsup_mesh_norm(&disc).map_err(ctx)?.value)
    } else {
        None
    };
    let sys = assemble(disc, *method, alpha).map_err(ctx)?;
    let sol = crate::saddle::solve(&sys).map_err(ctx)?;
    let d = &sys.disc;
    let err_lambda =
        multiplier_error(&d.space, &sol.lambda, &ref_sys.disc.space, &ref_sol.lambda).map_err(ctx)?;
    let err_energy = energy_error(d, &sol, &ref_sys.disc, ref_sol).map_err(ctx)?;
    let h = d.trace1.h_max();
    let uniformity = mesh_uniformity_ratio(&d.trace1);
    let mut diagnostics = Vec::new();
    if let Some(a) = alpha {
        diagnostics.push(report("alpha", level, h, &name, a));
    }
    if let Some(b) = beta {
        diagnostics.push(report("beta_h", level, h, &name, b));
    }
    diagnostics.push(report("uniformity", level, h, &name, uniformity));
    let mut csv = Vec::new();
    d.space.write_profile_csv(&sol.lambda, &mut csv)?;
    Ok(CaseOutput {
        row: LevelResult {
            method: name.clone(),
            level,
            h,
            dofs: sys.dim(),
            err_lambda,
            err_energy,
            uniformity,
            beta_h: beta,
            alpha,
            oscillation: tangential_oscillation(&d.space, &sol.lambda),
        },
        diagnostics,
        profile: (format!("lambda_profile_{name}_{level}.csv"), csv),
    })
}

pub fn run_study(config: &StudyConfig) -> Result<ConvergenceReport> {
    config.validate()?;
    let (ref_sys, ref_sol) = solve_reference(config).map_err(|e| e.context("reference solve"))?;
    let cases: Vec<(&MethodSpec, usize)> = config
        .methods
        .iter()
        .flat_map(|m| (0..config.levels).map(move |l| (m, l)))
        .collect();
    let slots: Vec<Mutex<Option<Result<CaseOutput>>>> = cases.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = config.threads.clamp(1, cases.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(method, level)) = cases.get(i) else { break };
                let out = run_case(config, method, level, &ref_sys, &ref_sol);
                *slots[i].lock().unwrap() = Some(out);
            });
        }
    });
    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    let mut profiles = Vec::new();
    for slot in slots {
        let out = slot.into_inner().unwrap().expect("every case ran")?;
        rows.push(out.row);
        diagnostics.extend(out.diagnostics);
        profiles.push(out.profile);
    }
    let mut rates = Vec::new();
    for method in &config.methods {
        let name = method.to_string();
        let mr: Vec<&LevelResult> = rows.iter().filter(|r| r.method == name).collect();
        let tail = &mr[mr.len() - 3..];
        let lam: Vec<(f64, f64)> = tail.iter().map(|r| (r.h, r.err_lambda)).collect();
        let en: Vec<(f64, f64)> = tail.iter().map(|r| (r.h, r.err_energy)).collect();
        rates.push(RateResult {
            method: name.clone(),
            slope_lambda: fit_rate(&lam).map_err(|e| e.context(format!("{name} multiplier rate")))?,
            slope_energy: fit_rate(&en).map_err(|e| e.context(format!("{name} energy rate")))?,
        });
    }
    let report = ConvergenceReport {
        rows,
        rates,
        reference_dofs: ref_sys.dim(),
        diagnostics,
    };
    if let Some(dir) = &config.output_dir {
        write_outputs(&report, dir, &profiles)?;
    }
    Ok(report)
}

fn report(constant: &str, level: usize, h: f64, method: &str, value: f64) -> SpectralReport {
    SpectralReport {
        constant: constant.into(),
        value,
        level: Some(level),
        h,
        method: method.into(),
        residual: 0.0,
    }
}

fn write_outputs(report: &ConvergenceReport, dir: &Path, profiles: &[(String, Vec<u8>)]) -> Result<()> {
    write_atomic(&dir.join("convergence.csv"), report.convergence_csv().as_bytes())?;
    write_atomic(&dir.join("rates.csv"), report.rates_csv().as_bytes())?;
    let mut diag = Vec::new();
    crate::diagnostics::write_reports_csv(&report.diagnostics, &mut diag)?;
    write_atomic(&dir.join("diagnostics.csv"), &diag)?;
    for (name, csv) in profiles {
        write_atomic(&dir.join(name), csv)?;
    }
    let mut methods: Vec<&str> = Vec::new();
    for r in &report.rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    for (file, title, pick) in [
        ("convergence_lambda.svg", "multiplier error", 0),
        ("convergence_energy.svg", "energy error", 1),
    ] {
        let series: Vec<(String, Vec<(f64, f64)>)> = methods
            .iter()
            .map(|m| {
                let pts = report
                    .method_rows(m)
                    .iter()
                    .map(|r| (r.h, if pick == 0 { r.err_lambda } else { r.err_energy }))
                    .collect();
                (m.to_string(), pts)
            })
            .collect();
        write_atomic(&dir.join(file), loglog_svg(title, &series, &[1.0, 1.5, 2.0]).as_bytes())?;
    }
    Ok(())
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Log-log plot of error against `h` with dashed guide lines of the given
/// slopes through the first point of the first series.
pub fn loglog_svg(title: &str, series: &[(String, Vec<(f64, f64)>)], guides: &[f64]) -> String {
    let (w, ht, m) = (640.0, 480.0, 60.0);
    let pts = series.iter().flat_map(|s| s.1.iter()).filter(|p| p.0 > 0.0 && p.1 > 0.0);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(h, e) in pts {
        x0 = x0.min(h.log10());
        x1 = x1.max(h.log10());
        y0 = y0.min(e.log10());
        y1 = y1.max(e.log10());
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let (x0, x1) = (x0.floor(), x1.ceil().max(x0.floor() + 1.0));
    let (y0, y1) = (y0.floor(), y1.ceil().max(y0.floor() + 1.0));
    let px = |h: f64| m + (h.log10() - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |e: f64| ht - m - (e.log10() - y0) / (y1 - y0) * (ht - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{ht}" viewBox="0 0 {w} {ht}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="30" text-anchor="middle" font-size="16">{title}</text>"#, w / 2.0);
    let _ = writeln!(
        s,
        r#"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * m,
        ht - 2.0 * m
    );
    for k in x0 as i32..=x1 as i32 {
        let x = px(10f64.powi(k));
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{}" text-anchor="middle" font-size="12">1e{k}</text>"#, ht - m + 18.0);
    }
    for k in y0 as i32..=y1 as i32 {
        let y = py(10f64.powi(k));
        let _ = writeln!(s, r#"<text x="{}" y="{y:.1}" text-anchor="end" font-size="12">1e{k}</text>"#, m - 6.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">h</text>"#, w / 2.0, ht - 15.0);
    if let Some(&(h_a, e_a)) = series.first().and_then(|s| s.1.first()) {
        let h_b = 10f64.powf(x0);
        for (k, &p) in guides.iter().enumerate() {
            let e_b = e_a * (h_b / h_a).powf(p);
            let _ = writeln!(
                s,
                r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#888" stroke-dasharray="6,4"/>"##,
                px(h_a),
                py(e_a),
                px(h_b),
                py(e_b)
            );
            let _ = writeln!(
                s,
                r##"<text x="{:.1}" y="{:.1}" font-size="11" fill="#555">slope {p}</text>"##,
                w - m - 70.0,
                m + 16.0 * (k as f64 + 1.0) + 16.0 * series.len() as f64
            );
        }
    }
    for (k, (name, p)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let path: Vec<String> = p
            .iter()
            .filter(|q| q.0 > 0.0 && q.1 > 0.0)
            .map(|&(h, e)| format!("{:.1},{:.1}", px(h), py(e)))
            .collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, path.join(" "));
        for q in &path {
            let (x, y) = q.split_once(',').unwrap();
            let _ = writeln!(s, r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#);
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" fill="{color}">{name}</text>"#,
            m + 10.0,
            m + 16.0 * (k as f64 + 1.0)
        );
    }
    s.push_str("</svg>\n");
    s
}
