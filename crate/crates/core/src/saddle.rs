//! Global block saddle-point system for the mixed and stabilized methods.
//!
//! Unknowns are ordered as free side-1 displacement dofs, free side-2
//! displacement dofs, then multiplier dofs, each block in its own natural
//! order (`2 * node + component` with Dirichlet dofs removed, `2 * scalar +
//! component` for the multiplier).

use std::fmt;
use std::io::Write;

use crate::diagnostics::estimate_trace_constant;
use crate::error::{Error, Result};
use crate::fem::{assemble_elasticity, DofMap, ElasticMaterial, StiffnessBlock};
use crate::interface::{
    assemble_coupling, merge_partitions, stabilization_blocks, InterfaceSide, MergedPartition,
    MultiplierKind, MultiplierSpace, StabilizationBlocks,
};
use crate::linsolve::SymmetricFactor;
use crate::mesh::{build_rect_mesh, extract_trace_mesh, BoundaryTag, Mesh2D, Point, SideTags, TraceMesh};
use crate::sparse::{CsrMatrix, Triplets};

/// Largest system handed to the direct solver.
pub const DEFAULT_MAX_DOFS: usize = 500_000;

/// Required relative residual of the linear solve.
pub const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Alpha {
    /// One tenth of the trace constant estimated on the side-1 mesh.
    Auto,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MethodSpec {
    pub degree: usize,
    pub multiplier: MultiplierKind,
    /// `None` for the mixed method.
    pub alpha: Option<Alpha>,
}

impl MethodSpec {
    pub fn mixed(degree: usize, multiplier: MultiplierKind) -> Self {
        MethodSpec {
            degree,
            multiplier,
            alpha: None,
        }
    }

    pub fn stabilized(degree: usize, multiplier: MultiplierKind, alpha: Alpha) -> Self {
        MethodSpec {
            degree,
            multiplier,
            alpha: Some(alpha),
        }
    }

    pub fn is_stabilized(&self) -> bool {
        self.alpha.is_some()
    }

    /// Parses `mixed-p1p1`, `stab-p1p0`, `stab-p2p1`, ...; a trailing `d`
    /// (`mixed-p1p1d`) selects discontinuous linear multipliers.
    pub fn parse(name: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown method `{name}`"));
        let (kind, pair) = name.split_once('-').ok_or_else(bad)?;
        let pair = pair.to_ascii_lowercase();
        let b = pair.as_bytes();
        if !(b.len() == 4 || b.len() == 5) || b[0] != b'p' || b[2] != b'p' {
            return Err(bad());
        }
        let degree = (b[1] as char).to_digit(10).ok_or_else(bad)? as usize;
        let multiplier = match (b[3], b.get(4)) {
            (b'0', None) => MultiplierKind::P0,
            (b'1', None) => MultiplierKind::P1Continuous,
            (b'1', Some(b'd')) => MultiplierKind::P1Discontinuous,
            _ => return Err(bad()),
        };
        let spec = match kind {
            "mixed" => MethodSpec::mixed(degree, multiplier),
            "stab" | "stabilized" => MethodSpec::stabilized(degree, multiplier, Alpha::Auto),
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree != 1 && self.degree != 2 {
            return Err(Error::Config(format!(
                "displacement degree must be 1 or 2, got {}",
                self.degree
            )));
        }
        if let Some(Alpha::Fixed(a)) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::Config(format!(
                    "stabilization parameter must satisfy alpha > 0, got {a}"
                )));
            }
        }
        Ok(())
    }

    pub fn with_alpha(mut self, alpha: Alpha) -> Self {
        if self.alpha.is_some() {
            self.alpha = Some(alpha);
        }
        self
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = if self.is_stabilized() { "stab" } else { "mixed" };
        let (l, suffix) = match self.multiplier {
            MultiplierKind::P0 => (0, ""),
            MultiplierKind::P1Continuous => (1, ""),
            MultiplierKind::P1Discontinuous => (1, "d"),
        };
        write!(f, "{kind}-p{}p{l}{suffix}", self.degree)
    }
}

/// `value + grad · x`
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineField {
    pub value: [f64; 2],
    pub grad: [[f64; 2]; 2],
}

impl AffineField {
    pub fn constant(value: [f64; 2]) -> Self {
        AffineField {
            value,
            grad: [[0.0; 2]; 2],
        }
    }

    pub fn eval(&self, x: Point) -> [f64; 2] {
        let g = &self.grad;
        [
            self.value[0] + g[0][0] * x[0] + g[0][1] * x[1],
            self.value[1] + g[1][0] * x[0] + g[1][1] * x[1],
        ]
    }
}

/// Two bodies, one material, fully clamped Dirichlet edges.
#[derive(Clone, Debug)]
pub struct Problem {
    pub name: String,
    pub mesh1: Mesh2D,
    pub mesh2: Mesh2D,
    pub material: ElasticMaterial,
    pub body_load: [f64; 2],
    pub dirichlet1: AffineField,
    pub dirichlet2: AffineField,
    /// Closed-form displacement, when known.
    pub exact: Option<AffineField>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    SquareSquare,
    PatchTest,
}

impl Preset {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "square-square" => Ok(Preset::SquareSquare),
            "patch-test" => Ok(Preset::PatchTest),
            _ => Err(Error::Config(format!(
                "unknown preset `{s}` (expected square-square or patch-test)"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::SquareSquare => "square-square",
            Preset::PatchTest => "patch-test",
        }
    }

    pub fn build(self, level: usize, matching: bool) -> Result<Problem> {
        match self {
            Preset::SquareSquare => square_square(level, matching),
            Preset::PatchTest => {
                let n = 4 << level;
                patch_test(n, if matching { n } else { 5 << level })
            }
        }
    }
}

/// Young's modulus and Poisson ratio of both bodies in the presets.
pub const PRESET_YOUNG: f64 = 1e3;
pub const PRESET_POISSON: f64 = 0.3;

/// Ω₁ = (0,1)², Ω₂ = (1,1.5)×(0,1), glued along x = 1. Side 1 has
/// `4·2^level` cells per side; side 2 has the same vertical resolution when
/// `matching`, otherwise `5·2^level` rows and `3·2^level` columns.
pub fn square_square(level: usize, matching: bool) -> Result<Problem> {
    use BoundaryTag::*;
    let n1 = 4usize << level;
    let (nx2, ny2) = if matching {
        (n1 / 2, n1)
    } else {
        (3usize << level, 5usize << level)
    };
    let mesh1 = build_rect_mesh(
        [0.0, 0.0],
        [1.0, 1.0],
        n1,
        n1,
        SideTags {
            bottom: Neumann,
            right: Interface,
            top: Neumann,
            left: Dirichlet,
        },
    )?;
    let mesh2 = build_rect_mesh(
        [1.0, 0.0],
        [1.5, 1.0],
        nx2,
        ny2,
        SideTags {
            bottom: Neumann,
            right: Dirichlet,
            top: Neumann,
            left: Interface,
        },
    )?;
    Ok(Problem {
        name: format!("square-square-{}", if matching { "matching" } else { "nonmatching" }),
        mesh1,
        mesh2,
        material: ElasticMaterial::new(PRESET_YOUNG, PRESET_POISSON)?,
        body_load: [0.0, 0.0],
        dirichlet1: AffineField::constant([0.1, 0.0]),
        dirichlet2: AffineField::constant([0.0, 0.0]),
        exact: None,
    })
}

/// Vertical strain of the patch test.
pub const PATCH_STRAIN: f64 = -0.01;

/// Uniform vertical compression of two stacked unit squares: Ω₂ = (0,1)²
/// below, Ω₁ = (0,1)×(1,2) above, glued along y = 1. The displacement
/// `u = (ε_xx x, ε_yy y)` with `σ_xx = 0` is prescribed on the bottom and
/// top edges; the lateral edges are traction free.
pub fn patch_test(ny1: usize, ny2: usize) -> Result<Problem> {
    use BoundaryTag::*;
    let material = ElasticMaterial::new(PRESET_YOUNG, PRESET_POISSON)?;
    let exact = patch_exact(&material);
    let mesh1 = build_rect_mesh(
        [0.0, 1.0],
        [1.0, 2.0],
        ny1,
        ny1,
        SideTags {
            bottom: Interface,
            right: Neumann,
            top: Dirichlet,
            left: Neumann,
        },
    )?;
    let mesh2 = build_rect_mesh(
        [0.0, 0.0],
        [1.0, 1.0],
        ny2,
        ny2,
        SideTags {
            bottom: Dirichlet,
            right: Neumann,
            top: Interface,
            left: Neumann,
        },
    )?;
    Ok(Problem {
        name: "patch-test".into(),
        mesh1,
        mesh2,
        material,
        body_load: [0.0, 0.0],
        dirichlet1: exact,
        dirichlet2: exact,
        exact: Some(exact),
    })
}

/// Closed-form patch-test displacement for `material`.
pub fn patch_exact(material: &ElasticMaterial) -> AffineField {
    let (c1, c2) = material.coefficients();
    let eyy = PATCH_STRAIN;
    let exx = -c2 * eyy / (c1 + c2);
    AffineField {
        value: [0.0, 0.0],
        grad: [[exx, 0.0], [0.0, eyy]],
    }
}

/// Everything assembled on the meshes that does not depend on `alpha`.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub problem: Problem,
    pub degree: usize,
    pub dofs1: DofMap,
    pub dofs2: DofMap,
    pub trace1: TraceMesh,
    pub trace2: TraceMesh,
    pub merged: MergedPartition,
    pub space: MultiplierSpace,
    /// Stiffness and load over all dofs.
    pub stiff1: StiffnessBlock,
    pub stiff2: StiffnessBlock,
    /// Coupling over all dofs.
    pub b1_full: CsrMatrix,
    pub b2_full: CsrMatrix,
}

impl Discretization {
    pub fn new(problem: &Problem, degree: usize, multiplier: MultiplierKind, max_dofs: usize) -> Result<Self> {
        let mut dofs1 = DofMap::new(&problem.mesh1, degree)?;
        let mut dofs2 = DofMap::new(&problem.mesh2, degree)?;
        let trace1 = extract_trace_mesh(&problem.mesh1).map_err(|e| e.context("side 1"))?;
        let trace2 = extract_trace_mesh(&problem.mesh2).map_err(|e| e.context("side 2"))?;
        let space = MultiplierSpace::new(multiplier, trace1.clone());
        let total = dofs1.n_dofs() + dofs2.n_dofs() + space.n_dofs();
        if total > max_dofs {
            return Err(Error::TooLarge {
                dofs: total,
                limit: max_dofs,
            });
        }
        let g1 = problem.dirichlet1;
        let g2 = problem.dirichlet2;
        dofs1.apply_dirichlet(&problem.mesh1, &|p| g1.eval(p).map(Some))?;
        dofs2.apply_dirichlet(&problem.mesh2, &|p| g2.eval(p).map(Some))?;
        if dofs1.n_free() == dofs1.n_dofs() || dofs2.n_free() == dofs2.n_dofs() {
            return Err(Error::IllPosed(
                "each body needs DIRICHLET-tagged edges to remove rigid motions".into(),
            ));
        }
        let merged = merge_partitions(&trace1, &trace2)?;
        let f = problem.body_load;
        let (stiff1, _) = assemble_elasticity(&problem.mesh1, &problem.material, degree, &|_| f)?;
        let (stiff2, _) = assemble_elasticity(&problem.mesh2, &problem.material, degree, &|_| f)?;
        let (b1_full, b2_full) = assemble_coupling(
            &merged,
            &space,
            InterfaceSide { trace: &trace1, dofs: &dofs1 },
            InterfaceSide { trace: &trace2, dofs: &dofs2 },
        );
        Ok(Discretization {
            problem: problem.clone(),
            degree,
            dofs1,
            dofs2,
            trace1,
            trace2,
            merged,
            space,
            stiff1,
            stiff2,
            b1_full,
            b2_full,
        })
    }

    pub fn n1(&self) -> usize {
        self.dofs1.n_free()
    }

    pub fn n2(&self) -> usize {
        self.dofs2.n_free()
    }

    pub fn n_mult(&self) -> usize {
        self.space.n_dofs()
    }

    /// Stiffness restricted to free dofs of side `i` (1 or 2).
    pub fn free_stiffness(&self, side: usize) -> CsrMatrix {
        let (s, d) = self.side(side);
        s.matrix.select(d.free_map(), d.n_free(), d.free_map(), d.n_free())
    }

    /// Coupling of side `i` against its free dofs.
    pub fn free_coupling(&self, side: usize) -> CsrMatrix {
        let b = if side == 1 { &self.b1_full } else { &self.b2_full };
        let d = self.side(side).1;
        let rows: Vec<Option<usize>> = (0..self.n_mult()).map(Some).collect();
        b.select(&rows, self.n_mult(), d.free_map(), d.n_free())
    }

    /// Stabilization blocks at the given `alpha`, over all side-1 dofs.
    pub fn stabilization(&self, alpha: f64) -> StabilizationBlocks {
        stabilization_blocks(
            alpha,
            &self.space,
            &self.problem.mesh1,
            &self.dofs1,
            &self.problem.material,
        )
    }

    fn side(&self, side: usize) -> (&StiffnessBlock, &DofMap) {
        match side {
            1 => (&self.stiff1, &self.dofs1),
            2 => (&self.stiff2, &self.dofs2),
            _ => panic!("side must be 1 or 2"),
        }
    }
}

/// Reduced blocks of the assembled system (free displacement dofs).
#[derive(Clone, Debug)]
pub struct SystemBlocks {
    /// `A₁` (without the stabilization term)
    pub a1: CsrMatrix,
    pub a2: CsrMatrix,
    pub b1: CsrMatrix,
    pub b2: CsrMatrix,
    /// `S`, `G₁`, `K_stab` at the chosen alpha; `None` for the mixed method.
    pub stab: Option<StabilizationBlocks>,
}

#[derive(Clone, Debug)]
pub struct SaddleSystem {
    pub method: MethodSpec,
    /// Resolved stabilization parameter.
    pub alpha: Option<f64>,
    pub disc: Discretization,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub blocks: SystemBlocks,
}

impl SaddleSystem {
    pub fn dim(&self) -> usize {
        self.matrix.n_rows
    }

    pub fn offsets(&self) -> (usize, usize, usize) {
        let (n1, n2) = (self.disc.n1(), self.disc.n2());
        (0, n1, n1 + n2)
    }

    /// Coordinate dump of the matrix: one `i j value` line per stored entry.
    pub fn write_matrix(&self, out: &mut impl Write) -> std::io::Result<()> {
        self.matrix.write_coordinate(out)
    }

    /// Right-hand side, one value per line.
    pub fn write_rhs(&self, out: &mut impl Write) -> std::io::Result<()> {
        for v in &self.rhs {
            writeln!(out, "{v:?}")?;
        }
        Ok(())
    }

    /// `B_h(w, ξ; v, μ)` for free-dof displacement pairs and multipliers.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.matrix.bilinear(y, x)
    }
}

/// Splits `m` (rows: `rows` map, columns: all dofs of `cols`) into its free
/// part and the contribution `m[:, constrained] · g`.
fn eliminate(m: &CsrMatrix, rows: &[Option<usize>], n_rows: usize, cols: &DofMap) -> (CsrMatrix, Vec<f64>) {
    let lift = cols.lifting();
    let mut t = Triplets::new(n_rows, cols.n_free());
    let mut r = vec![0.0; n_rows];
    for (i, j, v) in m.iter() {
        let Some(ri) = rows[i] else { continue };
        match cols.free_index(j) {
            Some(cj) => t.push(ri, cj, v),
            None => r[ri] += v * lift[j],
        }
    }
    (t.into_csr(), r)
}

pub fn build_system(problem: &Problem, method: &MethodSpec) -> Result<SaddleSystem> {
    build_system_with_limit(problem, method, DEFAULT_MAX_DOFS)
}

pub fn build_system_with_limit(problem: &Problem, method: &MethodSpec, max_dofs: usize) -> Result<SaddleSystem> {
    method.validate()?;
    let disc = Discretization::new(problem, method.degree, method.multiplier, max_dofs)?;
    let alpha = match method.alpha {
        None => None,
        Some(Alpha::Fixed(a)) => Some(a),
        Some(Alpha::Auto) => {
            let ci = estimate_trace_constant(&problem.mesh1, &problem.material, method.degree)?;
            Some(ci.value / 10.0)
        }
    };
    assemble(disc, *method, alpha)
}

/// Assembles the system on an existing discretization.
pub fn assemble(disc: Discretization, method: MethodSpec, alpha: Option<f64>) -> Result<SaddleSystem> {
    if method.is_stabilized() != alpha.is_some() {
        return Err(Error::Config(
            "the mixed method takes no alpha and the stabilized method requires one".into(),
        ));
    }
    if let Some(a) = alpha {
        if !(a > 0.0) {
            return Err(Error::Config(format!(
                "stabilization parameter must satisfy alpha > 0, got {a}"
            )));
        }
    }
    let (d1, d2) = (&disc.dofs1, &disc.dofs2);
    let (n1, n2, nm) = (disc.n1(), disc.n2(), disc.n_mult());
    let (o2, om) = (n1, n1 + n2);
    let all_m: Vec<Option<usize>> = (0..nm).map(Some).collect();

    let (a1, r_a1) = eliminate(&disc.stiff1.matrix, d1.free_map(), n1, d1);
    let (a2, r_a2) = eliminate(&disc.stiff2.matrix, d2.free_map(), n2, d2);
    let (b1, r_b1) = eliminate(&disc.b1_full, &all_m, nm, d1);
    let (b2, r_b2) = eliminate(&disc.b2_full, &all_m, nm, d2);
    let f1 = d1.restrict(&disc.stiff1.load);
    let f2 = d2.restrict(&disc.stiff2.load);

    let mut t = Triplets::new(n1 + n2 + nm, n1 + n2 + nm);
    t.push_block(0, 0, &a1, 1.0);
    t.push_block(o2, o2, &a2, 1.0);
    t.push_block(om, 0, &b1, 1.0);
    t.push_block_transposed(0, om, &b1, 1.0);
    t.push_block(om, o2, &b2, -1.0);
    t.push_block_transposed(o2, om, &b2, -1.0);

    let mut rhs = vec![0.0; n1 + n2 + nm];
    for i in 0..n1 {
        rhs[i] = f1[i] - r_a1[i];
    }
    for i in 0..n2 {
        rhs[o2 + i] = f2[i] - r_a2[i];
    }
    for i in 0..nm {
        rhs[om + i] = -r_b1[i] + r_b2[i];
    }

    let stab = if let Some(a) = alpha {
        let full = disc.stabilization(a);
        let (k, r_k) = eliminate(&full.k_stab, d1.free_map(), n1, d1);
        let (g1, r_g1) = eliminate(&full.g1, &all_m, nm, d1);
        t.push_block(0, 0, &k, -1.0);
        t.push_block(om, 0, &g1, -1.0);
        t.push_block_transposed(0, om, &g1, -1.0);
        t.push_block(om, om, &full.s, -1.0);
        for i in 0..n1 {
            rhs[i] += r_k[i];
        }
        for i in 0..nm {
            rhs[om + i] += r_g1[i];
        }
        Some(StabilizationBlocks {
            s: full.s,
            g1,
            k_stab: k,
        })
    } else {
        None
    };

    Ok(SaddleSystem {
        method,
        alpha,
        matrix: t.into_csr(),
        rhs,
        blocks: SystemBlocks { a1, a2, b1, b2, stab },
        disc,
    })
}

#[derive(Clone, Debug)]
pub struct Solution {
    /// Side-1 coefficients over all dofs (Dirichlet values included).
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Relative residual of the linear solve.
    pub residual: f64,
}

pub fn solve(system: &SaddleSystem) -> Result<Solution> {
    let (_, o2, om) = system.offsets();
    let nm = system.disc.n_mult();
    let factor = SymmetricFactor::new(&system.matrix, nm).map_err(|e| match e {
        Error::SingularSystem { dof, .. } => Error::SingularSystem {
            dof,
            block: if dof >= om {
                "multiplier"
            } else if dof >= o2 {
                "side-2 displacement"
            } else {
                "side-1 displacement"
            },
        },
        e => e,
    })?;
    let (x, residual) = factor.solve_refined(&system.matrix, &system.rhs, 2);
    if !(residual <= RESIDUAL_TOL) {
        return Err(Error::Inaccurate(residual));
    }
    Ok(Solution {
        u1: system.disc.dofs1.expand(&x[..o2]),
        u2: system.disc.dofs2.expand(&x[o2..om]),
        lambda: x[om..].to_vec(),
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interface::displacement_trace;
    use crate::sparse::norm;

    fn mixed_p1p1() -> MethodSpec {
        MethodSpec::mixed(1, MultiplierKind::P1Continuous)
    }

    #[test]
    fn method_names_round_trip() {
        for name in ["mixed-p1p1", "stab-p1p1", "mixed-p1p0", "stab-p1p0", "stab-p2p1", "mixed-p1p1d"] {
            assert_eq!(MethodSpec::parse(name).unwrap().to_string(), name);
        }
        assert!(MethodSpec::parse("stab-p3p1").is_err());
        assert!(MethodSpec::parse("foo").is_err());
        let bad = MethodSpec::stabilized(1, MultiplierKind::P0, Alpha::Fixed(-1.0));
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn dimension_counts() {
        // Side 1 at 4x4 (Dirichlet on the left column), side 2 at 2x4.
        let p = square_square(0, true).unwrap();
        let sys = build_system(&p, &mixed_p1p1()).unwrap();
        let free1 = 2 * (25 - 5);
        let free2 = 2 * (15 - 5);
        assert_eq!(sys.dim(), free1 + free2 + 2 * 5);
    }

    #[test]
    fn symmetric_and_blocks() {
        let p = square_square(0, false).unwrap();
        for spec in [mixed_p1p1(), MethodSpec::stabilized(1, MultiplierKind::P0, Alpha::Fixed(1e-4))] {
            let sys = build_system(&p, &spec).unwrap();
            assert!(sys.matrix.asymmetry() <= 1e-12 * sys.matrix.max_abs());
            let (_, _, om) = sys.offsets();
            let tail: f64 = sys
                .matrix
                .iter()
                .filter(|&(i, j, _)| i >= om && j >= om)
                .map(|(_, _, v)| v.abs())
                .sum();
            assert_eq!(tail == 0.0, !spec.is_stabilized());
        }
    }

    #[test]
    fn stabilized_tends_to_mixed() {
        let p = square_square(0, true).unwrap();
        let mixed = build_system(&p, &mixed_p1p1()).unwrap();
        let disc = mixed.disc.clone();
        let stab = assemble(disc, MethodSpec::stabilized(1, MultiplierKind::P1Continuous, Alpha::Auto), Some(1e-300)).unwrap();
        let diff = stab.matrix.add_scaled(&mixed.matrix, -1.0);
        assert!(diff.max_abs() < 1e-290);
    }

    #[test]
    fn inconsistent_alpha_rejected() {
        let p = square_square(0, true).unwrap();
        let sys = build_system(&p, &mixed_p1p1()).unwrap();
        assert!(matches!(assemble(sys.disc.clone(), mixed_p1p1(), Some(1.0)), Err(Error::Config(_))));
        let st = MethodSpec::stabilized(1, MultiplierKind::P0, Alpha::Auto);
        assert!(matches!(assemble(sys.disc.clone(), st, None), Err(Error::Config(_))));
        assert!(matches!(assemble(sys.disc, st, Some(0.0)), Err(Error::Config(_))));
    }

    #[test]
    fn size_guard() {
        let p = square_square(1, true).unwrap();
        assert!(matches!(
            build_system_with_limit(&p, &mixed_p1p1(), 100),
            Err(Error::TooLarge { limit: 100, .. })
        ));
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let mut p = square_square(0, false).unwrap();
        p.dirichlet1 = AffineField::constant([0.0, 0.0]);
        let sol = solve(&build_system(&p, &mixed_p1p1()).unwrap()).unwrap();
        assert!(sol.u1.iter().chain(&sol.u2).chain(&sol.lambda).all(|&v| v == 0.0));
    }

    #[test]
    fn matching_mixed_traces_agree() {
        let p = square_square(1, true).unwrap();
        let sys = build_system(&p, &mixed_p1p1()).unwrap();
        let sol = solve(&sys).unwrap();
        assert!(sol.residual <= RESIDUAL_TOL);
        let d = &sys.disc;
        for (i, &s) in d.trace1.breakpoints.iter().enumerate() {
            let e1 = i.min(d.trace1.n_edges() - 1);
            let e2 = d.trace2.locate(s).min(d.trace2.n_edges() - 1);
            let a = displacement_trace(&sol.u1, &d.trace1, &d.dofs1, e1, s);
            let b = displacement_trace(&sol.u2, &d.trace2, &d.dofs2, e2, s);
            assert!((a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9);
        }
        let jump: Vec<f64> = sys
            .blocks
            .b1
            .matvec(&d.dofs1.restrict(&sol.u1))
            .iter()
            .zip(sys.blocks.b2.matvec(&d.dofs2.restrict(&sol.u2)))
            .map(|(a, b)| a - b)
            .collect();
        assert!(norm(&jump) < 1e-12);
    }

    #[test]
    fn patch_test_reproduces_uniform_strain() {
        let p = patch_test(4, 5).unwrap();
        let exact = p.exact.unwrap();
        for spec in [mixed_p1p1(), MethodSpec::stabilized(1, MultiplierKind::P1Continuous, Alpha::Auto)] {
            let sys = build_system(&p, &spec).unwrap();
            let sol = solve(&sys).unwrap();
            let (c1, c2) = p.material.coefficients();
            let (exx, eyy) = (exact.grad[0][0], exact.grad[1][1]);
            let syy = c1 * eyy + c2 * (exx + eyy);
            for i in 0..sys.disc.space.n_scalar() {
                assert!(sol.lambda[2 * i].abs() <= 1e-8 * syy.abs(), "{spec}");
                assert!((sol.lambda[2 * i + 1] - syy).abs() <= 1e-8 * syy.abs(), "{spec}");
            }
            for (d, u) in [(&sys.disc.dofs1, &sol.u1), (&sys.disc.dofs2, &sol.u2)] {
                let want = d.interpolate(&|x| exact.eval(x));
                for (a, b) in u.iter().zip(&want) {
                    assert!((a - b).abs() < 1e-10);
                }
            }
        }
    }
}
