//! Mortar coupling across a nonmatching interface.
//!
//! The multiplier lives on the side-1 trace partition. Integrals that pair
//! side-1 and side-2 quantities are evaluated on the merged partition (the
//! common refinement of both traces), where every integrand is a polynomial.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fem::{traction_basis, DofMap, ElasticMaterial};
use crate::linsolve::SymmetricFactor;
use crate::mesh::{Mesh2D, TraceMesh};
use crate::quadrature::LineRule;
use crate::sparse::{CsrMatrix, Triplets};

/// Relative length below which merged segments are treated as round-off.
pub const SLIVER_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub left: f64,
    pub right: f64,
    pub edge1: usize,
    pub edge2: usize,
}

impl Segment {
    pub fn len(&self) -> f64 {
        self.right - self.left
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MergedPartition {
    pub segments: Vec<Segment>,
}

impl MergedPartition {
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.segments.iter().map(|s| s.left).collect();
        if let Some(s) = self.segments.last() {
            b.push(s.right);
        }
        b
    }
}

/// Common refinement of two partitions of the same interface.
pub fn merge_partitions(trace1: &TraceMesh, trace2: &TraceMesh) -> Result<MergedPartition> {
    let (l1, l2) = (trace1.length(), trace2.length());
    let tol = 1e-12 * l1.max(l2);
    let (o1, o2) = (trace1.line.origin, trace2.line.origin);
    if (l1 - l2).abs() > tol || (o1[0] - o2[0]).abs() > tol || (o1[1] - o2[1]).abs() > tol {
        return Err(Error::InvalidGeometry(format!(
            "interface extents differ: {l1} from {o1:?} vs {l2} from {o2:?}"
        )));
    }
    let length = l1;
    let mut all: Vec<f64> = trace1
        .breakpoints
        .iter()
        .chain(&trace2.breakpoints)
        .copied()
        .collect();
    all.sort_by(f64::total_cmp);
    let sliver = SLIVER_TOL * length;
    let mut points: Vec<f64> = vec![0.0];
    for &b in &all[1..] {
        if b - points.last().unwrap() > sliver {
            points.push(b);
        }
    }
    *points.last_mut().unwrap() = length;
    if points.len() < 2 {
        return Err(Error::InvalidGeometry("degenerate interface".into()));
    }
    let segments = points
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            Segment {
                left: w[0],
                right: w[1],
                edge1: trace1.locate(mid),
                edge2: trace2.locate(mid),
            }
        })
        .collect();
    Ok(MergedPartition { segments })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MultiplierKind {
    /// Piecewise constant.
    P0,
    /// Continuous piecewise linear.
    P1Continuous,
    /// Discontinuous piecewise linear.
    P1Discontinuous,
}

impl MultiplierKind {
    pub fn degree(self) -> usize {
        match self {
            MultiplierKind::P0 => 0,
            _ => 1,
        }
    }

    /// Parses `P<l>` or `P<l>-<continuous|discontinuous>`.
    pub fn parse(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let (deg, cont) = match lower.split_once('-') {
            Some((d, c)) => (d, Some(c)),
            None => (lower.as_str(), None),
        };
        match (deg, cont) {
            ("p0", None | Some("discontinuous")) => Ok(MultiplierKind::P0),
            ("p0", Some("continuous")) => Err(Error::Config(
                "a continuous multiplier needs degree l >= 1 (P0 cannot be continuous)".into(),
            )),
            ("p1", None | Some("continuous")) => Ok(MultiplierKind::P1Continuous),
            ("p1", Some("discontinuous")) => Ok(MultiplierKind::P1Discontinuous),
            _ => Err(Error::Config(format!("unknown multiplier space `{s}`"))),
        }
    }
}

/// Vector-valued multiplier space on the side-1 trace; dof `2 * scalar + c`.
#[derive(Clone, Debug)]
pub struct MultiplierSpace {
    pub kind: MultiplierKind,
    pub trace: TraceMesh,
}

impl MultiplierSpace {
    pub fn new(kind: MultiplierKind, trace: TraceMesh) -> Self {
        MultiplierSpace { kind, trace }
    }

    pub fn n_scalar(&self) -> usize {
        let ne = self.trace.n_edges();
        match self.kind {
            MultiplierKind::P0 => ne,
            MultiplierKind::P1Continuous => ne + 1,
            MultiplierKind::P1Discontinuous => 2 * ne,
        }
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.n_scalar()
    }

    /// Scalar basis functions nonzero on edge `e`, at local coordinate `xi`.
    pub fn local_basis(&self, e: usize, xi: f64) -> ([usize; 2], [f64; 2], usize) {
        match self.kind {
            MultiplierKind::P0 => ([e, e], [1.0, 0.0], 1),
            MultiplierKind::P1Continuous => ([e, e + 1], [1.0 - xi, xi], 2),
            MultiplierKind::P1Discontinuous => ([2 * e, 2 * e + 1], [1.0 - xi, xi], 2),
        }
    }

    /// Value at arc length `s` inside edge `e`.
    pub fn evaluate_on_edge(&self, coeffs: &[f64], e: usize, s: f64) -> [f64; 2] {
        let (a, b) = self.trace.edge(e);
        let (idx, val, n) = self.local_basis(e, (s - a) / (b - a));
        let mut out = [0.0; 2];
        for k in 0..n {
            out[0] += val[k] * coeffs[2 * idx[k]];
            out[1] += val[k] * coeffs[2 * idx[k] + 1];
        }
        out
    }

    pub fn evaluate(&self, coeffs: &[f64], s: f64) -> [f64; 2] {
        self.evaluate_on_edge(coeffs, self.trace.locate(s), s)
    }

    /// Sample abscissae for profiles: edge midpoints for P0, breakpoints for
    /// continuous P1, both edge endpoints for discontinuous P1.
    pub fn samples(&self) -> Vec<(usize, f64)> {
        let t = &self.trace;
        match self.kind {
            MultiplierKind::P0 => (0..t.n_edges())
                .map(|e| (e, 0.5 * (t.breakpoints[e] + t.breakpoints[e + 1])))
                .collect(),
            MultiplierKind::P1Continuous => t
                .breakpoints
                .iter()
                .enumerate()
                .map(|(i, &s)| (i.min(t.n_edges() - 1), s))
                .collect(),
            MultiplierKind::P1Discontinuous => (0..t.n_edges())
                .flat_map(|e| [(e, t.breakpoints[e]), (e, t.breakpoints[e + 1])])
                .collect(),
        }
    }

    /// `(s, λ·n, λ·t)` at the profile samples.
    pub fn profile(&self, coeffs: &[f64]) -> Vec<(f64, f64, f64)> {
        let (n, t) = (self.trace.line.normal, self.trace.line.tangent);
        self.samples()
            .into_iter()
            .map(|(e, s)| {
                let l = self.evaluate_on_edge(coeffs, e, s);
                (s, l[0] * n[0] + l[1] * n[1], l[0] * t[0] + l[1] * t[1])
            })
            .collect()
    }

    /// CSV with columns `s, lambda_n, lambda_t`.
    pub fn write_profile_csv(&self, coeffs: &[f64], out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "s,lambda_n,lambda_t")?;
        for (s, ln, lt) in self.profile(coeffs) {
            writeln!(out, "{s:?},{ln:?},{lt:?}")?;
        }
        Ok(())
    }
}

/// Trace basis of a displacement space on its own interface partition.
fn displacement_trace_basis(trace: &TraceMesh, dofs: &DofMap, e: usize, xi: f64) -> Vec<(usize, f64)> {
    let (a, b) = (trace.vertices[e], trace.vertices[e + 1]);
    match dofs.degree {
        1 => vec![(a, 1.0 - xi), (b, xi)],
        _ => {
            let m = dofs.edge_node(a, b).expect("P2 edge node");
            vec![
                (a, (1.0 - xi) * (1.0 - 2.0 * xi)),
                (m, 4.0 * xi * (1.0 - xi)),
                (b, xi * (2.0 * xi - 1.0)),
            ]
        }
    }
}

/// Evaluates a displacement field's trace at `s` on edge `e` of `trace`.
pub fn displacement_trace(coeffs: &[f64], trace: &TraceMesh, dofs: &DofMap, e: usize, s: f64) -> [f64; 2] {
    let (a, b) = trace.edge(e);
    let mut out = [0.0; 2];
    for (node, v) in displacement_trace_basis(trace, dofs, e, (s - a) / (b - a)) {
        out[0] += v * coeffs[DofMap::dof(node, 0)];
        out[1] += v * coeffs[DofMap::dof(node, 1)];
    }
    out
}

/// One side of the interface: its trace partition and displacement dofs.
#[derive(Clone, Copy)]
pub struct InterfaceSide<'a> {
    pub trace: &'a TraceMesh,
    pub dofs: &'a DofMap,
}

/// `(B_i)_{μ, v} = ∫_Γ μ · v_i ds` for both sides, over all displacement
/// dofs. The constraint row reads `B₁u₁ − B₂u₂ = 0`.
pub fn assemble_coupling(
    merged: &MergedPartition,
    space: &MultiplierSpace,
    side1: InterfaceSide<'_>,
    side2: InterfaceSide<'_>,
) -> (CsrMatrix, CsrMatrix) {
    let rule = LineRule::gauss(2);
    let mut out = Vec::with_capacity(2);
    for (k, side) in [side1, side2].into_iter().enumerate() {
        let mut trip = Triplets::new(space.n_dofs(), side.dofs.n_dofs());
        for seg in &merged.segments {
            let e_mult = seg.edge1;
            let e_disp = if k == 0 { seg.edge1 } else { seg.edge2 };
            let (ma, mb) = space.trace.edge(e_mult);
            let (da, db) = side.trace.edge(e_disp);
            for (s, w) in rule.on(seg.left, seg.right) {
                let (idx, val, n) = space.local_basis(e_mult, (s - ma) / (mb - ma));
                let disp = displacement_trace_basis(side.trace, side.dofs, e_disp, (s - da) / (db - da));
                for i in 0..n {
                    for &(node, phi) in &disp {
                        for c in 0..2 {
                            trip.push(2 * idx[i] + c, DofMap::dof(node, c), w * val[i] * phi);
                        }
                    }
                }
            }
        }
        out.push(trip.into_csr());
    }
    let b2 = out.pop().unwrap();
    let b1 = out.pop().unwrap();
    (b1, b2)
}

/// Blocks of the residual stabilization `α (h (λ + σ(u₁)n), μ + σ(v₁)n)_Γ`.
#[derive(Clone, Debug)]
pub struct StabilizationBlocks {
    /// `α ∫ h λ·μ` (multiplier × multiplier)
    pub s: CsrMatrix,
    /// `α ∫ h σ(u₁)n·μ` (multiplier × side-1 dofs)
    pub g1: CsrMatrix,
    /// `α ∫ h σ(u₁)n·σ(v₁)n` (side-1 dofs × side-1 dofs)
    pub k_stab: CsrMatrix,
}

/// Stabilization blocks for `alpha > 0`.
pub fn assemble_stabilization(
    alpha: f64,
    space: &MultiplierSpace,
    mesh1: &Mesh2D,
    dofs1: &DofMap,
    material: &ElasticMaterial,
) -> Result<StabilizationBlocks> {
    if !(alpha > 0.0) {
        return Err(Error::Config(format!(
            "stabilization parameter must satisfy alpha > 0, got {alpha}"
        )));
    }
    Ok(stabilization_blocks(alpha, space, mesh1, dofs1, material))
}

/// Same as [`assemble_stabilization`] without the sign check on `alpha`.
pub fn stabilization_blocks(
    alpha: f64,
    space: &MultiplierSpace,
    mesh1: &Mesh2D,
    dofs1: &DofMap,
    material: &ElasticMaterial,
) -> StabilizationBlocks {
    let trace = &space.trace;
    let normal = trace.line.normal;
    // Integrands have degree <= 2 per edge for k <= 2, l <= 1.
    let rule = LineRule::gauss(2);
    let nl = space.n_dofs();
    let nd = dofs1.n_dofs();
    let mut s = Triplets::new(nl, nl);
    let mut g = Triplets::new(nl, nd);
    let mut k = Triplets::new(nd, nd);
    for e in 0..trace.n_edges() {
        let (a, b) = trace.edge(e);
        let h = b - a;
        for (x, w) in rule.on(a, b) {
            let wq = alpha * h * w;
            let (idx, val, n) = space.local_basis(e, (x - a) / h);
            let tr = traction_basis(mesh1, dofs1, material, trace.cells[e], trace.line.point(x), normal);
            for i in 0..n {
                for j in 0..n {
                    for c in 0..2 {
                        s.push(2 * idx[i] + c, 2 * idx[j] + c, wq * val[i] * val[j]);
                    }
                }
                for &(dof, t) in &tr {
                    for c in 0..2 {
                        g.push(2 * idx[i] + c, dof, wq * val[i] * t[c]);
                    }
                }
            }
            for &(di, ti) in &tr {
                for &(dj, tj) in &tr {
                    k.push(di, dj, wq * (ti[0] * tj[0] + ti[1] * tj[1]));
                }
            }
        }
    }
    StabilizationBlocks {
        s: s.to_csr(),
        g1: g.to_csr(),
        k_stab: k.to_csr(),
    }
}

/// Multiplier mass matrix `∫ w_E λ·μ` with a weight constant per trace edge.
pub fn weighted_mass(space: &MultiplierSpace, weight: &dyn Fn(f64) -> f64) -> CsrMatrix {
    let rule = LineRule::gauss(2);
    let nl = space.n_dofs();
    let mut m = Triplets::new(nl, nl);
    for e in 0..space.trace.n_edges() {
        let (a, b) = space.trace.edge(e);
        let we = weight(b - a);
        for (x, w) in rule.on(a, b) {
            let (idx, val, n) = space.local_basis(e, (x - a) / (b - a));
            for i in 0..n {
                for j in 0..n {
                    for c in 0..2 {
                        m.push(2 * idx[i] + c, 2 * idx[j] + c, we * w * val[i] * val[j]);
                    }
                }
            }
        }
    }
    m.to_csr()
}

pub fn mass_matrix(space: &MultiplierSpace) -> CsrMatrix {
    weighted_mass(space, &|_| 1.0)
}

/// `L²` projection onto continuous P1 multipliers of a field given on the
/// arc length. `breaks` lists points where `values` may be discontinuous;
/// moments use 4-point Gauss on the partition refined by them.
pub fn l2_project(
    space: &MultiplierSpace,
    values: &dyn Fn(f64) -> [f64; 2],
    breaks: &[f64],
) -> Result<Vec<f64>> {
    if space.kind != MultiplierKind::P1Continuous {
        return Err(Error::Config(
            "L2 projection is defined onto continuous P1 multipliers".into(),
        ));
    }
    let extra = TraceMesh {
        breakpoints: {
            let mut b: Vec<f64> = breaks
                .iter()
                .copied()
                .filter(|&s| s > 0.0 && s < space.trace.length())
                .collect();
            b.insert(0, 0.0);
            b.push(space.trace.length());
            b.sort_by(f64::total_cmp);
            b.dedup();
            b
        },
        line: space.trace.line,
        vertices: Vec::new(),
        cells: Vec::new(),
    };
    let merged = merge_partitions(&space.trace, &extra)?;
    let rule = LineRule::gauss(4);
    let mut rhs = vec![0.0; space.n_dofs()];
    for seg in &merged.segments {
        let (a, b) = space.trace.edge(seg.edge1);
        for (s, w) in rule.on(seg.left, seg.right) {
            let f = values(s);
            let (idx, val, n) = space.local_basis(seg.edge1, (s - a) / (b - a));
            for i in 0..n {
                rhs[2 * idx[i]] += w * val[i] * f[0];
                rhs[2 * idx[i] + 1] += w * val[i] * f[1];
            }
        }
    }
    let mass = mass_matrix(space);
    let factor = SymmetricFactor::new(&mass, 0)
        .map_err(|e| Error::Numerical(format!("multiplier mass matrix is singular: {e}")))?;
    Ok(factor.solve_refined(&mass, &rhs, 1).0)
}

/// Extends continuous P1 multiplier coefficients to a side-1 P1 field that
/// vanishes at every node off the interface.
pub fn discrete_extension(space: &MultiplierSpace, coeffs: &[f64], dofs1: &DofMap) -> Result<Vec<f64>> {
    if space.kind != MultiplierKind::P1Continuous || dofs1.degree != 1 {
        return Err(Error::Config(
            "discrete extension needs continuous P1 multipliers and P1 displacements".into(),
        ));
    }
    let mut u = vec![0.0; dofs1.n_dofs()];
    for (i, &v) in space.trace.vertices.iter().enumerate() {
        u[DofMap::dof(v, 0)] = coeffs[2 * i];
        u[DofMap::dof(v, 1)] = coeffs[2 * i + 1];
    }
    Ok(u)
}

/// Nodal trace of a side-1 P1 field on the multiplier breakpoints.
pub fn trace_restriction(space: &MultiplierSpace, u: &[f64]) -> Vec<f64> {
    space
        .trace
        .vertices
        .iter()
        .flat_map(|&v| [u[DofMap::dof(v, 0)], u[DofMap::dof(v, 1)]])
        .collect()
}
