//! Numerical estimates of the stability constants: discrete trace constant,
//! mesh-dependent inf-sup constant, projection stability, extension
//! constant, and mesh uniformity.
//!
//! Each estimate is a symmetric generalized eigenproblem. The large sparse
//! pencils are reduced exactly to dense problems whose size is the number
//! of interface quadrature values or multiplier dofs, so only those small
//! matrices are ever densified.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fem::{assemble_vector_laplacian, traction_basis, DofMap, ElasticMaterial};
use crate::interface::{weighted_mass, MultiplierKind, MultiplierSpace};
use crate::linsolve::SymmetricFactor;
use crate::mesh::{extract_trace_mesh, mesh_uniformity_ratio, Mesh2D, TraceMesh};
use crate::quadrature::LineRule;
use crate::saddle::Discretization;
use crate::sparse::CsrMatrix;

/// Largest accepted eigensolver residual.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralReport {
    pub constant: String,
    pub value: f64,
    pub level: Option<usize>,
    /// Largest interface edge length.
    pub h: f64,
    pub method: String,
    /// Relative residual `‖Ax − λBx‖ / (|λ| ‖Bx‖)` of the selected eigenpair.
    pub residual: f64,
}

impl SpectralReport {
    pub fn at_level(mut self, level: usize) -> Self {
        self.level = Some(level);
        self
    }
}

/// Writes `constant,level,h,value` rows.
pub fn write_reports_csv(reports: &[SpectralReport], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "constant,level,h,value")?;
    for r in reports {
        let level = r.level.map(|l| l.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{:?},{:?}", r.constant, level, r.h, r.value)?;
    }
    Ok(())
}

/// Eigenpairs of `A x = λ B x` with `B` symmetric positive definite,
/// eigenvalues ascending, eigenvectors in the original variables.
pub struct GeneralizedEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl GeneralizedEigen {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let l = b
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical("pencil mass matrix is not positive definite".into()))?
            .l();
        let li = l
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
        let mut c = &li * &a * li.transpose();
        c = 0.5 * (&c + c.transpose());
        let eig = c.symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let lt_inv = li.transpose();
        let mut vectors = DMatrix::zeros(a.nrows(), order.len());
        for (k, &i) in order.iter().enumerate() {
            vectors.set_column(k, &(&lt_inv * eig.eigenvectors.column(i)));
        }
        Ok(GeneralizedEigen { values, vectors, a, b })
    }

    pub fn min(&self) -> (f64, f64) {
        (self.values[0], self.residual(0))
    }

    pub fn max(&self) -> (f64, f64) {
        let k = self.values.len() - 1;
        (self.values[k], self.residual(k))
    }

    pub fn residual(&self, k: usize) -> f64 {
        let x: DVector<f64> = self.vectors.column(k).into();
        let bx = &self.b * &x;
        let r = &self.a * &x - self.values[k] * &bx;
        let scale = (self.values[k].abs() * bx.norm()).max(f64::MIN_POSITIVE);
        r.norm() / scale
    }
}

fn check_residual(name: &str, residual: f64) -> Result<()> {
    if residual > EIGEN_RESIDUAL_TOL {
        return Err(Error::Numerical(format!(
            "{name}: eigensolver residual {residual:.3e} exceeds {EIGEN_RESIDUAL_TOL:.0e}"
        )));
    }
    Ok(())
}

fn factor_spd(a: &CsrMatrix, what: &str) -> Result<SymmetricFactor> {
    SymmetricFactor::new(a, 0).map_err(|e| match e {
        Error::SingularSystem { dof, .. } => Error::IllPosed(format!(
            "{what} stiffness is singular after Dirichlet elimination (dof {dof}); \
             the body needs enough DIRICHLET data"
        )),
        e => e,
    })
}

/// Columns `A⁻¹ Mᵀ` for the rows of `m` (dense, column-major).
fn solve_rows(factor: &SymmetricFactor, m: &CsrMatrix) -> Vec<f64> {
    let n = factor.dim();
    let mut cols = vec![0.0; n * m.n_rows];
    for i in 0..m.n_rows {
        for (j, v) in m.row(i) {
            cols[i * n + j] = v;
        }
    }
    factor.solve_columns(&mut cols, m.n_rows);
    cols
}

/// `C_I = 1/θ_max` for `T x = θ A₁ x`, where `T` is the h-weighted traction
/// form on the interface and `A₁` the side-1 stiffness with Dirichlet dofs
/// eliminated.
pub fn estimate_trace_constant(mesh1: &Mesh2D, material: &ElasticMaterial, degree: usize) -> Result<SpectralReport> {
    let trace = extract_trace_mesh(mesh1)?;
    let mut dofs = DofMap::new(mesh1, degree)?;
    dofs.apply_dirichlet(mesh1, &|_| [Some(0.0), Some(0.0)])?;
    let (stiff, _) = crate::fem::assemble_elasticity(mesh1, material, degree, &|_| [0.0, 0.0])?;
    let a = stiff.matrix.select(dofs.free_map(), dofs.n_free(), dofs.free_map(), dofs.n_free());
    let factor = factor_spd(&a, "side-1")?;

    // T = Cᵀ W C with rows of C the traction components at interface
    // quadrature points. A single point per edge is exact for P1 tractions.
    let rule = LineRule::gauss(degree);
    let normal = trace.line.normal;
    let mut c = crate::sparse::Triplets::new(2 * rule.points.len() * trace.n_edges(), dofs.n_free());
    let mut sqrt_w = Vec::new();
    let mut row = 0;
    for e in 0..trace.n_edges() {
        let (sa, sb) = trace.edge(e);
        let h = sb - sa;
        for (s, w) in rule.on(sa, sb) {
            let tr = traction_basis(mesh1, &dofs, material, trace.cells[e], trace.line.point(s), normal);
            for comp in 0..2 {
                for &(dof, t) in &tr {
                    if let Some(k) = dofs.free_index(dof) {
                        c.push(row + comp, k, t[comp]);
                    }
                }
                sqrt_w.push((h * w).sqrt());
            }
            row += 2;
        }
    }
    let c = c.to_csr();
    let m = c.n_rows;
    let z = solve_rows(&factor, &c);
    let n = dofs.n_free();
    let mut hmat = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let zj = &z[j * n..(j + 1) * n];
            hmat[(i, j)] = sqrt_w[i] * sqrt_w[j] * c.row(i).map(|(k, v)| v * zj[k]).sum::<f64>();
        }
    }
    let eig = GeneralizedEigen::new(hmat, DMatrix::identity(m, m))?;
    let (theta, residual) = eig.max();
    if !(theta > 0.0) {
        return Err(Error::EmptyInterface);
    }
    check_residual("trace constant", residual)?;
    Ok(SpectralReport {
        constant: "C_I".into(),
        value: 1.0 / theta,
        level: None,
        h: trace.h_max(),
        method: format!("P{degree}"),
        residual,
    })
}

/// `β_h = sqrt(λ_min)` of `(B A⁻¹ Bᵀ) x = λ M_h x` with `B = [B₁, −B₂]` on
/// free displacement dofs and `M_h` the h-weighted multiplier mass.
pub fn infsup_mesh_norm(disc: &Discretization) -> Result<SpectralReport> {
    let nm = disc.n_mult();
    let mut schur = DMatrix::<f64>::zeros(nm, nm);
    for side in [1, 2] {
        let a = disc.free_stiffness(side);
        let b = disc.free_coupling(side);
        let factor = factor_spd(&a, if side == 1 { "side-1" } else { "side-2" })?;
        let z = solve_rows(&factor, &b);
        let n = a.n_rows;
        for i in 0..nm {
            for j in 0..nm {
                let zj = &z[j * n..(j + 1) * n];
                schur[(i, j)] += b.row(i).map(|(k, v)| v * zj[k]).sum::<f64>();
            }
        }
    }
    let mh = weighted_mass(&disc.space, &|h| h).to_dense();
    let eig = GeneralizedEigen::new(schur, mh)?;
    let (lmin, residual) = eig.min();
    check_residual("inf-sup", residual)?;
    Ok(SpectralReport {
        constant: "beta_h".into(),
        value: lmin.max(0.0).sqrt(),
        level: None,
        h: disc.trace1.h_max(),
        method: format!("P{}-{:?}", disc.degree, disc.space.kind),
        residual,
    })
}

/// Scalar hat-function products `∫ w φ_i ψ_j` between the continuous P1
/// space on `coarse` and on a refinement `fine`, with the weight taken per
/// coarse edge.
fn hat_products(coarse: &TraceMesh, fine: &TraceMesh, weight: &dyn Fn(f64) -> f64) -> DMatrix<f64> {
    let rule = LineRule::gauss(2);
    let mut m = DMatrix::zeros(coarse.n_edges() + 1, fine.n_edges() + 1);
    for f in 0..fine.n_edges() {
        let (fa, fb) = fine.edge(f);
        let e = coarse.locate(0.5 * (fa + fb));
        let (ca, cb) = coarse.edge(e);
        let w = weight(cb - ca);
        for (s, q) in rule.on(fa, fb) {
            let xc = (s - ca) / (cb - ca);
            let xf = (s - fa) / (fb - fa);
            for (i, vi) in [(e, 1.0 - xc), (e + 1, xc)] {
                for (j, vj) in [(f, 1.0 - xf), (f + 1, xf)] {
                    m[(i, j)] += w * q * vi * vj;
                }
            }
        }
    }
    m
}

/// Largest `‖h^{-1/2} π_h v‖ / ‖h^{-1/2} v‖` over continuous P1 probes `v`
/// on the once-refined trace mesh; `h` is the mesh function of `trace`.
/// The result is a lower bound for the constant over all of `L²`.
pub fn projection_stability(trace: &TraceMesh) -> Result<SpectralReport> {
    let fine = trace.refined();
    let mass_c = hat_products(trace, trace, &|_| 1.0);
    let mixed = hat_products(trace, &fine, &|_| 1.0);
    let p = mass_c
        .cholesky()
        .ok_or_else(|| Error::Numerical("multiplier mass matrix is singular".into()))?
        .solve(&mixed);
    let inv_h = |h: f64| 1.0 / h;
    let wc = hat_products(trace, trace, &inv_h);
    // Probe-space mass with the coarse mesh function: ∫ h⁻¹ ψ_i ψ_j.
    let rule = LineRule::gauss(2);
    let nf = fine.n_edges() + 1;
    let mut wf = DMatrix::zeros(nf, nf);
    for f in 0..fine.n_edges() {
        let (fa, fb) = fine.edge(f);
        let h = trace.h(trace.locate(0.5 * (fa + fb)));
        for (s, q) in rule.on(fa, fb) {
            let x = (s - fa) / (fb - fa);
            for (i, vi) in [(f, 1.0 - x), (f + 1, x)] {
                for (j, vj) in [(f, 1.0 - x), (f + 1, x)] {
                    wf[(i, j)] += q * vi * vj / h;
                }
            }
        }
    }
    let lhs = p.transpose() * wc * &p;
    let eig = GeneralizedEigen::new(0.5 * (&lhs + lhs.transpose()), wf)?;
    let (lmax, residual) = eig.max();
    check_residual("projection stability", residual)?;
    Ok(SpectralReport {
        constant: "C_pi".into(),
        value: lmax.sqrt(),
        level: None,
        h: trace.h_max(),
        method: "P1-continuous".into(),
        residual,
    })
}

/// `C_E = λ_max` of `(Eᵀ L E) x = λ W x`, where `E` extends continuous P1
/// multipliers by zero into side 1, `L` is the vector Laplacian and `W` the
/// h⁻¹-weighted multiplier mass.
pub fn extension_constant(mesh1: &Mesh2D) -> Result<SpectralReport> {
    let trace = extract_trace_mesh(mesh1)?;
    let dofs = DofMap::new(mesh1, 1)?;
    let lap = assemble_vector_laplacian(mesh1, &dofs);
    let space = MultiplierSpace::new(MultiplierKind::P1Continuous, trace);
    let mut map = vec![None; dofs.n_dofs()];
    for (i, &v) in space.trace.vertices.iter().enumerate() {
        map[DofMap::dof(v, 0)] = Some(2 * i);
        map[DofMap::dof(v, 1)] = Some(2 * i + 1);
    }
    let ete = lap.select(&map, space.n_dofs(), &map, space.n_dofs()).to_dense();
    let w = weighted_mass(&space, &|h| 1.0 / h).to_dense();
    let eig = GeneralizedEigen::new(ete, w)?;
    let (lmax, residual) = eig.max();
    check_residual("extension constant", residual)?;
    Ok(SpectralReport {
        constant: "C_E".into(),
        value: lmax,
        level: None,
        h: space.trace.h_max(),
        method: "P1-continuous".into(),
        residual,
    })
}

pub fn uniformity_report(trace: &TraceMesh) -> SpectralReport {
    SpectralReport {
        constant: "uniformity".into(),
        value: mesh_uniformity_ratio(trace),
        level: None,
        h: trace.h_max(),
        method: String::new(),
        residual: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interface::stabilization_blocks;
    use crate::mesh::{build_rect_mesh, BoundaryTag::*, SideTags};
    use crate::saddle::square_square;

    fn side1(n: usize) -> Mesh2D {
        let tags = SideTags {
            bottom: Neumann,
            right: Interface,
            top: Neumann,
            left: Dirichlet,
        };
        build_rect_mesh([0.0, 0.0], [1.0, 1.0], n, n, tags).unwrap()
    }

    /// Dense pencil `K_stab(α=1) x = θ A₁ x` assembled from the full blocks.
    fn dense_trace_constant(mesh: &Mesh2D, mat: &ElasticMaterial, degree: usize) -> f64 {
        let trace = extract_trace_mesh(mesh).unwrap();
        let mut dofs = DofMap::new(mesh, degree).unwrap();
        dofs.apply_dirichlet(mesh, &|_| [Some(0.0), Some(0.0)]).unwrap();
        let space = MultiplierSpace::new(MultiplierKind::P0, trace);
        let k = stabilization_blocks(1.0, &space, mesh, &dofs, mat).k_stab;
        let (a, _) = crate::fem::assemble_elasticity(mesh, mat, degree, &|_| [0.0, 0.0]).unwrap();
        let f = dofs.free_map();
        let nf = dofs.n_free();
        let kd = k.select(f, nf, f, nf).to_dense();
        let ad = a.matrix.select(f, nf, f, nf).to_dense();
        // θ_max of K x = θ A x via the A-Cholesky transform.
        let eig = GeneralizedEigen::new(kd, ad).unwrap();
        1.0 / eig.max().0
    }

    #[test]
    fn trace_constant_matches_dense_pencil() {
        let mat = ElasticMaterial::new(1e3, 0.3).unwrap();
        for (n, k) in [(1, 1), (2, 1), (4, 1), (2, 2)] {
            let m = side1(n);
            let got = estimate_trace_constant(&m, &mat, k).unwrap();
            let want = dense_trace_constant(&m, &mat, k);
            assert!((got.value - want).abs() < 1e-9 * want, "n={n} k={k}: {} vs {want}", got.value);
            assert!(got.residual <= EIGEN_RESIDUAL_TOL);
        }
    }

    #[test]
    fn single_element_baseline() {
        let mat = ElasticMaterial::new(1e3, 0.3).unwrap();
        let v = estimate_trace_constant(&side1(1), &mat, 1).unwrap().value;
        let dense = dense_trace_constant(&side1(1), &mat, 1);
        assert!((dense - SINGLE_ELEMENT_CI).abs() < 1e-10 * SINGLE_ELEMENT_CI);
        assert!((v - SINGLE_ELEMENT_CI).abs() < 1e-10 * SINGLE_ELEMENT_CI, "{v:?}");
    }

    // Frozen from the dense pencil oracle above.
    const SINGLE_ELEMENT_CI: f64 = 0.0005611840415916823;

    #[test]
    fn trace_constant_scales_with_young() {
        let m = side1(2);
        let a = estimate_trace_constant(&m, &ElasticMaterial::new(1e3, 0.3).unwrap(), 1).unwrap();
        let b = estimate_trace_constant(&m, &ElasticMaterial::new(2e3, 0.3).unwrap(), 1).unwrap();
        assert!((a.value / b.value - 2.0).abs() < 1e-10);
    }

    #[test]
    fn no_interface_is_an_error() {
        let m = build_rect_mesh([0.0, 0.0], [1.0, 1.0], 2, 2, SideTags::all(Dirichlet)).unwrap();
        let mat = ElasticMaterial::new(1e3, 0.3).unwrap();
        assert!(matches!(estimate_trace_constant(&m, &mat, 1), Err(Error::EmptyInterface)));
    }

    #[test]
    fn projection_examples() {
        let uni = projection_stability(&TraceMesh::uniform(8, 1.0).unwrap()).unwrap();
        assert!(uni.value >= 1.0 - 1e-12 && uni.value <= 2.0);
        let mut b = vec![0.0];
        let mut h = 1.0;
        for _ in 0..16 {
            b.push(b.last().unwrap() + h);
            h *= 1.1;
        }
        let total = *b.last().unwrap();
        let graded = TraceMesh::from_breakpoints(b.iter().map(|x| x / total).collect()).unwrap();
        let g = projection_stability(&graded).unwrap();
        assert!(g.value.is_finite() && g.value >= 1.0 && g.value <= 4.0, "{}", g.value);
    }

    #[test]
    fn infsup_small_cases() {
        let p = square_square(0, true).unwrap();
        let d = Discretization::new(&p, 1, MultiplierKind::P1Continuous, usize::MAX).unwrap();
        let r = infsup_mesh_norm(&d).unwrap();
        assert!(r.value > 0.0 && r.residual <= EIGEN_RESIDUAL_TOL);
    }

    #[test]
    fn reports_csv() {
        let r = SpectralReport {
            constant: "C_I".into(),
            value: 0.5,
            level: Some(2),
            h: 0.25,
            method: "P1".into(),
            residual: 0.0,
        };
        let mut buf = Vec::new();
        write_reports_csv(&[r], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "constant,level,h,value\nC_I,2,0.25,0.5\n");
    }
}
