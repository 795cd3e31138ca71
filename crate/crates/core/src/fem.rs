//! Lagrange P1/P2 elasticity on triangles: constitutive law, dof maps,
//! stiffness/load assembly and interface tractions.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::mesh::{signed_area, BoundaryTag, Mesh2D, Point, TraceMesh};
use crate::quadrature::TriangleRule;
use crate::sparse::{CsrMatrix, Triplets};

pub type Tensor2 = [[f64; 2]; 2];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElasticMaterial {
    pub young: f64,
    pub poisson: f64,
}

impl ElasticMaterial {
    pub fn new(young: f64, poisson: f64) -> Result<Self> {
        if !(young > 0.0) {
            return Err(Error::Config(format!(
                "Young's modulus must be positive, got {young}"
            )));
        }
        if !(poisson > -1.0 && poisson < 0.5) {
            return Err(Error::Incompressible(poisson));
        }
        Ok(ElasticMaterial { young, poisson })
    }

    /// `(c_eps, c_tr)` with `σ = c_eps ε + c_tr tr(ε) I`.
    ///
    /// The strain coefficient is `E / (2(1 + ν))`, applied to `ε` itself (not
    /// to `2ε` as in the textbook isotropic law).
    pub fn coefficients(&self) -> (f64, f64) {
        let (e, nu) = (self.young, self.poisson);
        (e / (2.0 * (1.0 + nu)), e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)))
    }

    /// Voigt matrix for `(ε_xx, ε_yy, 2ε_xy)`.
    fn voigt(&self) -> [[f64; 3]; 3] {
        let (c1, c2) = self.coefficients();
        [[c1 + c2, c2, 0.0], [c2, c1 + c2, 0.0], [0.0, 0.0, 0.5 * c1]]
    }
}

pub fn strain(grad_u: Tensor2) -> Tensor2 {
    let off = 0.5 * (grad_u[0][1] + grad_u[1][0]);
    [[grad_u[0][0], off], [off, grad_u[1][1]]]
}

/// Stress from a displacement gradient `grad_u[i][j] = ∂u_i/∂x_j`.
pub fn stress(material: &ElasticMaterial, grad_u: Tensor2) -> Tensor2 {
    let (c1, c2) = material.coefficients();
    let eps = strain(grad_u);
    let tr = eps[0][0] + eps[1][1];
    [
        [c1 * eps[0][0] + c2 * tr, c1 * eps[0][1]],
        [c1 * eps[1][0], c1 * eps[1][1] + c2 * tr],
    ]
}

/// Reference shape functions at barycentric point `b`. P2 order:
/// three vertices, then edge midpoints (01, 12, 20).
pub fn shape_values(degree: usize, b: [f64; 3]) -> Vec<f64> {
    match degree {
        1 => b.to_vec(),
        2 => vec![
            b[0] * (2.0 * b[0] - 1.0),
            b[1] * (2.0 * b[1] - 1.0),
            b[2] * (2.0 * b[2] - 1.0),
            4.0 * b[0] * b[1],
            4.0 * b[1] * b[2],
            4.0 * b[2] * b[0],
        ],
        _ => unreachable!(),
    }
}

/// Physical gradients given barycentric gradients `gl`.
pub fn shape_gradients(degree: usize, b: [f64; 3], gl: [[f64; 2]; 3]) -> Vec<[f64; 2]> {
    let comb = |a: f64, ga: [f64; 2], c: f64, gc: [f64; 2]| [a * ga[0] + c * gc[0], a * ga[1] + c * gc[1]];
    match degree {
        1 => gl.to_vec(),
        2 => {
            let mut g = Vec::with_capacity(6);
            for i in 0..3 {
                let s = 4.0 * b[i] - 1.0;
                g.push([s * gl[i][0], s * gl[i][1]]);
            }
            for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                g.push(comb(4.0 * b[i], gl[j], 4.0 * b[j], gl[i]));
            }
            g
        }
        _ => unreachable!(),
    }
}

/// Barycentric gradients and signed area of a triangle.
pub fn barycentric_gradients(p: [Point; 3]) -> ([[f64; 2]; 3], f64) {
    let area = signed_area(p[0], p[1], p[2]);
    let inv = 1.0 / (2.0 * area);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
        g[i] = [(a[1] - b[1]) * inv, (b[0] - a[0]) * inv];
    }
    (g, area)
}

pub fn barycentric(p: [Point; 3], x: Point) -> [f64; 3] {
    let area = signed_area(p[0], p[1], p[2]);
    let l1 = signed_area(p[0], x, p[2]) / area;
    let l2 = signed_area(p[0], p[1], x) / area;
    [1.0 - l1 - l2, l1, l2]
}

/// Node numbering for vector-valued P1/P2 fields; dof `2 * node + c`.
#[derive(Clone, Debug)]
pub struct DofMap {
    pub degree: usize,
    pub nodes: Vec<Point>,
    pub cell_nodes: Vec<Vec<usize>>,
    edge_nodes: HashMap<(usize, usize), usize>,
    /// Prescribed value per dof, `None` if free.
    pub constrained: Vec<Option<f64>>,
    free: Vec<Option<usize>>,
    n_free: usize,
}

impl DofMap {
    pub fn new(mesh: &Mesh2D, degree: usize) -> Result<DofMap> {
        if degree != 1 && degree != 2 {
            return Err(Error::Config(format!(
                "displacement degree must be 1 or 2, got {degree}"
            )));
        }
        let mut nodes = mesh.vertices.clone();
        let mut edge_nodes = HashMap::new();
        let mut cell_nodes = Vec::with_capacity(mesh.n_triangles());
        for &[a, b, c] in &mesh.triangles {
            let mut cn = vec![a, b, c];
            if degree == 2 {
                for (p, q) in [(a, b), (b, c), (c, a)] {
                    let key = (p.min(q), p.max(q));
                    let id = *edge_nodes.entry(key).or_insert_with(|| {
                        let (x, y) = (mesh.vertices[p], mesh.vertices[q]);
                        nodes.push([0.5 * (x[0] + y[0]), 0.5 * (x[1] + y[1])]);
                        nodes.len() - 1
                    });
                    cn.push(id);
                }
            }
            cell_nodes.push(cn);
        }
        let n_dofs = 2 * nodes.len();
        Ok(DofMap {
            degree,
            nodes,
            cell_nodes,
            edge_nodes,
            constrained: vec![None; n_dofs],
            free: (0..n_dofs).map(Some).collect(),
            n_free: n_dofs,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    #[inline]
    pub fn dof(node: usize, comp: usize) -> usize {
        2 * node + comp
    }

    /// Free-dof index of a full dof, `None` if constrained.
    pub fn free_index(&self, dof: usize) -> Option<usize> {
        self.free[dof]
    }

    pub fn free_map(&self) -> &[Option<usize>] {
        &self.free
    }

    /// Midpoint node of the edge `(a, b)` for P2 maps.
    pub fn edge_node(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_nodes.get(&(a.min(b), a.max(b))).copied()
    }

    /// Nodes along the boundary edge `[a, b]` ordered from `a` to `b`.
    pub fn edge_trace_nodes(&self, a: usize, b: usize) -> Vec<usize> {
        match self.degree {
            1 => vec![a, b],
            _ => vec![a, self.edge_node(a, b).expect("P2 edge node"), b],
        }
    }

    /// Prescribes components on every node of DIRICHLET-tagged edges.
    /// Nodes on the interface must stay free.
    pub fn apply_dirichlet(
        &mut self,
        mesh: &Mesh2D,
        values: &dyn Fn(Point) -> [Option<f64>; 2],
    ) -> Result<()> {
        let interface: std::collections::HashSet<usize> = mesh
            .boundary
            .iter()
            .filter(|e| e.tag == BoundaryTag::Interface)
            .flat_map(|e| self.edge_trace_nodes(e.vertices[0], e.vertices[1]))
            .collect();
        for e in mesh.boundary.iter().filter(|e| e.tag == BoundaryTag::Dirichlet) {
            for node in self.edge_trace_nodes(e.vertices[0], e.vertices[1]) {
                let g = values(self.nodes[node]);
                if g.iter().any(Option::is_some) && interface.contains(&node) {
                    return Err(Error::Config(format!(
                        "Dirichlet data touches interface node {node}; the Dirichlet \
                         boundary must be separated from the interface"
                    )));
                }
                for (c, v) in g.into_iter().enumerate() {
                    if let Some(v) = v {
                        self.constrained[Self::dof(node, c)] = Some(v);
                    }
                }
            }
        }
        let mut k = 0;
        for (d, slot) in self.free.iter_mut().enumerate() {
            *slot = if self.constrained[d].is_none() {
                k += 1;
                Some(k - 1)
            } else {
                None
            };
        }
        self.n_free = k;
        Ok(())
    }

    /// Full vector with prescribed values and zeros elsewhere.
    pub fn lifting(&self) -> Vec<f64> {
        self.constrained.iter().map(|c| c.unwrap_or(0.0)).collect()
    }

    /// Expands free values into a full vector with the prescribed values.
    pub fn expand(&self, free_values: &[f64]) -> Vec<f64> {
        (0..self.n_dofs())
            .map(|d| match (self.constrained[d], self.free[d]) {
                (Some(v), _) => v,
                (None, Some(k)) => free_values[k],
                (None, None) => unreachable!(),
            })
            .collect()
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_free];
        for (d, f) in self.free.iter().enumerate() {
            if let Some(k) = f {
                out[*k] = full[d];
            }
        }
        out
    }

    /// Nodal interpolation of a vector field.
    pub fn interpolate(&self, f: &dyn Fn(Point) -> [f64; 2]) -> Vec<f64> {
        self.nodes.iter().flat_map(|&p| f(p)).collect()
    }
}

/// Stiffness (over all dofs, before Dirichlet elimination) and load.
#[derive(Clone, Debug)]
pub struct StiffnessBlock {
    pub matrix: CsrMatrix,
    pub load: Vec<f64>,
}

fn strain_rows(g: [f64; 2]) -> [[f64; 3]; 2] {
    // Voigt strain of N e_x and N e_y
    [[g[0], 0.0, g[1]], [0.0, g[1], g[0]]]
}

/// Assembles the energy pairing `(σ(u), ε(v))` and the load `(f, v)`.
pub fn assemble_elasticity(
    mesh: &Mesh2D,
    material: &ElasticMaterial,
    degree: usize,
    body_load: &dyn Fn(Point) -> [f64; 2],
) -> Result<(StiffnessBlock, DofMap)> {
    let dofs = DofMap::new(mesh, degree)?;
    let d = material.voigt();
    let rule = TriangleRule::with_degree(2 * degree);
    let n_loc = 3 * degree;
    let mut trip = Triplets::new(dofs.n_dofs(), dofs.n_dofs());
    trip.entries.reserve(mesh.n_triangles() * 4 * n_loc * n_loc);
    let mut load = vec![0.0; dofs.n_dofs()];
    let mut ke = vec![0.0; 4 * n_loc * n_loc];
    for t in 0..mesh.n_triangles() {
        let pts = mesh.triangle_points(t);
        let (gl, area) = barycentric_gradients(pts);
        ke.iter_mut().for_each(|v| *v = 0.0);
        let m = 2 * n_loc;
        for (b, &w) in rule.points.iter().zip(&rule.weights) {
            let wq = w * area;
            let grads = shape_gradients(degree, *b, gl);
            let vals = shape_values(degree, *b);
            let x = [
                b[0] * pts[0][0] + b[1] * pts[1][0] + b[2] * pts[2][0],
                b[0] * pts[0][1] + b[1] * pts[1][1] + b[2] * pts[2][1],
            ];
            let f = body_load(x);
            let nodes = &dofs.cell_nodes[t];
            for a in 0..n_loc {
                for c in 0..2 {
                    load[DofMap::dof(nodes[a], c)] += wq * f[c] * vals[a];
                }
            }
            let rows: Vec<[[f64; 3]; 2]> = grads.iter().map(|&g| strain_rows(g)).collect();
            for a in 0..n_loc {
                for ca in 0..2 {
                    let ea = rows[a][ca];
                    let sa = [
                        d[0][0] * ea[0] + d[0][1] * ea[1],
                        d[1][0] * ea[0] + d[1][1] * ea[1],
                        d[2][2] * ea[2],
                    ];
                    for bb in 0..n_loc {
                        for cb in 0..2 {
                            let eb = rows[bb][cb];
                            ke[(2 * a + ca) * m + 2 * bb + cb] +=
                                wq * (sa[0] * eb[0] + sa[1] * eb[1] + sa[2] * eb[2]);
                        }
                    }
                }
            }
        }
        let nodes = &dofs.cell_nodes[t];
        for i in 0..m {
            let gi = DofMap::dof(nodes[i / 2], i % 2);
            for j in 0..m {
                let gj = DofMap::dof(nodes[j / 2], j % 2);
                trip.push(gi, gj, ke[i * m + j]);
            }
        }
    }
    Ok((
        StiffnessBlock {
            matrix: trip.into_csr(),
            load,
        },
        dofs,
    ))
}

/// `∫ ∇u : ∇v` for the vector field (P1/P2), over all dofs.
pub fn assemble_vector_laplacian(mesh: &Mesh2D, dofs: &DofMap) -> CsrMatrix {
    let degree = dofs.degree;
    let rule = TriangleRule::with_degree(2 * degree);
    let n_loc = 3 * degree;
    let mut trip = Triplets::new(dofs.n_dofs(), dofs.n_dofs());
    for t in 0..mesh.n_triangles() {
        let (gl, area) = barycentric_gradients(mesh.triangle_points(t));
        let nodes = &dofs.cell_nodes[t];
        let mut ke = vec![0.0; n_loc * n_loc];
        for (b, &w) in rule.points.iter().zip(&rule.weights) {
            let g = shape_gradients(degree, *b, gl);
            for i in 0..n_loc {
                for j in 0..n_loc {
                    ke[i * n_loc + j] += w * area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                }
            }
        }
        for i in 0..n_loc {
            for j in 0..n_loc {
                for c in 0..2 {
                    trip.push(
                        DofMap::dof(nodes[i], c),
                        DofMap::dof(nodes[j], c),
                        ke[i * n_loc + j],
                    );
                }
            }
        }
    }
    trip.into_csr()
}

/// Traction `σ(φ) n` of every local basis function of triangle `t` at `x`:
/// `(full dof, traction)` pairs.
pub fn traction_basis(
    mesh: &Mesh2D,
    dofs: &DofMap,
    material: &ElasticMaterial,
    t: usize,
    x: Point,
    normal: Point,
) -> Vec<(usize, [f64; 2])> {
    let pts = mesh.triangle_points(t);
    let (gl, _) = barycentric_gradients(pts);
    let b = barycentric(pts, x);
    let grads = shape_gradients(dofs.degree, b, gl);
    let nodes = &dofs.cell_nodes[t];
    let mut out = Vec::with_capacity(2 * grads.len());
    for (a, g) in grads.iter().enumerate() {
        for c in 0..2 {
            let mut grad_u = [[0.0; 2]; 2];
            grad_u[c] = *g;
            let s = stress(material, grad_u);
            out.push((
                DofMap::dof(nodes[a], c),
                [
                    s[0][0] * normal[0] + s[0][1] * normal[1],
                    s[1][0] * normal[0] + s[1][1] * normal[1],
                ],
            ));
        }
    }
    out
}

/// `σ(u_h) n` at arc length `s` on interface edge `edge` of the side-1
/// trace, evaluated in the triangle owning that edge.
pub fn stress_trace(
    coeffs: &[f64],
    mesh: &Mesh2D,
    dofs: &DofMap,
    material: &ElasticMaterial,
    trace: &TraceMesh,
    edge: usize,
    s: f64,
) -> Result<[f64; 2]> {
    let (a, b) = trace.edge(edge);
    let tol = 1e-12 * trace.length();
    if s < a - tol || s > b + tol {
        return Err(Error::OffEdge { s, left: a, right: b });
    }
    let x = trace.line.point(s);
    let mut out = [0.0; 2];
    for (dof, tr) in traction_basis(mesh, dofs, material, trace.cells[edge], x, trace.line.normal) {
        out[0] += coeffs[dof] * tr[0];
        out[1] += coeffs[dof] * tr[1];
    }
    Ok(out)
}

/// Evaluates a field at `x` inside triangle `t`.
pub fn evaluate(coeffs: &[f64], mesh: &Mesh2D, dofs: &DofMap, t: usize, x: Point) -> [f64; 2] {
    let b = barycentric(mesh.triangle_points(t), x);
    let vals = shape_values(dofs.degree, b);
    let mut u = [0.0; 2];
    for (a, &node) in dofs.cell_nodes[t].iter().enumerate() {
        u[0] += vals[a] * coeffs[DofMap::dof(node, 0)];
        u[1] += vals[a] * coeffs[DofMap::dof(node, 1)];
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_rect_mesh, extract_trace_mesh, SideTags};
    use BoundaryTag::*;

    fn no_load(_: Point) -> [f64; 2] {
        [0.0, 0.0]
    }

    fn square(nx: usize, ny: usize) -> Mesh2D {
        let tags = SideTags {
            bottom: Neumann,
            right: Interface,
            top: Neumann,
            left: Dirichlet,
        };
        build_rect_mesh([0.0, 0.0], [1.0, 1.0], nx, ny, tags).unwrap()
    }

    #[test]
    fn stress_examples() {
        let m = ElasticMaterial::new(7.0, 0.0).unwrap();
        let s = stress(&m, [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(s, [[3.5, 0.0], [0.0, 3.5]]);
        assert_eq!(stress(&m, [[0.0; 2]; 2]), [[0.0; 2]; 2]);

        // E = 1e3, ν = 0.3: coefficients by hand
        // c_eps = 1000 / 2.6 = 384.6153846..., c_tr = 300 / (1.3 * 0.4) = 576.9230769...
        let m = ElasticMaterial::new(1e3, 0.3).unwrap();
        let s = stress(&m, [[1.0, 0.0], [0.0, 0.0]]);
        let c_eps = 1000.0 / 2.6;
        let c_tr = 300.0 / 0.52;
        assert!((s[0][0] - (c_eps + c_tr)).abs() < 1e-10);
        assert!((s[1][1] - c_tr).abs() < 1e-10);
        assert!((s[0][0] - 961.538_461_538_461_5).abs() < 1e-9);
        assert_eq!(s[0][1], 0.0);
    }

    #[test]
    fn material_validation() {
        assert!(matches!(
            ElasticMaterial::new(1.0, 0.5),
            Err(Error::Incompressible(_))
        ));
        assert!(ElasticMaterial::new(0.0, 0.3).is_err());
    }

    #[test]
    fn unsupported_degree() {
        let m = square(1, 1);
        let mat = ElasticMaterial::new(1.0, 0.3).unwrap();
        assert!(matches!(
            assemble_elasticity(&m, &mat, 3, &no_load),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn reference_triangle_matrix() {
        // Oracle: K_(a,i),(b,j) = area * c_eps * ε(φ_a e_i) : ε(φ_b e_j)
        //       = (1/2)(1/2) * (1/2)[δ_ij g_a·g_b + (g_a)_j (g_b)_i]   (E = 1, ν = 0)
        let mesh = Mesh2D {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            triangles: vec![[0, 1, 2]],
            boundary: vec![],
        };
        let mat = ElasticMaterial::new(1.0, 0.0).unwrap();
        let (k, _) = assemble_elasticity(&mesh, &mat, 1, &no_load).unwrap();
        let g = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
        #[rustfmt::skip]
        let expected = [
            [ 0.375,  0.125, -0.25 , -0.125, -0.125,  0.0  ],
            [ 0.125,  0.375,  0.0  , -0.125, -0.125, -0.25 ],
            [-0.25 ,  0.0  ,  0.25 ,  0.0  ,  0.0  ,  0.0  ],
            [-0.125, -0.125,  0.0  ,  0.125,  0.125,  0.0  ],
            [-0.125, -0.125,  0.0  ,  0.125,  0.125,  0.0  ],
            [ 0.0  , -0.25 ,  0.0  ,  0.0  ,  0.0  ,  0.25 ],
        ];
        for a in 0..3 {
            for i in 0..2 {
                for b in 0..3 {
                    for j in 0..2 {
                        let d = if i == j { 1.0 } else { 0.0 };
                        let oracle = 0.125
                            * (d * (g[a][0] * g[b][0] + g[a][1] * g[b][1]) + g[a][j] * g[b][i]);
                        let got = k.matrix.get(2 * a + i, 2 * b + j);
                        assert!((got - oracle).abs() < 1e-15);
                        assert!((got - expected[2 * a + i][2 * b + j]).abs() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn rigid_motions_in_kernel() {
        let mesh = square(3, 2);
        let mat = ElasticMaterial::new(1e3, 0.3).unwrap();
        for degree in [1, 2] {
            let (k, dofs) = assemble_elasticity(&mesh, &mat, degree, &no_load).unwrap();
            let scale = k.matrix.max_abs();
            for field in [
                dofs.interpolate(&|_| [1.0, 0.0]),
                dofs.interpolate(&|_| [0.0, 1.0]),
                dofs.interpolate(&|p| [-p[1], p[0]]),
            ] {
                let r = k.matrix.matvec(&field);
                assert!(r.iter().all(|v| v.abs() <= 1e-10 * scale));
            }
            assert!(k.matrix.asymmetry() <= 1e-12 * scale);
        }
    }

    #[test]
    fn linear_field_energy() {
        // u = (a x + b y, c x + d y) on the unit square: energy = σ:ε * area
        let mesh = square(2, 3);
        let mat = ElasticMaterial::new(2.0, 0.25).unwrap();
        let grad = [[0.3, -0.2], [0.7, 0.1]];
        let s = stress(&mat, grad);
        let e = strain(grad);
        let exact: f64 = (0..2).map(|i| (0..2).map(|j| s[i][j] * e[i][j]).sum::<f64>()).sum();
        for degree in [1, 2] {
            let (k, dofs) = assemble_elasticity(&mesh, &mat, degree, &no_load).unwrap();
            let u = dofs.interpolate(&|p| {
                [
                    grad[0][0] * p[0] + grad[0][1] * p[1],
                    grad[1][0] * p[0] + grad[1][1] * p[1],
                ]
            });
            let energy = k.matrix.bilinear(&u, &u);
            assert!((energy - exact).abs() <= 1e-12 * exact);
        }
    }

    #[test]
    fn constant_load_integrates_area() {
        let mesh = square(2, 2);
        let mat = ElasticMaterial::new(1.0, 0.3).unwrap();
        for degree in [1, 2] {
            let (k, _) = assemble_elasticity(&mesh, &mat, degree, &|_| [2.0, -1.0]).unwrap();
            let fx: f64 = k.load.iter().step_by(2).sum();
            let fy: f64 = k.load.iter().skip(1).step_by(2).sum();
            assert!((fx - 2.0).abs() < 1e-13 && (fy + 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn traction_of_linear_field() {
        let mesh = square(2, 4);
        let trace = extract_trace_mesh(&mesh).unwrap();
        let mat = ElasticMaterial::new(1.0, 0.0).unwrap();
        for degree in [1, 2] {
            let dofs = DofMap::new(&mesh, degree).unwrap();
            let u = dofs.interpolate(&|p| [p[0], 0.0]);
            for e in 0..trace.n_edges() {
                let (a, b) = trace.edge(e);
                for s in [a, 0.3 * a + 0.7 * b, b] {
                    let t = stress_trace(&u, &mesh, &dofs, &mat, &trace, e, s).unwrap();
                    assert!((t[0] - 0.5).abs() < 1e-13 && t[1].abs() < 1e-13);
                }
            }
            let zero = vec![0.0; dofs.n_dofs()];
            assert_eq!(stress_trace(&zero, &mesh, &dofs, &mat, &trace, 0, 0.1).unwrap(), [0.0, 0.0]);
            assert!(matches!(
                stress_trace(&u, &mesh, &dofs, &mat, &trace, 0, 0.9),
                Err(Error::OffEdge { .. })
            ));
        }
    }

    #[test]
    fn p1_traction_constant_per_edge() {
        let mesh = square(3, 3);
        let trace = extract_trace_mesh(&mesh).unwrap();
        let mat = ElasticMaterial::new(1e3, 0.3).unwrap();
        let dofs = DofMap::new(&mesh, 1).unwrap();
        let u: Vec<f64> = (0..dofs.n_dofs()).map(|i| ((i * 7919) % 13) as f64 * 0.01).collect();
        for e in 0..trace.n_edges() {
            let (a, b) = trace.edge(e);
            let t1 = stress_trace(&u, &mesh, &dofs, &mat, &trace, e, a + 0.1 * (b - a)).unwrap();
            let t2 = stress_trace(&u, &mesh, &dofs, &mat, &trace, e, b - 0.2 * (b - a)).unwrap();
            assert!((t1[0] - t2[0]).abs() < 1e-13 * t1[0].abs().max(1.0));
            assert!((t1[1] - t2[1]).abs() < 1e-13 * t1[1].abs().max(1.0));
        }
    }

    #[test]
    fn dirichlet_separated_from_interface() {
        let mesh = square(2, 2);
        let mut dofs = DofMap::new(&mesh, 2).unwrap();
        dofs.apply_dirichlet(&mesh, &|_| [Some(0.1), Some(0.0)]).unwrap();
        // left side: 5 P2 nodes
        assert_eq!(dofs.n_free(), dofs.n_dofs() - 10);
        let full = dofs.expand(&vec![1.0; dofs.n_free()]);
        assert_eq!(dofs.restrict(&full), vec![1.0; dofs.n_free()]);

        let tags = SideTags {
            bottom: Dirichlet,
            right: Interface,
            top: Neumann,
            left: Neumann,
        };
        let mesh = build_rect_mesh([0.0, 0.0], [1.0, 1.0], 2, 2, tags).unwrap();
        let mut dofs = DofMap::new(&mesh, 1).unwrap();
        assert!(matches!(
            dofs.apply_dirichlet(&mesh, &|_| [Some(0.0), None]),
            Err(Error::Config(_))
        ));
    }
}
