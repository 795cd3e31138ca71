#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use tiemortar::fem::assemble_elasticity;
use tiemortar::interface::weighted_mass;
use tiemortar::mesh::build_rect_mesh;
use tiemortar::saddle::{square_square, MethodSpec};
use tiemortar::{build_system, solve, BoundaryTag, SaddleSystem, SideTags};

/// Largest nodal difference between the matching-mesh mixed P1–P1 solution
/// and a single conforming solve on the glued rectangle `(0,1.5)×(0,1)`.
pub fn glued_difference(level: usize) -> f64 {
    let p = square_square(level, true).unwrap();
    let sys = build_system(&p, &MethodSpec::parse("mixed-p1p1").unwrap()).unwrap();
    let sol = solve(&sys).unwrap();

    let n = 4usize << level;
    let glued = build_rect_mesh(
        [0.0, 0.0],
        [1.5, 1.0],
        3 * n / 2,
        n,
        SideTags {
            bottom: BoundaryTag::Neumann,
            right: BoundaryTag::Dirichlet,
            top: BoundaryTag::Neumann,
            left: BoundaryTag::Dirichlet,
        },
    )
    .unwrap();
    let (k, mut dofs) = assemble_elasticity(&glued, &p.material, 1, &|_| [0.0, 0.0]).unwrap();
    dofs.apply_dirichlet(&glued, &|x| {
        if x[0] < 0.75 {
            [Some(0.1), Some(0.0)]
        } else {
            [Some(0.0), Some(0.0)]
        }
    })
    .unwrap();
    let lift = dofs.lifting();
    let r = k.matrix.matvec(&lift);
    let nf = dofs.n_free();
    let a = k.matrix.select(dofs.free_map(), nf, dofs.free_map(), nf).to_dense();
    let b = DVector::from_vec(dofs.restrict(&r).iter().map(|v| -v).collect());
    let x = DMatrix::cholesky(a).expect("glued stiffness is SPD").solve(&b);
    let u = dofs.expand(x.as_slice());

    let mut worst: f64 = 0.0;
    for (mesh, coeffs) in [(&p.mesh1, &sol.u1), (&p.mesh2, &sol.u2)] {
        for (v, &pt) in mesh.vertices.iter().enumerate() {
            let g = glued.find_vertex(pt, 1e-12).expect("shared node");
            for c in 0..2 {
                worst = worst.max((coeffs[2 * v + c] - u[2 * g + c]).abs());
            }
        }
    }
    worst
}

/// Smallest ratio of `B_h(w,ξ; w,−ξ)` to
/// `0.5·min(1 − α/C_I, α)·(|||w|||² + ‖h^{1/2}ξ‖²)` over `count` random
/// coefficient vectors, and the smallest raw value of the form.
pub fn coercivity(sys: &SaddleSystem, c_i: f64, count: usize, seed: u64) -> (f64, f64) {
    let alpha = sys.alpha.expect("stabilized system");
    let (_, o2, om) = sys.offsets();
    let mh = weighted_mass(&sys.disc.space, &|h| h);
    let mut rng = StdRng::seed_from_u64(seed);
    let (mut ratio, mut least) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..count {
        let x: Vec<f64> = (0..sys.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut y = x.clone();
        for v in &mut y[om..] {
            *v = -*v;
        }
        let form = sys.bilinear(&x, &y);
        let norm = sys.blocks.a1.bilinear(&x[..o2], &x[..o2])
            + sys.blocks.a2.bilinear(&x[o2..om], &x[o2..om])
            + mh.bilinear(&x[om..], &x[om..]);
        let witness = 0.5 * (1.0 - alpha / c_i).min(alpha) * norm;
        ratio = ratio.min(form / witness);
        least = least.min(form);
    }
    (ratio, least)
}

/// `max/min − 1` of a list of positive values.
pub fn variation(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min);
    max / min - 1.0
}
