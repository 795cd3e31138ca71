//! Sparse symmetric LDLᵀ factorization (faer supernodal kernels) with a
//! fill-reducing ordering that keeps a trailing block last.
//!
//! Keeping the multiplier unknowns at the end lets the static pivot sequence
//! run through the (definite) displacement block first and then through the
//! Schur complement on the multipliers, so no pivoting is required for the
//! saddle systems assembled in this crate.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::perm::PermRef;
use faer::sparse::linalg::amd;
use faer::linalg::cholesky::ldlt::factor::{LdltError, LdltRegularization};
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, LdltRef, SymbolicCholesky, SymbolicCholeskyRaw,
    SymmetricOrdering,
};
use faer::sparse::{SparseColMat, SymbolicSparseColMat, Triplet};
use faer::{Conj, MatMut, Par, Side};

use crate::error::{Error, Result};
use crate::sparse::{norm, CsrMatrix};

pub struct SymmetricFactor {
    symbolic: SymbolicCholesky<usize>,
    values: Vec<f64>,
    /// Original index of the k-th pivot.
    perm: Vec<usize>,
    n: usize,
}

fn amd_order(a: &CsrMatrix, n_lead: usize) -> Result<Vec<usize>> {
    if n_lead == 0 {
        return Ok(Vec::new());
    }
    // Full symmetric pattern of the leading block, one column per row of A.
    let mut col_ptr = vec![0usize; n_lead + 1];
    let mut row_idx = Vec::new();
    for i in 0..n_lead {
        for (j, _) in a.row(i) {
            if j < n_lead {
                row_idx.push(j);
            }
        }
        col_ptr[i + 1] = row_idx.len();
    }
    let nnz = row_idx.len();
    let pattern = SymbolicSparseColMat::new_checked(n_lead, n_lead, col_ptr, None, row_idx);
    let mut perm = vec![0usize; n_lead];
    let mut perm_inv = vec![0usize; n_lead];
    let mut buf = MemBuffer::new(amd::order_scratch::<usize>(n_lead, nnz));
    amd::order(
        &mut perm,
        &mut perm_inv,
        pattern.as_ref(),
        amd::Control::default(),
        MemStack::new(&mut buf),
    )
    .map_err(|e| Error::Numerical(format!("ordering failed: {e:?}")))?;
    Ok(perm)
}

impl SymmetricFactor {
    /// Factorizes the symmetric matrix `a` (both triangles stored). The last
    /// `n_tail` unknowns are eliminated last, in their natural order; the
    /// leading block is ordered by approximate minimum degree.
    pub fn new(a: &CsrMatrix, n_tail: usize) -> Result<SymmetricFactor> {
        let n = a.n_rows;
        assert_eq!(n, a.n_cols);
        assert!(n_tail <= n);
        let n_lead = n - n_tail;
        let mut perm = amd_order(a, n_lead)?;
        perm.extend(n_lead..n);
        let mut inv = vec![0usize; n];
        for (k, &p) in perm.iter().enumerate() {
            inv[p] = k;
        }
        let lower: Vec<Triplet<usize, usize, f64>> = a
            .iter()
            .filter(|&(i, j, _)| i >= j)
            .map(|(i, j, v)| Triplet::new(i, j, v))
            .collect();
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &lower)
            .map_err(|e| Error::Numerical(format!("matrix creation failed: {e:?}")))?;
        let symbolic = factorize_symbolic_cholesky(
            mat.symbolic(),
            Side::Lower,
            SymmetricOrdering::Custom(PermRef::new_checked(&perm, &inv, n)),
            Default::default(),
        )
        .map_err(|e| Error::Numerical(format!("symbolic factorization failed: {e:?}")))?;
        let mut values = vec![0.0; symbolic.len_val()];
        let mut buf = MemBuffer::new(
            symbolic.factorize_numeric_ldlt_scratch::<f64>(Par::Seq, Default::default()),
        );
        let result = symbolic.factorize_numeric_ldlt(
            &mut values,
            mat.as_ref(),
            Side::Lower,
            LdltRegularization::default(),
            Par::Seq,
            MemStack::new(&mut buf),
            Default::default(),
        );
        if let Err(LdltError::ZeroPivot { index }) = result {
            // The simplicial kernel reports a one-based position.
            let index = match symbolic.raw() {
                SymbolicCholeskyRaw::Simplicial(_) => index.saturating_sub(1),
                SymbolicCholeskyRaw::Supernodal(_) => index,
            }
            .min(n - 1);
            let dof = symbolic
                .perm()
                .map_or(perm[index], |p| p.arrays().0[index]);
            return Err(Error::SingularSystem {
                dof,
                block: if index >= n_lead { "multiplier" } else { "displacement" },
            });
        }
        let factor = SymmetricFactor {
            symbolic,
            values,
            perm,
            n,
        };
        if factor.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem {
                dof: factor.perm[n - 1],
                block: "unknown",
            });
        }
        Ok(factor)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn pivot_order(&self) -> &[usize] {
        &self.perm
    }

    /// Solves for every column of the column-major `n x k` buffer.
    pub fn solve_columns(&self, rhs: &mut [f64], k: usize) {
        assert_eq!(rhs.len(), self.n * k);
        if k == 0 {
            return;
        }
        let mut buf = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(k, Par::Seq));
        let ldlt = LdltRef::<usize, f64>::new(&self.symbolic, &self.values);
        let mat = MatMut::from_column_major_slice_mut(rhs, self.n, k);
        ldlt.solve_in_place_with_conj(Conj::No, mat, Par::Seq, MemStack::new(&mut buf));
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_columns(&mut x, 1);
        x
    }

    /// Solve followed by iterative refinement against `a`; returns the
    /// solution and its relative residual.
    pub fn solve_refined(&self, a: &CsrMatrix, rhs: &[f64], steps: usize) -> (Vec<f64>, f64) {
        let mut x = self.solve(rhs);
        let rhs_norm = norm(rhs).max(f64::MIN_POSITIVE);
        let residual = |x: &[f64]| -> Vec<f64> {
            a.matvec(x).iter().zip(rhs).map(|(ax, b)| b - ax).collect()
        };
        let mut r = residual(&x);
        for _ in 0..steps {
            if norm(&r) <= 1e-15 * rhs_norm {
                break;
            }
            let dx = self.solve(&r);
            x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
            r = residual(&x);
        }
        let rel = if norm(rhs) == 0.0 {
            norm(&r)
        } else {
            norm(&r) / rhs_norm
        };
        (x, rel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::Triplets;

    #[test]
    fn saddle_without_pivoting() {
        // [[2,0,1],[0,2,1],[1,1,0]] x = [3,3,2] -> x = [1,1,1]
        let mut t = Triplets::new(3, 3);
        t.push(0, 0, 2.0);
        t.push(1, 1, 2.0);
        for (i, j) in [(0, 2), (2, 0), (1, 2), (2, 1)] {
            t.push(i, j, 1.0);
        }
        let a = t.to_csr();
        let f = SymmetricFactor::new(&a, 1).unwrap();
        let (x, res) = f.solve_refined(&a, &[3.0, 3.0, 2.0], 2);
        for v in x {
            assert!((v - 1.0).abs() < 1e-14);
        }
        assert!(res < 1e-15);
    }

    #[test]
    fn zero_pivot_reports_original_dof() {
        let mut t = Triplets::new(3, 3);
        t.push(0, 0, 1.0);
        t.push(2, 2, 1.0);
        t.push(1, 1, 0.0);
        let a = t.to_csr();
        match SymmetricFactor::new(&a, 0) {
            Err(Error::SingularSystem { dof, .. }) => assert_eq!(dof, 1),
            Err(e) => panic!("unexpected error {e}"),
            Ok(_) => panic!("expected breakdown"),
        }
    }
}
