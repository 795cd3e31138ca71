//! Compressed-row matrices assembled from triplets.

use nalgebra::DMatrix;

/// Coordinate-format accumulator; duplicates are summed on compression.
#[derive(Clone, Debug, Default)]
pub struct Triplets {
    pub n_rows: usize,
    pub n_cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Triplets {
            n_rows,
            n_cols,
            entries: Vec::new(),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n_rows && col < self.n_cols);
        self.entries.push((row, col, value));
    }

    /// Adds `block` with its origin at `(row0, col0)`.
    pub fn push_block(&mut self, row0: usize, col0: usize, block: &CsrMatrix, scale: f64) {
        for (i, j, v) in block.iter() {
            self.push(row0 + i, col0 + j, scale * v);
        }
    }

    /// Adds the transpose of `block` with its origin at `(row0, col0)`.
    pub fn push_block_transposed(&mut self, row0: usize, col0: usize, block: &CsrMatrix, scale: f64) {
        for (i, j, v) in block.iter() {
            self.push(row0 + j, col0 + i, scale * v);
        }
    }

    /// Sorts by (row, col) with a stable sort so duplicate summation order is
    /// the insertion order.
    pub fn to_csr(&self) -> CsrMatrix {
        self.clone().into_csr()
    }

    pub fn into_csr(self) -> CsrMatrix {
        let mut e = self.entries;
        e.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; self.n_rows + 1];
        let mut col_idx = Vec::with_capacity(e.len());
        let mut values: Vec<f64> = Vec::with_capacity(e.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in e {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Triplets::new(n_rows, n_cols).to_csr()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `Aᵀ x`
    pub fn matvec_transposed(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_rows);
        let mut y = vec![0.0; self.n_cols];
        for (i, j, v) in self.iter() {
            y[j] += v * x[i];
        }
        y
    }

    /// `xᵀ A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n_rows)
            .map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>())
            .sum()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut t = Triplets::new(self.n_cols, self.n_rows);
        for (i, j, v) in self.iter() {
            t.push(j, i, v);
        }
        t.to_csr()
    }

    pub fn scaled(&self, s: f64) -> CsrMatrix {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= s);
        m
    }

    /// `self + s * other`
    pub fn add_scaled(&self, other: &CsrMatrix, s: f64) -> CsrMatrix {
        assert_eq!((self.n_rows, self.n_cols), (other.n_rows, other.n_cols));
        let mut t = Triplets::new(self.n_rows, self.n_cols);
        t.push_block(0, 0, self, 1.0);
        t.push_block(0, 0, other, s);
        t.to_csr()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A - Aᵀ|`
    pub fn asymmetry(&self) -> f64 {
        self.iter()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    /// Keeps rows and columns mapped to `Some(new index)`.
    pub fn select(
        &self,
        rows: &[Option<usize>],
        n_rows: usize,
        cols: &[Option<usize>],
        n_cols: usize,
    ) -> CsrMatrix {
        let mut t = Triplets::new(n_rows, n_cols);
        for (i, j, v) in self.iter() {
            if let (Some(r), Some(c)) = (rows[i], cols[j]) {
                t.push(r, c, v);
            }
        }
        t.to_csr()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.iter() {
            d[(i, j)] += v;
        }
        d
    }

    /// Writes `i j value` triplets, one per line, 0-based.
    pub fn write_coordinate(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        for (i, j, v) in self.iter() {
            writeln!(out, "{i} {j} {v:?}")?;
        }
        Ok(())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_summed_and_sorted() {
        let mut t = Triplets::new(2, 3);
        t.push(1, 2, 1.0);
        t.push(0, 1, 2.0);
        t.push(1, 2, 0.5);
        t.push(1, 0, -1.0);
        let m = t.to_csr();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(1, 2), 1.5);
        assert_eq!(m.get(0, 0), 0.0);
        assert_eq!(m.matvec(&[1.0, 1.0, 1.0]), vec![2.0, 0.5]);
        assert_eq!(m.matvec_transposed(&[1.0, 2.0]), vec![-2.0, 2.0, 3.0]);
        assert_eq!(m.transpose().get(2, 1), 1.5);
        assert_eq!(m.bilinear(&[1.0, 2.0], &[1.0, 1.0, 1.0]), 3.0);
    }

    #[test]
    fn select_and_asymmetry() {
        let mut t = Triplets::new(3, 3);
        for i in 0..3 {
            t.push(i, i, 2.0);
        }
        t.push(0, 2, 1.0);
        let m = t.to_csr();
        assert_eq!(m.asymmetry(), 1.0);
        let keep = [Some(0), None, Some(1)];
        let s = m.select(&keep, 2, &keep, 2);
        assert_eq!(s.to_dense(), DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]));
    }
}
