//! Compressed sparse row matrices.

use crate::Real;

/// Sparse matrix in CSR form with sorted, duplicate-free column indices per row.
#[derive(Clone, Debug)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    rowptr: Vec<usize>,
    colidx: Vec<usize>,
    values: Vec<T>,
}

/// Coordinate-format accumulator; duplicates are summed on conversion.
#[derive(Clone, Debug)]
pub struct Triplets<T> {
    nrows: usize,
    ncols: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Real> Triplets<T> {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, rows: Vec::new(), cols: Vec::new(), vals: Vec::new() }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self {
            nrows,
            ncols,
            rows: Vec::with_capacity(cap),
            cols: Vec::with_capacity(cap),
            vals: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, i: usize, j: usize, v: T) {
        debug_assert!(i < self.nrows && j < self.ncols);
        self.rows.push(i);
        self.cols.push(j);
        self.vals.push(v);
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn to_csr(&self) -> CsrMatrix<T> {
        let mut counts = vec![0usize; self.nrows + 1];
        for &r in &self.rows {
            counts[r + 1] += 1;
        }
        for i in 0..self.nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let nnz = self.vals.len();
        let mut cols = vec![0usize; nnz];
        let mut vals = vec![T::zero(); nnz];
        for k in 0..nnz {
            let r = self.rows[k];
            let p = next[r];
            cols[p] = self.cols[k];
            vals[p] = self.vals[k];
            next[r] += 1;
        }
        // sort each row and merge duplicates
        let mut rowptr = vec![0usize; self.nrows + 1];
        let mut out_c = Vec::with_capacity(nnz);
        let mut out_v = Vec::with_capacity(nnz);
        let mut scratch: Vec<(usize, T)> = Vec::new();
        for i in 0..self.nrows {
            scratch.clear();
            for p in counts[i]..counts[i + 1] {
                scratch.push((cols[p], vals[p]));
            }
            scratch.sort_unstable_by_key(|e| e.0);
            let mut k = 0;
            while k < scratch.len() {
                let c = scratch[k].0;
                let mut v = T::zero();
                while k < scratch.len() && scratch[k].0 == c {
                    v += scratch[k].1;
                    k += 1;
                }
                out_c.push(c);
                out_v.push(v);
            }
            rowptr[i + 1] = out_c.len();
        }
        CsrMatrix { nrows: self.nrows, ncols: self.ncols, rowptr, colidx: out_c, values: out_v }
    }
}

impl<T: Real> CsrMatrix<T> {
    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            rowptr: (0..=n).collect(),
            colidx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, rowptr: vec![0; nrows + 1], colidx: Vec::new(), values: Vec::new() }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }
    pub fn ncols(&self) -> usize {
        self.ncols
    }
    pub fn nnz(&self) -> usize {
        self.values.len()
    }
    pub fn rowptr(&self) -> &[usize] {
        &self.rowptr
    }
    pub fn colidx(&self) -> &[usize] {
        &self.colidx
    }
    pub fn values(&self) -> &[T] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    /// Iterate `(col, value)` over row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let (a, b) = (self.rowptr[i], self.rowptr[i + 1]);
        self.colidx[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (a, b) = (self.rowptr[i], self.rowptr[i + 1]);
        match self.colidx[a..b].binary_search(&j) {
            Ok(p) => self.values[a + p],
            Err(_) => T::zero(),
        }
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for i in 0..self.nrows {
            let mut s = T::zero();
            for p in self.rowptr[i]..self.rowptr[i + 1] {
                s += self.values[p] * x[self.colidx[p]];
            }
            y[i] = s;
        }
    }

    /// `y = Aᵀ x`
    pub fn mul_t_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![T::zero(); self.ncols];
        for i in 0..self.nrows {
            let xi = x[i];
            if xi == T::zero() {
                continue;
            }
            for p in self.rowptr[i]..self.rowptr[i + 1] {
                y[self.colidx[p]] += self.values[p] * xi;
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.colidx {
            counts[c + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut colidx = vec![0usize; self.nnz()];
        let mut values = vec![T::zero(); self.nnz()];
        for i in 0..self.nrows {
            for p in self.rowptr[i]..self.rowptr[i + 1] {
                let c = self.colidx[p];
                let q = next[c];
                colidx[q] = i;
                values[q] = self.values[p];
                next[c] += 1;
            }
        }
        Self { nrows: self.ncols, ncols: self.nrows, rowptr: counts, colidx, values }
    }

    /// Sparse product `A B` (Gustavson's algorithm).
    pub fn matmul(&self, b: &Self) -> Self {
        assert_eq!(self.ncols, b.nrows);
        let mut rowptr = vec![0usize; self.nrows + 1];
        let mut colidx = Vec::new();
        let mut values = Vec::new();
        let mut acc = vec![T::zero(); b.ncols];
        let mut mark = vec![usize::MAX; b.ncols];
        let mut pattern: Vec<usize> = Vec::new();
        for i in 0..self.nrows {
            pattern.clear();
            for p in self.rowptr[i]..self.rowptr[i + 1] {
                let k = self.colidx[p];
                let a = self.values[p];
                for q in b.rowptr[k]..b.rowptr[k + 1] {
                    let j = b.colidx[q];
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = T::zero();
                        pattern.push(j);
                    }
                    acc[j] += a * b.values[q];
                }
            }
            pattern.sort_unstable();
            for &j in &pattern {
                colidx.push(j);
                values.push(acc[j]);
            }
            rowptr[i + 1] = colidx.len();
        }
        Self { nrows: self.nrows, ncols: b.ncols, rowptr, colidx, values }
    }

    /// `alpha A + beta B` for matrices of equal shape.
    pub fn add_scaled(&self, alpha: T, b: &Self, beta: T) -> Self {
        assert_eq!((self.nrows, self.ncols), (b.nrows, b.ncols));
        let mut t = Triplets::with_capacity(self.nrows, self.ncols, self.nnz() + b.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                t.push(i, j, alpha * v);
            }
            for (j, v) in b.row(i) {
                t.push(i, j, beta * v);
            }
        }
        t.to_csr()
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> T {
        let t = self.transpose();
        let mut m = T::zero();
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                m = m.max((v - t.get(i, j)).abs());
            }
            for (j, v) in t.row(i) {
                m = m.max((v - self.get(i, j)).abs());
            }
        }
        m
    }

    /// Principal submatrix on the given (sorted or unsorted) index set, renumbered in that order.
    pub fn principal_submatrix(&self, keep: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.nrows];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut t = Triplets::new(keep.len(), keep.len());
        for (new, &old) in keep.iter().enumerate() {
            for (j, v) in self.row(old) {
                let nj = map[j];
                if nj != usize::MAX {
                    t.push(new, nj, v);
                }
            }
        }
        t.to_csr()
    }

    /// Convert the scalar type.
    pub fn cast<U: Real>(&self) -> CsrMatrix<U> {
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            rowptr: self.rowptr.clone(),
            colidx: self.colidx.clone(),
            values: self.values.iter().map(|v| U::c(v.to_f64_lossy())).collect(),
        }
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[inline]
pub fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[inline]
pub fn norm_inf<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CsrMatrix<f64> {
        let mut t = Triplets::new(3, 3);
        t.push(0, 0, 2.0);
        t.push(0, 1, 1.0);
        t.push(1, 0, 1.0);
        t.push(1, 1, 3.0);
        t.push(2, 2, 4.0);
        t.push(2, 2, 1.0);
        t.to_csr()
    }

    #[test]
    fn duplicates_are_summed() {
        let a = sample();
        assert_eq!(a.get(2, 2), 5.0);
        assert_eq!(a.nnz(), 5);
    }

    #[test]
    fn product_against_dense() {
        let a = sample();
        let b = a.transpose();
        let c = a.matmul(&b);
        let dense = |m: &CsrMatrix<f64>| {
            let mut d = [[0.0; 3]; 3];
            for (i, row) in d.iter_mut().enumerate() {
                for (j, v) in m.row(i) {
                    row[j] = v;
                }
            }
            d
        };
        let (da, dc) = (dense(&a), dense(&c));
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| da[i][k] * da[j][k]).sum();
                assert!((s - dc[i][j]).abs() < 1e-14);
            }
        }
        assert_eq!(a.asymmetry(), 0.0);
    }

    #[test]
    fn transpose_matvec_consistent() {
        let a = sample();
        let x = [1.0, -2.0, 0.5];
        let y = a.mul_t_vec(&x);
        let z = a.transpose().mul_vec(&x);
        assert_eq!(y, z);
    }
}
