//! Sparse Cholesky factorization `P A Pᵀ = L Lᵀ` (up-looking, elimination-tree driven).

use super::ordering::{invert, nested_dissection};
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::Real;

const NONE: usize = usize::MAX;

/// Cholesky factor with a fixed symbolic structure; the numeric part can be recomputed for
/// any matrix with the same sparsity pattern.
#[derive(Clone, Debug)]
pub struct SparseCholesky<T> {
    n: usize,
    perm: Vec<usize>,
    iperm: Vec<usize>,
    // upper triangle of the permuted matrix, column-compressed
    cp: Vec<usize>,
    ci: Vec<usize>,
    cmap: Vec<usize>,
    cx: Vec<T>,
    parent: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<u32>,
    lx: Vec<T>,
    nnz_a: usize,
}

impl<T: Real> SparseCholesky<T> {
    /// Factor a symmetric positive definite matrix using nested dissection on `coords`.
    /// Unknowns listed in `last` are eliminated at the very end.
    pub fn new(a: &CsrMatrix<T>, coords: &[[f64; 2]], last: &[usize]) -> Result<Self> {
        let perm = nested_dissection(a, coords, last);
        Self::with_permutation(a, perm)
    }

    pub fn with_permutation(a: &CsrMatrix<T>, perm: Vec<usize>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || perm.len() != n {
            return Err(Error::Config(format!("Cholesky needs a square matrix, got {}x{}", n, a.ncols())));
        }
        let iperm = invert(&perm);
        // permuted upper triangle in CSC (column k holds rows i <= k)
        let mut count = vec![0usize; n + 1];
        for r in 0..n {
            for (c, _) in a.row(r) {
                let (i, k) = (iperm[r], iperm[c]);
                if i <= k {
                    count[k + 1] += 1;
                }
            }
        }
        for k in 0..n {
            count[k + 1] += count[k];
        }
        let cp = count.clone();
        let mut next = count;
        let mut ci = vec![0usize; cp[n]];
        let mut cmap = vec![0usize; cp[n]];
        let rowptr = a.rowptr();
        for r in 0..n {
            for p in rowptr[r]..rowptr[r + 1] {
                let c = a.colidx()[p];
                let (i, k) = (iperm[r], iperm[c]);
                if i <= k {
                    let q = next[k];
                    ci[q] = i;
                    cmap[q] = p;
                    next[k] += 1;
                }
            }
        }
        // elimination tree
        let mut parent = vec![NONE; n];
        let mut ancestor = vec![NONE; n];
        for k in 0..n {
            for &i0 in &ci[cp[k]..cp[k + 1]] {
                let mut i = i0;
                while i != NONE && i < k {
                    let inext = ancestor[i];
                    ancestor[i] = k;
                    if inext == NONE {
                        parent[i] = k;
                    }
                    i = inext;
                }
            }
        }
        // column counts from the row patterns
        let mut colcount = vec![1usize; n];
        let mut w = vec![NONE; n];
        let mut s = vec![0usize; n];
        for k in 0..n {
            let top = ereach(k, &cp, &ci, &parent, &mut w, &mut s);
            for &i in &s[top..n] {
                colcount[i] += 1;
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + colcount[k];
        }
        let nnz = lp[n];
        if nnz > u32::MAX as usize {
            return Err(Error::Solver(format!("Cholesky factor too large ({nnz} nonzeros)")));
        }
        let mut f = Self {
            n,
            perm,
            iperm,
            cx: vec![T::zero(); cp[n]],
            cp,
            ci,
            cmap,
            parent,
            lp,
            li: vec![0u32; nnz],
            lx: vec![T::zero(); nnz],
            nnz_a: a.nnz(),
        };
        f.refactor(a)?;
        Ok(f)
    }

    /// Numeric refactorization for a matrix with exactly the original sparsity pattern.
    pub fn refactor(&mut self, a: &CsrMatrix<T>) -> Result<()> {
        if a.nnz() != self.nnz_a || a.nrows() != self.n {
            return Err(Error::Config("refactor: sparsity pattern changed".into()));
        }
        let vals = a.values();
        for (q, &p) in self.cmap.iter().enumerate() {
            self.cx[q] = vals[p];
        }
        let n = self.n;
        let mut c: Vec<usize> = self.lp[..n].to_vec();
        let mut x = vec![T::zero(); n];
        let mut w = vec![NONE; n];
        let mut s = vec![0usize; n];
        for k in 0..n {
            let top = ereach(k, &self.cp, &self.ci, &self.parent, &mut w, &mut s);
            for q in self.cp[k]..self.cp[k + 1] {
                x[self.ci[q]] = self.cx[q];
            }
            let mut d = x[k];
            x[k] = T::zero();
            for &i in &s[top..n] {
                let lki = x[i] / self.lx[self.lp[i]];
                x[i] = T::zero();
                let end = c[i];
                let (li, lx) = (&self.li[self.lp[i] + 1..end], &self.lx[self.lp[i] + 1..end]);
                for (&r, &v) in li.iter().zip(lx) {
                    x[r as usize] -= v * lki;
                }
                d -= lki * lki;
                let p = c[i];
                c[i] += 1;
                self.li[p] = k as u32;
                self.lx[p] = lki;
            }
            if !(d > T::zero()) {
                return Err(Error::Solver(format!(
                    "Cholesky: matrix not positive definite at pivot {k} (d = {d})"
                )));
            }
            let p = c[k];
            c[k] += 1;
            self.li[p] = k as u32;
            self.lx[p] = d.sqrt();
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz_factor(&self) -> usize {
        self.lp[self.n]
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut y: Vec<T> = self.perm.iter().map(|&o| b[o]).collect();
        self.solve_permuted_in_place(&mut y);
        let mut x = vec![T::zero(); self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    fn solve_permuted_in_place(&self, y: &mut [T]) {
        let n = self.n;
        for j in 0..n {
            let (a, b) = (self.lp[j], self.lp[j + 1]);
            let yj = y[j] / self.lx[a];
            y[j] = yj;
            for p in a + 1..b {
                y[self.li[p] as usize] -= self.lx[p] * yj;
            }
        }
        for j in (0..n).rev() {
            let (a, b) = (self.lp[j], self.lp[j + 1]);
            let mut s = y[j];
            for p in a + 1..b {
                s -= self.lx[p] * y[self.li[p] as usize];
            }
            y[j] = s / self.lx[a];
        }
    }

    /// Position of original unknown `i` in the elimination order.
    pub fn position(&self, i: usize) -> usize {
        self.iperm[i]
    }
}

/// Nonzero pattern of row `k` of `L`, returned in `s[top..n]` in topological order.
fn ereach(k: usize, cp: &[usize], ci: &[usize], parent: &[usize], w: &mut [usize], s: &mut [usize]) -> usize {
    let n = parent.len();
    let mut top = n;
    w[k] = k;
    for &i0 in &ci[cp[k]..cp[k + 1]] {
        let mut i = i0;
        if i > k {
            continue;
        }
        let mut len = 0;
        while w[i] != k {
            s[len] = i;
            len += 1;
            w[i] = k;
            i = parent[i];
        }
        while len > 0 {
            top -= 1;
            len -= 1;
            s[top] = s[len];
        }
    }
    top
}
