//! Geometric nested-dissection ordering.
//!
//! Every vertex carries a point in the plane. A vertex set is split at the median of its
//! longer coordinate extent; the separator is the set of vertices on the smaller side that
//! have a neighbour on the other side, so it adapts to the stencil width automatically.

use super::sparse::CsrMatrix;
use crate::Real;

const LEAF: usize = 48;

/// Fill-reducing permutation `perm[new] = old`. Vertices flagged in `last` are appended at
/// the end in their given order (dense coupling rows, e.g. global constraint unknowns).
pub fn nested_dissection<T: Real>(a: &CsrMatrix<T>, coords: &[[f64; 2]], last: &[usize]) -> Vec<usize> {
    let n = a.nrows();
    assert_eq!(coords.len(), n);
    let mut is_last = vec![false; n];
    for &v in last {
        is_last[v] = true;
    }
    let verts: Vec<usize> = (0..n).filter(|&v| !is_last[v]).collect();
    let mut st = State { a, coords, side: vec![0u8; n], stamp: vec![0u32; n], gen: 0, out: Vec::with_capacity(n) };
    st.dissect(verts);
    st.out.extend_from_slice(last);
    debug_assert_eq!(st.out.len(), n);
    st.out
}

struct State<'a, T> {
    a: &'a CsrMatrix<T>,
    coords: &'a [[f64; 2]],
    side: Vec<u8>,
    stamp: Vec<u32>,
    gen: u32,
    out: Vec<usize>,
}

impl<T: Real> State<'_, T> {
    fn dissect(&mut self, verts: Vec<usize>) {
        // explicit stack of pending work: either a set to split or a separator to emit
        enum Job {
            Split(Vec<usize>),
            Emit(Vec<usize>),
        }
        let mut stack = vec![Job::Split(verts)];
        while let Some(job) = stack.pop() {
            match job {
                Job::Emit(s) => self.out.extend(s),
                Job::Split(v) => {
                    if v.len() <= LEAF {
                        self.out.extend(v);
                        continue;
                    }
                    match self.split(&v) {
                        None => self.out.extend(v),
                        Some((left, right, sep)) => {
                            // processed in reverse push order: left, right, separator
                            stack.push(Job::Emit(sep));
                            stack.push(Job::Split(right));
                            stack.push(Job::Split(left));
                        }
                    }
                }
            }
        }
    }

    fn split(&mut self, v: &[usize]) -> Option<(Vec<usize>, Vec<usize>, Vec<usize>)> {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for &i in v {
            for d in 0..2 {
                lo[d] = lo[d].min(self.coords[i][d]);
                hi[d] = hi[d].max(self.coords[i][d]);
            }
        }
        let dim = if hi[0] - lo[0] >= hi[1] - lo[1] { 0 } else { 1 };
        if hi[dim] - lo[dim] <= 0.0 {
            return None;
        }
        let mut keys: Vec<(f64, usize)> = v.iter().map(|&i| (self.coords[i][dim], i)).collect();
        let mid = keys.len() / 2;
        keys.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).unwrap());
        let pivot = keys[mid].0;
        self.gen = self.gen.wrapping_add(1);
        if self.gen == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.gen = 1;
        }
        // side 1: coordinate < pivot, side 2: otherwise
        let (mut n1, mut n2) = (0usize, 0usize);
        for &i in v {
            self.stamp[i] = self.gen;
            if self.coords[i][dim] < pivot {
                self.side[i] = 1;
                n1 += 1;
            } else {
                self.side[i] = 2;
                n2 += 1;
            }
        }
        if n1 == 0 || n2 == 0 {
            return None;
        }
        let boundary = |st: &Self, s: u8| -> Vec<usize> {
            v.iter()
                .copied()
                .filter(|&i| st.side[i] == s)
                .filter(|&i| {
                    st.a.row(i).any(|(j, _)| j != i && st.stamp[j] == st.gen && st.side[j] != s)
                })
                .collect()
        };
        let b1 = boundary(self, 1);
        let b2 = boundary(self, 2);
        let sep = if b1.len() <= b2.len() { b1 } else { b2 };
        for &i in &sep {
            self.side[i] = 3;
        }
        let left: Vec<usize> = v.iter().copied().filter(|&i| self.side[i] == 1).collect();
        let right: Vec<usize> = v.iter().copied().filter(|&i| self.side[i] == 2).collect();
        if left.is_empty() && right.is_empty() {
            return None;
        }
        Some((left, right, sep))
    }
}

/// Inverse of a permutation.
pub fn invert(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0usize; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sparse::Triplets;

    #[test]
    fn permutation_is_complete() {
        let n = 20;
        let mut t = Triplets::<f64>::new(n * n, n * n);
        let mut coords = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let k = j * n + i;
                coords.push([i as f64, j as f64]);
                t.push(k, k, 4.0);
                if i + 1 < n {
                    t.push(k, k + 1, -1.0);
                    t.push(k + 1, k, -1.0);
                }
                if j + 1 < n {
                    t.push(k, k + n, -1.0);
                    t.push(k + n, k, -1.0);
                }
            }
        }
        let a = t.to_csr();
        let p = nested_dissection(&a, &coords, &[]);
        let mut s = p.clone();
        s.sort_unstable();
        assert_eq!(s, (0..n * n).collect::<Vec<_>>());
    }
}
