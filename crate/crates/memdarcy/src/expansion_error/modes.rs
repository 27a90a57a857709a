//! Separated representation `F(x, t) ≈ Σ_r a_r(t) F_r(x)` of the effective force, and the
//! smoothed fields `G_r = S_δ(φ_ε F_r)` on the cell centres of the fine grid.

use super::smoothing::{generic_cutoff, Mollifier};
use crate::error::{Error, Result};
use crate::mac::MacGrid;
use crate::time::TimeGrid;
use crate::Real;
use nalgebra::{DMatrix, SymmetricEigen};

/// Truncated eigen-decomposition of the time Gram matrix of a history of flat vectors.
/// Returns `(a, modes, dropped)` with `hist[k] ≈ Σ_r a[r][k] modes[r]` and `dropped` the
/// relative L² size of the discarded part.
pub fn low_rank(hist: &[Vec<f64>], tol: f64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, f64) {
    let m = hist.len();
    let mut gram = DMatrix::<f64>::zeros(m, m);
    for k in 0..m {
        for l in 0..=k {
            let s: f64 = hist[k].iter().zip(&hist[l]).map(|(a, b)| a * b).sum();
            gram[(k, l)] = s;
            gram[(l, k)] = s;
        }
    }
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let total: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0)).sum();
    let top = eig.eigenvalues[order[0]].max(0.0);
    let (mut a, mut modes) = (Vec::new(), Vec::new());
    let mut kept = 0.0;
    // Gram eigenvalues below a few ulps of the largest are roundoff
    let cut = (tol * tol).max(16.0 * f64::EPSILON) * top;
    if top > 0.0 {
        for &r in &order {
            let lam = eig.eigenvalues[r];
            if lam <= cut {
                break;
            }
            kept += lam;
            let v = eig.eigenvectors.column(r);
            let s = lam.sqrt();
            let dim = hist[0].len();
            let mut mode = vec![0.0; dim];
            for k in 0..m {
                let c = v[k] / s;
                if c != 0.0 {
                    for (x, y) in mode.iter_mut().zip(&hist[k]) {
                        *x += c * y;
                    }
                }
            }
            a.push((0..m).map(|k| v[k] * s).collect());
            modes.push(mode);
        }
    }
    let dropped = if total > 0.0 { ((total - kept).max(0.0) / total).sqrt() } else { 0.0 };
    (a, modes, dropped)
}

/// Cell-centred vector of a face field (mean of the two faces of each component).
pub fn face_to_centres<T: Real>(grid: &MacGrid, f: &[T]) -> Vec<[f64; 2]> {
    let half = 0.5;
    (0..grid.ncells())
        .map(|c| {
            let (i, j) = (c % grid.nx, c / grid.nx);
            let r = if grid.periodic { (i + 1) % grid.nx } else { i + 1 };
            let t = if grid.periodic { (j + 1) % grid.ny } else { j + 1 };
            [
                half * (f[grid.uidx(i, j)] + f[grid.uidx(r, j)]).to_f64_lossy(),
                half * (f[grid.vidx(i, j)] + f[grid.vidx(i, t)]).to_f64_lossy(),
            ]
        })
        .collect()
}

/// Bilinear interpolation of cell-centred samples on an `n × n` grid of the unit square,
/// constant beyond the outermost centres.
pub fn bilinear<V: Copy>(vals: &[V], n: usize, x: f64, y: f64, lerp: impl Fn(V, V, f64) -> V) -> V {
    let h = 1.0 / n as f64;
    let locate = |s: f64| -> (usize, f64) {
        let q = (s / h - 0.5).clamp(0.0, (n - 1) as f64);
        let i = (q.floor() as usize).min(n.saturating_sub(2));
        (i, q - i as f64)
    };
    if n == 1 {
        return vals[0];
    }
    let (i, a) = locate(x);
    let (j, b) = locate(y);
    let lo = lerp(vals[j * n + i], vals[j * n + i + 1], a);
    let hi = lerp(vals[(j + 1) * n + i], vals[(j + 1) * n + i + 1], a);
    lerp(lo, hi, b)
}

pub fn lerp2(p: [f64; 2], q: [f64; 2], s: f64) -> [f64; 2] {
    [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])]
}

/// The force modes on the fine grid.
#[derive(Clone, Debug)]
pub struct ForcingModes<T> {
    pub time: TimeGrid,
    pub eps: f64,
    /// Fine cells per side.
    pub n: usize,
    /// `a[r][k]`
    pub a: Vec<Vec<f64>>,
    /// `F_r` at fine cell centres.
    pub f: Vec<Vec<[T; 2]>>,
    /// `G_r = S_δ(φ_ε F_r)`, `δ = ε/2`.
    pub g: Vec<Vec<[T; 2]>>,
    /// `∂_i G_{r,j}` at fine cell centres, stored `[i][j]`.
    pub dg: Vec<Vec<[[T; 2]; 2]>>,
    /// Relative L² size of the part of the history discarded by the truncation.
    pub truncation: f64,
}

impl<T: Real> ForcingModes<T> {
    /// From time modes and fine-grid spatial modes.
    pub fn new(time: TimeGrid, eps: f64, n: usize, a: Vec<Vec<f64>>, f: Vec<Vec<[T; 2]>>, truncation: f64) -> Result<Self> {
        if a.len() != f.len() || a.iter().any(|x| x.len() != time.len()) || f.iter().any(|x| x.len() != n * n) {
            return Err(Error::Shape("force modes do not match the time grid or the fine grid".into()));
        }
        let moll = Mollifier::new(0.5 * eps, n)?;
        let h = 1.0 / n as f64;
        let cut: Vec<T> = (0..n * n)
            .map(|c| {
                let (x, y) = (((c % n) as f64 + 0.5) * h, ((c / n) as f64 + 0.5) * h);
                let d = x.min(1.0 - x).min(y).min(1.0 - y);
                T::c(generic_cutoff(eps, d))
            })
            .collect();
        let mut g = Vec::with_capacity(f.len());
        let mut dg = Vec::with_capacity(f.len());
        for fr in &f {
            let pf: Vec<[T; 2]> = fr.iter().zip(&cut).map(|(v, &c)| [c * v[0], c * v[1]]).collect();
            let gr = moll.smooth_vec(&pf);
            dg.push(centred_gradient(&gr, n));
            g.push(gr);
        }
        Ok(Self { time, eps, n, a, f, g, dg, truncation })
    }

    /// From the history of `F = f - ∇p₀` on a (coarser) macroscopic grid, by truncated
    /// separation of variables and bilinear transfer to the fine cell centres.
    pub fn from_macro(time: TimeGrid, macro_grid: &MacGrid, history: &[Vec<T>], eps: f64, n: usize, tol: f64) -> Result<Self> {
        if history.len() != time.len() {
            return Err(Error::Shape(format!("{} force samples for {} nodes", history.len(), time.len())));
        }
        let flat: Vec<Vec<f64>> =
            history.iter().map(|f| face_to_centres(macro_grid, f).into_iter().flatten().collect()).collect();
        let (a, modes, dropped) = low_rank(&flat, tol);
        let nm = macro_grid.nx;
        let h = 1.0 / n as f64;
        let f = modes
            .iter()
            .map(|m| {
                let v: Vec<[f64; 2]> = m.chunks(2).map(|c| [c[0], c[1]]).collect();
                (0..n * n)
                    .map(|c| {
                        let (x, y) = (((c % n) as f64 + 0.5) * h, ((c / n) as f64 + 0.5) * h);
                        let q = bilinear(&v, nm, x, y, lerp2);
                        [T::c(q[0]), T::c(q[1])]
                    })
                    .collect()
            })
            .collect();
        Self::new(time, eps, n, a, f, dropped)
    }

    pub fn rank(&self) -> usize {
        self.a.len()
    }
}

/// Second-order centred differences at cell centres (one-sided on the outer ring).
pub fn centred_gradient<T: Real>(g: &[[T; 2]], n: usize) -> Vec<[[T; 2]; 2]> {
    let h = T::c(1.0 / n as f64);
    let two = T::c(2.0);
    let d = |c0: usize, c1: usize, span: T, comp: usize| (g[c1][comp] - g[c0][comp]) / span;
    (0..n * n)
        .map(|c| {
            let (i, j) = (c % n, c / n);
            let mut out = [[T::zero(); 2]; 2];
            for comp in 0..2 {
                out[0][comp] = if i == 0 {
                    d(c, c + 1, h, comp)
                } else if i == n - 1 {
                    d(c - 1, c, h, comp)
                } else {
                    d(c - 1, c + 1, two * h, comp)
                };
                out[1][comp] = if j == 0 {
                    d(c, c + n, h, comp)
                } else if j == n - 1 {
                    d(c - n, c, h, comp)
                } else {
                    d(c - n, c + n, two * h, comp)
                };
            }
            out
        })
        .collect()
}
