//! Layer sources `J₁, J₂`, the conditional average, and the boundary-layer correctors
//! `ξ̂` (on `Ω_ε`) and `η̂` (on each piece of `O_ε`).

use crate::error::{Error, Result};
use crate::geometry::{CutoffFunction, LayerDecomposition};
use crate::mac::{Comp, FaceKind, MacGrid};
use crate::stokes::StokesSolver;
use crate::Real;
use std::collections::HashMap;
use std::sync::Arc;

/// `ψ_ε` at every face centre of the fine grid.
pub fn cutoff_on_faces<T: Real>(psi: &CutoffFunction<T>, grid: &MacGrid) -> Vec<T> {
    let mut memo: HashMap<i64, T> = HashMap::new();
    let h = grid.h;
    (0..grid.nfaces())
        .map(|f| {
            let [x, y] = grid.face_pos(f);
            let d = x.min(1.0 - x).min(y).min(1.0 - y);
            *memo.entry((2.0 * d / h).round() as i64).or_insert_with(|| T::c(psi.value_at(x, y)))
        })
        .collect()
}

/// One node of layer sources.
#[derive(Clone, Debug)]
pub struct LayerSources<T> {
    /// `V = ψ_ε [W^ε ∗ G + ε φ^ε ∗₂ ∂G]` on the fine faces.
    pub v: Vec<T>,
    /// `J₁ = ∇ψ_ε · [(W^ε - A) ∗ G]` on cells.
    pub j1: Vec<T>,
    /// `J₂ = div V - J₁` on fluid cells.
    pub j2: Vec<T>,
}

/// Assemble `V`, `J₁`, `J₂` from `eg = W^ε ∗ G`, `fg = ε φ^ε ∗₂ ∂G` (face fields) and
/// `ag = A ∗ G` (cell centres).
pub fn assemble_j<T: Real>(
    grid: &MacGrid,
    psi: &CutoffFunction<T>,
    psi_face: &[T],
    eg: &[T],
    fg: &[T],
    ag: &[[T; 2]],
) -> LayerSources<T> {
    let mut v = vec![T::zero(); grid.nfaces()];
    for &f in grid.fluid_faces() {
        v[f] = psi_face[f] * (eg[f] + fg[f]);
    }
    let (ux, vy) = grid.cell_average(eg);
    let mut j1 = vec![T::zero(); grid.ncells()];
    for &c in grid.fluid_cells() {
        let g = psi.grad[c];
        if g[0] != T::zero() || g[1] != T::zero() {
            j1[c] = g[0] * (ux[c] - ag[c][0]) + g[1] * (vy[c] - ag[c][1]);
        }
    }
    let d = grid.divergence(&v);
    let mut j2 = vec![T::zero(); grid.ncells()];
    for &c in grid.fluid_cells() {
        j2[c] = d[c] - j1[c];
    }
    LayerSources { v, j1, j2 }
}

/// `Σ_i (⨍_{O^i} J) 1_{O^i}` over the fluid cells of each decomposition cell, and the means.
pub fn conditional_average<T: Real>(j: &[T], decomp: &LayerDecomposition, grid: &MacGrid) -> (Vec<T>, Vec<T>) {
    let mut sum = vec![T::zero(); decomp.cells.len()];
    let mut cnt = vec![0usize; decomp.cells.len()];
    for &c in grid.fluid_cells() {
        if let Some(k) = decomp.owner[c] {
            sum[k] += j[c];
            cnt[k] += 1;
        }
    }
    let means: Vec<T> = sum.iter().zip(&cnt).map(|(&s, &n)| if n > 0 { s / T::from_usize_lossy(n) } else { T::zero() }).collect();
    let mut out = vec![T::zero(); grid.ncells()];
    for &c in grid.fluid_cells() {
        if let Some(k) = decomp.owner[c] {
            out[c] = means[k];
        }
    }
    (out, means)
}

/// Divergence solver on one decomposition cell (zero on its boundary), reused for all
/// obstacle-free cells of the same size.
pub struct LocalLayerSolver<T> {
    solvers: HashMap<(usize, usize, Vec<bool>), StokesSolver<T>>,
    h: f64,
}

impl<T: Real> LocalLayerSolver<T> {
    pub fn new(h: f64) -> Self {
        Self { solvers: HashMap::new(), h }
    }

    /// Solve `div η = rhs - mean` on every decomposition cell and glue the pieces into a
    /// fine face field. Fails naming the cell whose data is incompatible.
    pub fn solve(&mut self, fine: &MacGrid, decomp: &LayerDecomposition, rhs: &[T], tol: f64) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); fine.nfaces()];
        let n = fine.nx;
        for (k, cell) in decomp.cells.iter().enumerate() {
            let [i0, i1, j0, j1] = cell.rect;
            let (w, hgt) = (i1 - i0, j1 - j0);
            let mask: Vec<bool> = (0..w * hgt).map(|c| fine.solid[(j0 + c / w) * n + i0 + c % w]).collect();
            if mask.iter().all(|&s| s) {
                continue;
            }
            let key = (w, hgt, mask.clone());
            let st = match self.solvers.entry(key) {
                std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
                std::collections::hash_map::Entry::Vacant(e) => {
                    let g = Arc::new(MacGrid::new(w, hgt, self.h, false, mask.clone()));
                    e.insert(StokesSolver::new(g)?)
                }
            };
            let local = st.grid().clone();
            let g: Vec<T> = (0..w * hgt).map(|c| if mask[c] { T::zero() } else { rhs[(j0 + c / w) * n + i0 + c % w] }).collect();
            let eta = st.bogovskii(&g, tol).map_err(|e| match e {
                Error::Compatibility(m) => Error::Compatibility(format!("layer cell {k} {:?}: {m}", cell.rect)),
                other => other,
            })?;
            for f in 0..local.nfaces() {
                if local.kind(f) != FaceKind::Fluid {
                    continue;
                }
                let (c, i, j) = local.face_ij(f);
                let g = match c {
                    Comp::U => fine.uidx(i0 + i, j0 + j),
                    Comp::V => fine.vidx(i0 + i, j0 + j),
                };
                out[g] = eta[f];
            }
        }
        Ok(out)
    }
}

/// Residuals of `div V = div ξ̂ + div η̂` on the fluid cells: `(max over Ω_ε, max over O_ε
/// with η̂ removed)`.
pub fn divergence_identity<T: Real>(grid: &MacGrid, v: &[T], xi: &[T], eta: &[T], layer: &[bool]) -> (f64, f64) {
    let (dv, dx, de) = (grid.divergence(v), grid.divergence(xi), grid.divergence(eta));
    let (mut full, mut ablated) = (0.0f64, 0.0f64);
    for &c in grid.fluid_cells() {
        full = full.max((dv[c] - dx[c] - de[c]).to_f64_lossy().abs());
        if layer[c] {
            ablated = ablated.max((dv[c] - dx[c]).to_f64_lossy().abs());
        }
    }
    (full, ablated)
}

/// `max |div v - g|` over fluid cells.
pub fn divergence_residual<T: Real>(grid: &MacGrid, v: &[T], g: &[T]) -> f64 {
    let d = grid.divergence(v);
    grid.fluid_cells().iter().fold(0.0, |m, &c| m.max((d[c] - g[c]).to_f64_lossy().abs()))
}

/// Largest magnitude of a face field on the non-fluid faces (zero trace check).
pub fn trace_max<T: Real>(grid: &MacGrid, v: &[T]) -> f64 {
    (0..grid.nfaces())
        .filter(|&f| grid.kind(f) != FaceKind::Fluid)
        .fold(0.0, |m, f| m.max(v[f].to_f64_lossy().abs()))
}
