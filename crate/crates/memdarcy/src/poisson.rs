//! Neumann (or periodic) Poisson problems on the fluid cells of a MAC grid, and the
//! minimum-norm solution of the divergence equation built on them.

use crate::error::{Error, Result};
use crate::linalg::{SparseCholesky, Triplets};
use crate::mac::{Comp, MacGrid};
use crate::Real;
use std::sync::Arc;

/// Factorized `-D diag(a) G` on fluid cells (`a = (a_x, a_y)` weights the `u` and `v`
/// faces) with the gauge fixed by grounding the first fluid cell.
#[derive(Clone, Debug)]
pub struct FluidPoisson<T> {
    grid: Arc<MacGrid>,
    chol: Option<SparseCholesky<T>>,
    // neighbours of the grounded cell as (unknown index, weight)
    ground_row: Vec<(usize, T)>,
    // grounded response to a unit residual at the grounded cell spread evenly over all cells
    spread: Vec<T>,
}

impl<T: Real> FluidPoisson<T> {
    pub fn new(grid: Arc<MacGrid>) -> Result<Self> {
        Self::weighted(grid, [1.0, 1.0])
    }

    pub fn weighted(grid: Arc<MacGrid>, coef: [f64; 2]) -> Result<Self> {
        if !(coef[0] > 0.0 && coef[1] > 0.0) {
            return Err(Error::Config(format!("Poisson coefficients must be positive, got {coef:?}")));
        }
        let nc = grid.fluid_cells().len();
        if nc == 0 {
            return Err(Error::Config("Poisson problem without fluid cells".into()));
        }
        if nc == 1 {
            return Ok(Self { grid, chol: None, ground_row: vec![], spread: vec![] });
        }
        // grounded: unknown k ↔ fluid cell k+1
        let m = nc - 1;
        let mut t = Triplets::with_capacity(m, m, 5 * m);
        let mut ground_row = Vec::new();
        for &f in grid.fluid_faces() {
            let (a, b) = grid.face_cells(f);
            let ca = grid.cell_dof(grid.wrap_cell(a[0], a[1]).unwrap());
            let cb = grid.cell_dof(grid.wrap_cell(b[0], b[1]).unwrap());
            if ca == cb {
                continue;
            }
            let w = T::c(match grid.face_ij(f).0 {
                Comp::U => coef[0],
                Comp::V => coef[1],
            });
            for (x, y) in [(ca, cb), (cb, ca)] {
                if x == 0 && y > 0 {
                    ground_row.push((y - 1, w));
                }
                if x > 0 {
                    t.push(x - 1, x - 1, w);
                    if y > 0 {
                        t.push(x - 1, y - 1, -w);
                    }
                }
            }
        }
        let a = t.to_csr();
        let coords: Vec<[f64; 2]> = grid.fluid_cells()[1..].iter().map(|&c| grid.cell_pos(c)).collect();
        let chol = SparseCholesky::new(&a, &coords, &[])?;
        let spread = chol.solve(&vec![-T::one() / T::c(nc as f64); m]);
        Ok(Self { grid, chol: Some(chol), ground_row, spread })
    }

    pub fn grid(&self) -> &Arc<MacGrid> {
        &self.grid
    }

    /// Solve `D diag(a) G φ = g - mean(g)` on the fluid cells; returns `φ` with zero fluid mean
    /// (zero on solid cells) and the removed mean of `g`.
    pub fn solve(&self, g: &[T]) -> (Vec<T>, T) {
        let grid = &self.grid;
        let mean = grid.fluid_mean(g);
        let mut phi = vec![T::zero(); grid.ncells()];
        if let Some(ch) = &self.chol {
            let h2 = T::c(grid.h * grid.h);
            let rhs: Vec<T> = grid.fluid_cells()[1..].iter().map(|&c| -(g[c] - mean) * h2).collect();
            let mut x = ch.solve(&rhs);
            // The grounded equation collects the summed roundoff of all the others; move
            // that defect onto every cell instead.
            let g0 = grid.fluid_cells()[0];
            let mut r0 = -(g[g0] - mean) * h2;
            for &(k, w) in &self.ground_row {
                r0 += w * x[k];
            }
            for (xv, &z) in x.iter_mut().zip(&self.spread) {
                *xv += r0 * z;
            }
            for (k, &c) in grid.fluid_cells()[1..].iter().enumerate() {
                phi[c] = x[k];
            }
            let m = grid.fluid_mean(&phi);
            for &c in grid.fluid_cells() {
                phi[c] -= m;
            }
        }
        (phi, mean)
    }

    /// Minimum-L² face field with `div v = g` on fluid cells and `v = 0` on every non-fluid
    /// face. The data must have zero mean up to `tol · (1 + max|g|)`.
    pub fn min_norm_divergence(&self, g: &[T], tol: f64) -> Result<Vec<T>> {
        let grid = &self.grid;
        let mean = grid.fluid_mean(g);
        let scale = grid.fluid_cells().iter().fold(0.0f64, |m, &c| m.max(g[c].to_f64_lossy().abs()));
        if mean.to_f64_lossy().abs() > tol * (1.0 + scale) {
            return Err(Error::Compatibility(format!(
                "divergence data has mean {:.3e} over the fluid region",
                mean.to_f64_lossy()
            )));
        }
        let (phi, _) = self.solve(g);
        Ok(grid.gradient(&phi))
    }

    /// Project a face field onto `range(G)`: returns `p` with `G p` closest to `rho`
    /// (used to recover pressures from momentum residuals).
    pub fn potential_of(&self, rho: &[T]) -> Vec<T> {
        let mut r = rho.to_vec();
        for (f, v) in r.iter_mut().enumerate() {
            if self.grid.kind(f) != crate::mac::FaceKind::Fluid {
                *v = T::zero();
            }
        }
        let d = self.grid.divergence(&r);
        self.solve(&d).0
    }
}
