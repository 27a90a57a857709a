//! Flux corrector `Φ` and Bogovskii cell corrector `φ`.
//!
//! The flux `b_ij = W̃_j · e_i - A_ij` lives on the faces of the full periodic cell (the
//! corrector extended by zero into the obstacle). For fixed `j` the two components are
//! solved separately on their face lattices, `Δ f_ij = b_ij`, and
//! `Φ_{21,j} = ∂₂ f_1j - ∂₁ f_2j = -Φ_{12,j}` is sampled at the grid nodes.
//!
//! `φ_{·i,j}` is the minimum-norm face field on the fluid part with
//! `div φ_{·i,j} = -W_ij + A_ij / |Y_f|` and zero values on every obstacle face.

use crate::cell_corrector::{CorrectorTrajectory, PermeabilityKernel};
use crate::error::{Error, Result};
use crate::mac::{FaceKind, MacGrid};
use crate::poisson::FluidPoisson;
use crate::stokes::StokesSolver;
use crate::time::TimeGrid;
use crate::Real;
use std::sync::Arc;

fn check_inputs<T: Real>(traj: &[CorrectorTrajectory<T>; 2], kernel: &PermeabilityKernel) -> Result<()> {
    if traj[0].time != kernel.time || traj[1].time != kernel.time {
        return Err(Error::Config("correctors and kernel must share one time grid".into()));
    }
    if traj[0].dir != 0 || traj[1].dir != 1 {
        return Err(Error::Config("trajectories must be given for directions 0 and 1 in order".into()));
    }
    Ok(())
}

/// Flux corrector on the full cell.
#[derive(Clone, Debug)]
pub struct FluxCorrector<T> {
    /// The open periodic grid of the full cell (no obstacle).
    pub grid: Arc<MacGrid>,
    pub time: TimeGrid,
    /// `b_{·j}(t_k)` as face fields, `b[j][k]`.
    pub b: [Vec<Vec<T>>; 2],
    /// `Φ_{21,j}(t_k)` at the nodes `(i h, l h)`, index `l n + i`; `Φ_{12,j} = -Φ_{21,j}` and
    /// the diagonal entries vanish.
    pub phi21: [Vec<Vec<T>>; 2],
}

impl<T: Real> FluxCorrector<T> {
    /// `Φ_{ki,j}` at node `c` and time index `t`.
    pub fn entry(&self, k: usize, i: usize, j: usize, t: usize, c: usize) -> T {
        match (k, i) {
            (1, 0) => self.phi21[j][t][c],
            (0, 1) => -self.phi21[j][t][c],
            _ => T::zero(),
        }
    }

    /// `max |∇_k Φ_{ki,j} - b_ij|` over all faces, directions and nodes.
    pub fn residual(&self) -> f64 {
        let mut r = 0.0f64;
        for j in 0..2 {
            for (p, b) in self.phi21[j].iter().zip(&self.b[j]) {
                let d = divergence_of_phi(&self.grid, p);
                for (x, y) in d.iter().zip(b) {
                    r = r.max((*x - *y).to_f64_lossy().abs());
                }
            }
        }
        r
    }

    /// `max |∫_Y b|` and `max |div b|`.
    pub fn flux_properties(&self) -> (f64, f64) {
        let g = &self.grid;
        let (mut mean, mut div) = (0.0f64, 0.0f64);
        for bj in &self.b {
            for b in bj {
                let s = g.fluid_integral(b);
                mean = mean.max(s[0].to_f64_lossy().abs()).max(s[1].to_f64_lossy().abs());
                div = div.max(g.max_divergence(b).to_f64_lossy());
            }
        }
        (mean, div)
    }

    pub fn max_abs(&self) -> f64 {
        self.phi21.iter().flatten().flatten().fold(0.0f64, |m, v| m.max(v.to_f64_lossy().abs()))
    }
}

/// `∇_k Φ_{k·}` as a face field: `∂₂Φ_{21}` on `u` faces and `-∂₁Φ_{21}` on `v` faces.
pub fn divergence_of_phi<T: Real>(grid: &MacGrid, phi21: &[T]) -> Vec<T> {
    let n = grid.nx;
    let ih = T::c(1.0 / grid.h);
    let node = |i: usize, l: usize| phi21[(l % n) * n + i % n];
    let mut out = vec![T::zero(); grid.nfaces()];
    for l in 0..n {
        for i in 0..n {
            // u face (i, l) sits between nodes (i, l) and (i, l+1)
            out[grid.uidx(i, l)] = (node(i, l + 1) - node(i, l)) * ih;
            // v face (i, l) sits between nodes (i, l) and (i+1, l)
            out[grid.vidx(i, l)] = -(node(i + 1, l) - node(i, l)) * ih;
        }
    }
    out
}

/// Build `Φ` from the flux fields `b[j][k]` given on the open periodic `n × n` grid.
pub fn flux_potential<T: Real>(grid: Arc<MacGrid>, time: TimeGrid, b: [Vec<Vec<T>>; 2]) -> Result<FluxCorrector<T>> {
    let n = grid.nx;
    if !grid.periodic || grid.ny != n || grid.solid.iter().any(|&s| s) {
        return Err(Error::Config("the flux corrector lives on the open periodic square cell".into()));
    }
    // every face lattice is a periodic n × n grid with the same Laplacian as the cells
    let poisson = FluidPoisson::<T>::new(grid.clone())?;
    let ih = T::c(1.0 / grid.h);
    let mut phi21: [Vec<Vec<T>>; 2] = [Vec::new(), Vec::new()];
    for j in 0..2 {
        for bk in &b[j] {
            let nu = grid.nu();
            let (f1, _) = poisson.solve(&bk[..nu]);
            let (f2, _) = poisson.solve(&bk[nu..]);
            let mut p = vec![T::zero(); n * n];
            for l in 0..n {
                for i in 0..n {
                    // ∂₂ f_1 between u faces (i, l-1) and (i, l); ∂₁ f_2 between v faces (i-1, l) and (i, l)
                    let lm = (l + n - 1) % n;
                    let im = (i + n - 1) % n;
                    p[l * n + i] = (f1[l * n + i] - f1[lm * n + i]) * ih - (f2[l * n + i] - f2[l * n + im]) * ih;
                }
            }
            phi21[j].push(p);
        }
    }
    Ok(FluxCorrector { grid, time, b, phi21 })
}

/// `Φ` for the cell correctors. Node 0 uses the `t = 0+` field `P e_j`: the raw initial
/// field has a normal trace on the obstacle and its flux is not solenoidal.
pub fn flux_corrector<T: Real>(traj: &[CorrectorTrajectory<T>; 2], kernel: &PermeabilityKernel) -> Result<FluxCorrector<T>> {
    check_inputs(traj, kernel)?;
    let cg = &traj[0].grid;
    let n = cg.nx;
    let grid = Arc::new(MacGrid::open(n, n, cg.h, true));
    let a0p = kernel.a0_plus.unwrap_or(kernel.a[0]);
    let mut b: [Vec<Vec<T>>; 2] = [Vec::new(), Vec::new()];
    for j in 0..2 {
        for k in 0..kernel.len() {
            let w = if k == 0 { &traj[j].projected_initial } else { &traj[j].w[k] };
            let a = if k == 0 { a0p } else { kernel.a[k] };
            let mut bk = vec![T::zero(); grid.nfaces()];
            for (f, v) in bk.iter_mut().enumerate() {
                // obstacle faces carry zero in W, so W̃ needs no masking
                let i = usize::from(f >= grid.nu());
                *v = w[f] - T::c(a[i][j]);
            }
            b[j].push(bk);
        }
    }
    flux_potential(grid, kernel.time.clone(), b)
}

/// Bogovskii cell corrector `φ_{·i,j}(t_k)`.
#[derive(Clone, Debug)]
pub struct BogovskiiCorrector<T> {
    pub grid: Arc<MacGrid>,
    pub time: TimeGrid,
    /// `fields[i][j][k]`: face field `φ_{·i,j}(t_k)`.
    pub fields: [[Vec<Vec<T>>; 2]; 2],
    /// Right-hand sides `-W_ij + A_ij/|Y_f|` per `(i, j, k)` on cells.
    pub rhs: [[Vec<Vec<T>>; 2]; 2],
}

impl<T: Real> BogovskiiCorrector<T> {
    /// `max |div φ - rhs|` over fluid cells, per node.
    pub fn divergence_residuals(&self) -> Vec<f64> {
        let g = &self.grid;
        (0..self.time.len())
            .map(|k| {
                let mut r = 0.0f64;
                for i in 0..2 {
                    for j in 0..2 {
                        let d = g.divergence(&self.fields[i][j][k]);
                        for &c in g.fluid_cells() {
                            r = r.max((d[c] - self.rhs[i][j][k][c]).to_f64_lossy().abs());
                        }
                    }
                }
                r
            })
            .collect()
    }

    /// Largest value on a non-fluid face (zero by construction).
    pub fn boundary_values(&self) -> f64 {
        let g = &self.grid;
        let mut m = 0.0f64;
        for f in self.fields.iter().flatten().flatten() {
            for (e, v) in f.iter().enumerate() {
                if g.kind(e) != FaceKind::Fluid {
                    m = m.max(v.to_f64_lossy().abs());
                }
            }
        }
        m
    }

    /// `Σ_k ‖φ(t_{k+1}) - φ(t_k)‖` for each `(i, j)`.
    pub fn total_variation(&self) -> [[f64; 2]; 2] {
        let g = &self.grid;
        let mut tv = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let f = &self.fields[i][j];
                tv[i][j] = f
                    .windows(2)
                    .map(|w| {
                        let d: Vec<T> = w[1].iter().zip(&w[0]).map(|(a, b)| *a - *b).collect();
                        g.l2_norm_sq(&d).to_f64_lossy().sqrt()
                    })
                    .sum();
            }
        }
        tv
    }

    pub fn max_abs(&self) -> f64 {
        self.fields.iter().flatten().flatten().flatten().fold(0.0f64, |m, v| m.max(v.to_f64_lossy().abs()))
    }
}

/// Minimum-norm solutions of `div φ = rhs` for a list of cell fields on one grid.
/// Divergence solves for a history of data; with obstacles present the solutions also
/// vanish tangentially on the walls (least gradient energy), otherwise they are the
/// gradient solutions.
pub fn bogovskii_fields<T: Real>(grid: &Arc<MacGrid>, rhs: &[Vec<T>], tol: f64) -> Result<Vec<Vec<T>>> {
    if grid.solid.iter().any(|&s| s) {
        let mut st = StokesSolver::new(grid.clone())?;
        rhs.iter().map(|g| st.bogovskii(g, tol)).collect()
    } else {
        let poisson = FluidPoisson::<T>::new(grid.clone())?;
        rhs.iter().map(|g| poisson.min_norm_divergence(g, tol)).collect()
    }
}

pub fn bogovskii_cell<T: Real>(traj: &[CorrectorTrajectory<T>; 2], kernel: &PermeabilityKernel) -> Result<BogovskiiCorrector<T>> {
    check_inputs(traj, kernel)?;
    let grid = traj[0].grid.clone();
    let yf = grid.fluid_measure();
    let mut rhs: [[Vec<Vec<T>>; 2]; 2] = Default::default();
    let mut fields: [[Vec<Vec<T>>; 2]; 2] = Default::default();
    for j in 0..2 {
        for k in 0..kernel.len() {
            let (uc, vc) = grid.cell_average(&traj[j].w[k]);
            for (i, wc) in [uc, vc].into_iter().enumerate() {
                let c = T::c(kernel.a[k][i][j] / yf);
                let g: Vec<T> = (0..grid.ncells())
                    .map(|cell| if grid.solid[cell] { T::zero() } else { c - wc[cell] })
                    .collect();
                rhs[i][j].push(g);
            }
        }
    }
    for i in 0..2 {
        for j in 0..2 {
            fields[i][j] = bogovskii_fields(&grid, &rhs[i][j], 1e-9)?;
        }
    }
    Ok(BogovskiiCorrector { grid, time: kernel.time.clone(), fields, rhs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_is_antisymmetric() {
        let grid = Arc::new(MacGrid::open(8, 8, 0.125, true));
        let time = TimeGrid::uniform(1.0, 1).unwrap();
        let b: Vec<f64> = (0..grid.nfaces()).map(|_| 0.0).collect();
        let fc = flux_potential(grid, time, [vec![b.clone(), b.clone()], vec![b.clone(), b]]).unwrap();
        for c in 0..64 {
            assert_eq!(fc.entry(1, 0, 0, 0, c) + fc.entry(0, 1, 0, 0, c), 0.0);
            assert_eq!(fc.entry(0, 0, 1, 0, c), 0.0);
        }
    }
}
