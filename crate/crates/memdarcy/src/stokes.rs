//! Implicit-Euler Stokes steps on a MAC grid, solved exactly in a discrete divergence-free
//! basis.
//!
//! Every discretely divergence-free face field that vanishes on non-fluid faces is the
//! discrete curl of a node potential `ψ`: `u = (ψ(i,j+1) - ψ(i,j))/h`,
//! `v = -(ψ(i+1,j) - ψ(i,j))/h`. Nodes joined by non-fluid faces share one value (one
//! unknown per obstacle, the outer boundary fixed at zero). On the periodic cell `ψ` may
//! jump across the seams; the two jumps are the mean fluxes and are extra unknowns.
//! A step minimizes the implicit-Euler energy in this basis with one sparse Cholesky
//! solve, and the pressure is recovered from the momentum residual.

use crate::error::Result;
use crate::linalg::{CsrMatrix, SparseCholesky, Triplets};
use crate::mac::{Comp, FaceKind, MacGrid};
use crate::poisson::FluidPoisson;
use crate::Real;
use std::sync::Arc;

/// Discrete curl from potential unknowns to fluid faces.
#[derive(Clone, Debug)]
pub struct StreamBasis<T> {
    pub curl: CsrMatrix<T>,
    pub coords: Vec<[f64; 2]>,
    /// Seam-jump unknowns (periodic cells only), eliminated last.
    pub jumps: Vec<usize>,
    /// Number of obstacle (hole) unknowns.
    pub holes: usize,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

impl<T: Real> StreamBasis<T> {
    pub fn new(grid: &MacGrid) -> Self {
        let (nx, ny, h) = (grid.nx, grid.ny, grid.h);
        let nnx = if grid.periodic { nx } else { nx + 1 };
        let nny = if grid.periodic { ny } else { ny + 1 };
        let node = |i: usize, j: usize| j * nnx + i;
        let ends = |f: usize| -> (usize, usize, bool) {
            let (c, i, j) = grid.face_ij(f);
            match c {
                Comp::U => {
                    let wrap = grid.periodic && j + 1 == ny;
                    (node(i, j), node(i, if wrap { 0 } else { j + 1 }), wrap)
                }
                Comp::V => {
                    let wrap = grid.periodic && i + 1 == nx;
                    (node(i, j), node(if wrap { 0 } else { i + 1 }, j), wrap)
                }
            }
        };
        let nn = nnx * nny;
        let mut parent: Vec<usize> = (0..nn).collect();
        let mut first_blocked = None;
        for f in 0..grid.nfaces() {
            if grid.kind(f) != FaceKind::Fluid {
                let (a, b, _) = ends(f);
                first_blocked.get_or_insert(a);
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
        let fixed = if grid.periodic { find(&mut parent, first_blocked.unwrap_or(0)) } else { find(&mut parent, 0) };
        let mut dof = vec![usize::MAX; nn];
        let mut sums: Vec<[f64; 3]> = Vec::new();
        let mut size = Vec::new();
        for v in 0..nn {
            let r = find(&mut parent, v);
            if r == fixed {
                continue;
            }
            if dof[r] == usize::MAX {
                dof[r] = sums.len();
                sums.push([0.0; 3]);
                size.push(0usize);
            }
            let d = dof[r];
            dof[v] = d;
            sums[d][0] += (v % nnx) as f64 * h;
            sums[d][1] += (v / nnx) as f64 * h;
            sums[d][2] += 1.0;
            size[d] += 1;
        }
        let holes = size.iter().filter(|&&s| s > 1).count();
        let mut coords: Vec<[f64; 2]> = sums.iter().map(|s| [s[0] / s[2], s[1] / s[2]]).collect();
        let nnode_dofs = coords.len();
        let mut jumps = Vec::new();
        if grid.periodic {
            jumps = vec![nnode_dofs, nnode_dofs + 1];
            coords.push([0.0, 0.0]);
            coords.push([0.0, 0.0]);
        }
        let ndof = coords.len();
        let ih = T::c(1.0 / h);
        let nfl = grid.fluid_faces().len();
        let mut t = Triplets::with_capacity(nfl, ndof, 3 * nfl);
        for (r, &f) in grid.fluid_faces().iter().enumerate() {
            let (a, b, wrap) = ends(f);
            let (c, _, _) = grid.face_ij(f);
            // u = (ψ_b - ψ_a)/h, v = -(ψ_b - ψ_a)/h, with ψ_b shifted by the seam jump
            let s = match c {
                Comp::U => ih,
                Comp::V => -ih,
            };
            if dof[b] != usize::MAX {
                t.push(r, dof[b], s);
            }
            if dof[a] != usize::MAX {
                t.push(r, dof[a], -s);
            }
            if wrap {
                let jump = match c {
                    Comp::U => nnode_dofs + 1,
                    Comp::V => nnode_dofs,
                };
                t.push(r, jump, s);
            }
        }
        Self { curl: t.to_csr(), coords, jumps, holes }
    }

    pub fn ndof(&self) -> usize {
        self.curl.ncols()
    }
}

/// Result of one implicit-Euler Stokes step.
#[derive(Clone, Debug)]
pub struct StokesStep<T> {
    /// Face velocities (zero on non-fluid faces).
    pub u: Vec<T>,
    /// Cell pressures, zero mean over the fluid cells.
    pub p: Vec<T>,
}

/// Exact implicit-Euler Stokes stepper for a fixed grid and viscosity.
#[derive(Clone, Debug)]
pub struct StokesSolver<T> {
    grid: Arc<MacGrid>,
    basis: StreamBasis<T>,
    q: CsrMatrix<T>,
    km: CsrMatrix<T>,
    kq: CsrMatrix<T>,
    chol: Option<SparseCholesky<T>>,
    coef: (f64, f64),
    poisson: FluidPoisson<T>,
    projector: Option<SparseCholesky<T>>,
    energy: Option<SparseCholesky<T>>,
}

impl<T: Real> StokesSolver<T> {
    pub fn new(grid: Arc<MacGrid>) -> Result<Self> {
        let basis = StreamBasis::<T>::new(&grid);
        let q = grid.gradient_energy::<T>();
        let ct = basis.curl.transpose();
        let km = ct.matmul(&basis.curl);
        let kq = ct.matmul(&q.matmul(&basis.curl));
        let poisson = FluidPoisson::new(grid.clone())?;
        Ok(Self { grid, basis, q, km, kq, chol: None, coef: (f64::NAN, f64::NAN), poisson, projector: None, energy: None })
    }

    pub fn grid(&self) -> &Arc<MacGrid> {
        &self.grid
    }

    pub fn poisson(&self) -> &FluidPoisson<T> {
        &self.poisson
    }

    pub fn basis(&self) -> &StreamBasis<T> {
        &self.basis
    }

    /// Nonzeros of the current velocity factor (0 before the first step).
    pub fn factor_nnz(&self) -> usize {
        self.chol.as_ref().map_or(0, |c| c.nnz_factor())
    }

    fn prepare(&mut self, dt: f64, nu: f64) -> Result<()> {
        if self.coef == (dt, nu) {
            return Ok(());
        }
        let h2 = self.grid.h * self.grid.h;
        let k = self.km.add_scaled(T::c(h2 / dt), &self.kq, T::c(nu));
        match &mut self.chol {
            Some(ch) => ch.refactor(&k)?,
            None => {
                if self.basis.ndof() > 0 {
                    self.chol = Some(SparseCholesky::new(&k, &self.basis.coords, &self.basis.jumps)?);
                }
            }
        }
        self.coef = (dt, nu);
        Ok(())
    }

    /// Discrete Bogovskii solution: among face fields with `div v = g` on fluid cells and
    /// `v = 0` on every non-fluid face, the one of least gradient energy `‖∇v‖²` (no-slip
    /// enters through the wall samples). Fails on grids where `Q` has constants in its kernel.
    pub fn bogovskii(&mut self, g: &[T], tol: f64) -> Result<Vec<T>> {
        let grid = self.grid.clone();
        let mut v = self.poisson.min_norm_divergence(g, tol)?;
        if self.basis.ndof() == 0 {
            return Ok(v);
        }
        if self.energy.is_none() {
            self.energy = Some(SparseCholesky::new(&self.kq, &self.basis.coords, &self.basis.jumps)?);
        }
        let ff = grid.fluid_faces();
        let vf: Vec<T> = ff.iter().map(|&f| v[f]).collect();
        let qv = self.q.mul_vec(&vf);
        let rhs: Vec<T> = self.basis.curl.mul_t_vec(&qv).into_iter().map(|x| -x).collect();
        let x = self.energy.as_ref().unwrap().solve(&rhs);
        let w = self.basis.curl.mul_vec(&x);
        for (k, &f) in ff.iter().enumerate() {
            v[f] += w[k];
        }
        Ok(v)
    }

    /// L² projection onto discretely divergence-free fields vanishing on non-fluid faces.
    pub fn project(&mut self, u: &[T]) -> Result<Vec<T>> {
        let grid = self.grid.clone();
        let mut out = vec![T::zero(); grid.nfaces()];
        if self.basis.ndof() == 0 {
            return Ok(out);
        }
        if self.projector.is_none() {
            self.projector = Some(SparseCholesky::new(&self.km, &self.basis.coords, &self.basis.jumps)?);
        }
        let ff = grid.fluid_faces();
        let uf: Vec<T> = ff.iter().map(|&f| u[f]).collect();
        let x = self.projector.as_ref().unwrap().solve(&self.basis.curl.mul_t_vec(&uf));
        let pu = self.basis.curl.mul_vec(&x);
        for (k, &f) in ff.iter().enumerate() {
            out[f] = pu[k];
        }
        Ok(out)
    }

    /// Advance `(u - u_prev)/dt - ν Δu + ∇p = f`, `div u = 0`, no-slip on walls.
    pub fn step(&mut self, u_prev: &[T], f: Option<&[T]>, dt: f64, nu: f64) -> Result<StokesStep<T>> {
        self.prepare(dt, nu)?;
        let grid = &self.grid;
        let h2 = T::c(grid.h * grid.h);
        let idt = T::c(1.0 / dt);
        let ff = grid.fluid_faces();
        let load: Vec<T> = ff
            .iter()
            .map(|&fc| h2 * (u_prev[fc] * idt + f.map_or(T::zero(), |f| f[fc])))
            .collect();
        let mut u = vec![T::zero(); grid.nfaces()];
        let mut uf = vec![T::zero(); ff.len()];
        if let Some(ch) = &self.chol {
            let rhs = self.basis.curl.mul_t_vec(&load);
            let x = ch.solve(&rhs);
            uf = self.basis.curl.mul_vec(&x);
            for (k, &fc) in ff.iter().enumerate() {
                u[fc] = uf[k];
            }
        }
        // momentum residual h² G p = load - (h²/dt) u - ν Q u
        let qu = self.q.mul_vec(&uf);
        let mut rho = vec![T::zero(); grid.nfaces()];
        let nu_t = T::c(nu);
        for (k, &fc) in ff.iter().enumerate() {
            rho[fc] = (load[k] - h2 * idt * uf[k] - nu_t * qu[k]) / h2;
        }
        let p = self.poisson.potential_of(&rho);
        Ok(StokesStep { u, p })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steps_are_divergence_free_with_holes() {
        let n = 12;
        let mut solid = vec![false; n * n];
        for j in 4..8 {
            for i in 4..8 {
                solid[j * n + i] = true;
            }
        }
        for periodic in [false, true] {
            let grid = Arc::new(MacGrid::new(n, n, 1.0 / n as f64, periodic, solid.clone()));
            let mut s = StokesSolver::<f64>::new(grid.clone()).unwrap();
            let u0 = grid.constant_field([1.0, 0.3]);
            let st = s.step(&u0, None, 0.01, 0.5).unwrap();
            assert!(grid.max_divergence(&st.u) < 1e-10);
            for f in 0..grid.nfaces() {
                if grid.kind(f) != FaceKind::Fluid {
                    assert_eq!(st.u[f], 0.0);
                }
            }
            assert!(grid.l2_norm_sq(&st.u) < grid.l2_norm_sq(&u0));
        }
    }

    #[test]
    fn bogovskii_is_energy_minimal() {
        let n = 12;
        let mut solid = vec![false; n * n];
        for j in 4..8 {
            for i in 5..8 {
                solid[j * n + i] = true;
            }
        }
        let grid = Arc::new(MacGrid::new(n, n, 1.0 / n as f64, false, solid));
        let mut s = StokesSolver::<f64>::new(grid.clone()).unwrap();
        let mut g: Vec<f64> = (0..n * n).map(|c| ((c * 13) % 7) as f64 - 3.0).collect();
        let m = grid.fluid_mean(&g);
        for &c in grid.fluid_cells() {
            g[c] -= m;
        }
        let v = s.bogovskii(&g, 1e-10).unwrap();
        let d = grid.divergence(&v);
        for &c in grid.fluid_cells() {
            assert!((d[c] - g[c]).abs() < 1e-9);
        }
        // Q-orthogonal to every discretely solenoidal field
        let ff = grid.fluid_faces();
        let vf: Vec<f64> = ff.iter().map(|&f| v[f]).collect();
        let r = s.basis.curl.mul_t_vec(&s.q.mul_vec(&vf));
        assert!(r.iter().all(|x| x.abs() < 1e-9), "{:e}", r.iter().fold(0.0f64, |a, &b| a.max(b.abs())));
        // and no larger in energy than the gradient solution
        let v0 = s.poisson.min_norm_divergence(&g, 1e-10).unwrap();
        assert!(grid.grad_norm_sq(&v) <= grid.grad_norm_sq(&v0));
    }
}
