//! The ε-scale problem `∂_t u - ε² Δu + ∇p = f`, `div u = 0` in `Ω_ε`, `u = 0` on `∂Ω_ε`,
//! `u(0) = 0`, and the extensions of its velocity and pressure to `Ω`.

use crate::error::Result;
use crate::forcing::BodyForce;
use crate::geometry::PerforatedDomain;
use crate::mac::{FaceKind, MacGrid};
use crate::stokes::StokesSolver;
use crate::time::TimeGrid;
use crate::Real;
use serde::Serialize;
use std::fmt::Write as _;
use std::sync::Arc;

/// MAC grid of `Ω_ε` (open box with the obstacle mask).
pub fn fine_grid<T: Real>(dom: &PerforatedDomain<T>) -> Arc<MacGrid> {
    Arc::new(MacGrid::new(dom.n, dom.n, dom.h(), false, dom.solid.clone()))
}

/// Per-node energy bookkeeping.
#[derive(Clone, Debug, Default, Serialize)]
pub struct EnergyHistory {
    pub t: Vec<f64>,
    /// `‖u(t_k)‖²`
    pub kinetic: Vec<f64>,
    /// `ε² ‖∇u(t_k)‖²`
    pub dissipation: Vec<f64>,
    /// `‖f(t_k)‖²`
    pub forcing: Vec<f64>,
}

impl EnergyHistory {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,kinetic,dissipation\n");
        for k in 0..self.t.len() {
            let _ = writeln!(s, "{:.12e},{:.12e},{:.12e}", self.t[k], self.kinetic[k], self.dissipation[k]);
        }
        s
    }

    /// `(sup_t ‖u‖² + ε² ∫‖∇u‖²) / ‖f‖²_{L²(0,T;L²)}`, right-endpoint in time.
    pub fn energy_constant(&self) -> f64 {
        let sup = self.kinetic.iter().fold(0.0f64, |m, &v| m.max(v));
        let (mut diss, mut f) = (0.0, 0.0);
        for k in 1..self.t.len() {
            let dt = self.t[k] - self.t[k - 1];
            diss += dt * self.dissipation[k];
            f += dt * self.forcing[k];
        }
        if f == 0.0 {
            return 0.0;
        }
        (sup + diss) / f
    }

    /// `max_t ‖u‖ / (ε‖∇u‖)` over nodes with nonzero velocity.
    pub fn poincare_constant(&self) -> f64 {
        self.kinetic
            .iter()
            .zip(&self.dissipation)
            .filter(|(_, &d)| d > 0.0)
            .map(|(&k, &d)| (k / d).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Streaming fine-scale solver: each node is handed to an observer and dropped.
pub struct FineSolver<T> {
    pub grid: Arc<MacGrid>,
    pub eps: f64,
    stokes: StokesSolver<T>,
}

impl<T: Real> FineSolver<T> {
    pub fn new(dom: &PerforatedDomain<T>) -> Result<Self> {
        let grid = fine_grid(dom);
        let stokes = StokesSolver::new(grid.clone())?;
        Ok(Self { grid, eps: dom.eps, stokes })
    }

    /// Run on a uniform grid; `observe(k, u, p)` sees every node, starting with `u = 0`.
    pub fn run<F>(&mut self, force: &BodyForce, time: &TimeGrid, mut observe: F) -> Result<EnergyHistory>
    where
        F: FnMut(usize, &[T], &[T]) -> Result<()>,
    {
        force.validate()?;
        let dt = time.uniform_step()?;
        let grid = self.grid.clone();
        let [curl, grad] = force.spatial_parts::<T>(&grid);
        let nu = self.eps * self.eps;
        let mut hist = EnergyHistory::default();
        let mut u = vec![T::zero(); grid.nfaces()];
        let p0 = vec![T::zero(); grid.ncells()];
        let sample = |t: f64| -> Vec<T> {
            let s = force.profile.value(t);
            let (a, b) = (T::c(force.curl * s), T::c(force.grad * s));
            curl.iter().zip(&grad).map(|(&x, &y)| a * x + b * y).collect()
        };
        let f0 = sample(0.0);
        hist.t.push(0.0);
        hist.kinetic.push(0.0);
        hist.dissipation.push(0.0);
        hist.forcing.push(grid.l2_norm_sq(&f0).to_f64_lossy());
        observe(0, &u, &p0)?;
        for k in 1..time.len() {
            let f = sample(time.t[k]);
            let st = self.stokes.step(&u, Some(&f), dt, nu)?;
            u = st.u;
            hist.t.push(time.t[k]);
            hist.kinetic.push(grid.l2_norm_sq(&u).to_f64_lossy());
            hist.dissipation.push(nu * grid.grad_norm_sq(&u).to_f64_lossy());
            hist.forcing.push(grid.l2_norm_sq(&f).to_f64_lossy());
            observe(k, &u, &st.p)?;
        }
        Ok(hist)
    }
}

/// Complete fine-scale history (small grids).
#[derive(Clone, Debug)]
pub struct FineScaleSolution<T> {
    pub eps: f64,
    pub grid: Arc<MacGrid>,
    pub time: TimeGrid,
    pub u: Vec<Vec<T>>,
    /// Zero mean over `Ω_ε`.
    pub p: Vec<Vec<T>>,
    pub energy: EnergyHistory,
}

impl<T: Real> FineScaleSolution<T> {
    pub fn max_divergence(&self) -> f64 {
        self.u.iter().map(|u| self.grid.max_divergence(u).to_f64_lossy()).fold(0.0, f64::max)
    }
}

pub fn solve_fine<T: Real>(dom: &PerforatedDomain<T>, force: &BodyForce, time: &TimeGrid) -> Result<FineScaleSolution<T>> {
    let mut solver = FineSolver::new(dom)?;
    let (mut u, mut p) = (Vec::new(), Vec::new());
    let energy = solver.run(force, time, |_, uk, pk| {
        u.push(uk.to_vec());
        p.push(pk.to_vec());
        Ok(())
    })?;
    Ok(FineScaleSolution { eps: dom.eps, grid: solver.grid, time: time.clone(), u, p, energy })
}

/// Velocity extended by zero to all faces of the open box grid of `Ω`.
pub fn extend_velocity<T: Real>(grid: &MacGrid, u: &[T]) -> Vec<T> {
    (0..grid.nfaces()).map(|f| if grid.kind(f) == FaceKind::Fluid { u[f] } else { T::zero() }).collect()
}

/// Pressure extension: `p` on fluid cells, and inside each obstacle the mean of `p` over
/// the fluid part of its ε-cell.
pub fn extend_pressure<T: Real>(dom: &PerforatedDomain<T>, p: &[T]) -> Vec<T> {
    let n = dom.n;
    let nc = dom.cell.n_cell;
    let mut out = p.to_vec();
    for &[zi, zj] in &dom.kept {
        let (mut s, mut cnt) = (T::zero(), 0usize);
        for j in zj * nc..(zj + 1) * nc {
            for i in zi * nc..(zi + 1) * nc {
                if !dom.solid[j * n + i] {
                    s += p[j * n + i];
                    cnt += 1;
                }
            }
        }
        let m = s / T::from_usize_lossy(cnt.max(1));
        for j in zj * nc..(zj + 1) * nc {
            for i in zi * nc..(zi + 1) * nc {
                if dom.solid[j * n + i] {
                    out[j * n + i] = m;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CellGeometry, Domain, ObstacleShape};

    #[test]
    fn zero_force_stays_at_rest() {
        let cell = CellGeometry::<f64>::new(ObstacleShape::Square, 0.25, 16).unwrap();
        let dom = PerforatedDomain::build(Domain::unit_square(), &cell, 0.125, 2.0, None).unwrap();
        let time = TimeGrid::uniform(0.5, 3).unwrap();
        let sol = solve_fine(&dom, &BodyForce::zero(), &time).unwrap();
        assert!(sol.u.iter().flatten().all(|&v| v == 0.0));
        assert!(sol.p.iter().flatten().all(|&v| v.abs() < 1e-14));
    }
}
