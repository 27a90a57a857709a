//! Time-dependent cell correctors `(W_j, π_j)`, the permeability kernel `A(t)` and the
//! decay diagnostics.
//!
//! The initial field `e_j` has a nonzero normal trace on the obstacle, so it is not in the
//! discrete divergence-free space. Its projection `P e_j` carries the same implicit-Euler
//! evolution; the first step is taken from `P e_j`, which gives the same velocity and
//! leaves out the impulsive pressure at `t = 0`. The jump `|Y_f| I -> A(0+)` is kept
//! visible in the kernel.

use crate::error::{Error, Result};
use crate::geometry::CellGeometry;
use crate::mac::MacGrid;
use crate::quadrature::{fit_line, LineFit};
use crate::stokes::StokesSolver;
use crate::time::TimeGrid;
use crate::Real;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::sync::Arc;

/// Periodic MAC grid of the unit cell.
pub fn cell_grid<T: Real>(cell: &CellGeometry<T>) -> Arc<MacGrid> {
    let n = cell.n_cell;
    Arc::new(MacGrid::new(n, n, 1.0 / n as f64, true, cell.solid.clone()))
}

/// Corrector history for one direction.
#[derive(Clone, Debug)]
pub struct CorrectorTrajectory<T> {
    pub dir: usize,
    pub grid: Arc<MacGrid>,
    pub time: TimeGrid,
    /// `W_j(·, t_k)` on faces; `w[0] = e_j` on every face touching a fluid cell.
    pub w: Vec<Vec<T>>,
    /// `π_j(·, t_k)`, zero fluid mean; `pi[0]` is zero.
    pub pi: Vec<Vec<T>>,
    /// `P e_j`.
    pub projected_initial: Vec<T>,
    /// `max |div W|` over fluid cells per node (node 0 holds the value for `P e_j`).
    pub divergence: Vec<f64>,
    /// `‖W(t_k)‖²`.
    pub kinetic: Vec<f64>,
    /// `‖∇W(t_k)‖²` (node 0 holds the value for `P e_j`).
    pub dissipation: Vec<f64>,
    /// `‖P e_j‖²`.
    pub projected_kinetic: f64,
}

impl<T: Real> CorrectorTrajectory<T> {
    /// Per-step residuals `½‖W^n‖² - ½‖W^{n-1}‖² + Δt_n ‖∇W^n‖²`, with `W^0` replaced by
    /// `P e_j` in the first step. Implicit Euler makes each equal to `-½‖W^n - W^{n-1}‖²`.
    pub fn energy_residuals(&self) -> Vec<f64> {
        (1..self.time.len())
            .map(|n| {
                let prev = if n == 1 { self.projected_kinetic } else { self.kinetic[n - 1] };
                0.5 * self.kinetic[n] - 0.5 * prev + self.time.dt(n) * self.dissipation[n]
            })
            .collect()
    }

    /// Energy lost to the projection of the incompatible initial field.
    pub fn initial_projection_loss(&self) -> f64 {
        0.5 * (self.kinetic[0] - self.projected_kinetic)
    }

    pub fn max_divergence(&self) -> f64 {
        self.divergence[1..].iter().fold(0.0, |m, &d| m.max(d))
    }

    /// `‖∇W(t_k)‖`.
    pub fn gradient_norms(&self) -> Vec<f64> {
        self.dissipation.iter().map(|d| d.sqrt()).collect()
    }
}

/// Reusable solver for the cell problem on a fixed cell geometry.
pub struct CellSolver<T> {
    grid: Arc<MacGrid>,
    stokes: StokesSolver<T>,
}

impl<T: Real> CellSolver<T> {
    pub fn new(cell: &CellGeometry<T>) -> Result<Self> {
        let grid = cell_grid(cell);
        let stokes = StokesSolver::new(grid.clone())?;
        Ok(Self { grid, stokes })
    }

    pub fn grid(&self) -> &Arc<MacGrid> {
        &self.grid
    }

    fn unit(&self, j: usize) -> Vec<T> {
        let mut e = [T::zero(); 2];
        e[j] = T::one();
        self.grid.constant_field(e)
    }

    pub fn solve(&mut self, j: usize, time: &TimeGrid) -> Result<CorrectorTrajectory<T>> {
        if j > 1 {
            return Err(Error::Config(format!("direction index must be 0 or 1, got {j}")));
        }
        if time.len() < 2 {
            return Err(Error::Config("time grid needs at least one step".into()));
        }
        let grid = self.grid.clone();
        let w0 = self.unit(j);
        let pw0 = self.stokes.project(&w0)?;
        let nodes = time.len();
        let mut w = Vec::with_capacity(nodes);
        let mut pi = Vec::with_capacity(nodes);
        let mut divergence = vec![grid.max_divergence(&pw0).to_f64_lossy()];
        let mut kinetic = vec![grid.l2_norm_sq(&w0).to_f64_lossy()];
        let mut dissipation = vec![grid.grad_norm_sq(&pw0).to_f64_lossy()];
        let projected_kinetic = grid.l2_norm_sq(&pw0).to_f64_lossy();
        w.push(w0);
        pi.push(vec![T::zero(); grid.ncells()]);
        let mut prev = pw0.clone();
        for k in 1..nodes {
            let st = self.stokes.step(&prev, None, time.dt(k), 1.0)?;
            divergence.push(grid.max_divergence(&st.u).to_f64_lossy());
            kinetic.push(grid.l2_norm_sq(&st.u).to_f64_lossy());
            dissipation.push(grid.grad_norm_sq(&st.u).to_f64_lossy());
            prev = st.u.clone();
            w.push(st.u);
            pi.push(st.p);
        }
        Ok(CorrectorTrajectory {
            dir: j,
            grid,
            time: time.clone(),
            w,
            pi,
            projected_initial: pw0,
            divergence,
            kinetic,
            dissipation,
            projected_kinetic,
        })
    }

    /// The alternative corrector: zero initial data, constant forcing `e_j`.
    pub fn solve_forced(&mut self, j: usize, time: &TimeGrid) -> Result<Vec<Vec<T>>> {
        let e = self.unit(j);
        let mut out = vec![vec![T::zero(); self.grid.nfaces()]];
        for k in 1..time.len() {
            let st = self.stokes.step(&out[k - 1], Some(&e), time.dt(k), 1.0)?;
            out.push(st.u);
        }
        Ok(out)
    }
}

/// `W_j` for one direction.
pub fn solve_corrector<T: Real>(cell: &CellGeometry<T>, j: usize, time: &TimeGrid) -> Result<CorrectorTrajectory<T>> {
    CellSolver::new(cell)?.solve(j, time)
}

/// Both directions with one factorization.
pub fn solve_correctors<T: Real>(cell: &CellGeometry<T>, time: &TimeGrid) -> Result<[CorrectorTrajectory<T>; 2]> {
    let mut s = CellSolver::new(cell)?;
    let w1 = s.solve(0, time)?;
    let w2 = s.solve(1, time)?;
    Ok([w1, w2])
}

pub type Mat2 = [[f64; 2]; 2];

/// Sampled kernel `A(t_k)` with derivative samples.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PermeabilityKernel {
    pub time: TimeGrid,
    pub fluid_fraction: f64,
    pub a: Vec<Mat2>,
    /// Limit `A(0+)` (from `P e_j`), when known.
    pub a0_plus: Option<Mat2>,
    /// Centred differences on the (possibly graded) grid, one-sided at both ends.
    pub da: Vec<Mat2>,
    /// `∫|A'|` of the piecewise-linear interpolant (total variation, max entry).
    pub derivative_l1: f64,
}

fn mat_norm(m: &Mat2) -> f64 {
    m.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()))
}

fn sub(a: &Mat2, b: &Mat2) -> Mat2 {
    [[a[0][0] - b[0][0], a[0][1] - b[0][1]], [a[1][0] - b[1][0], a[1][1] - b[1][1]]]
}

/// Eigenvalues of the symmetric part, ascending.
pub fn sym_eigenvalues(m: &Mat2) -> [f64; 2] {
    let (a, d) = (m[0][0], m[1][1]);
    let b = 0.5 * (m[0][1] + m[1][0]);
    let mid = 0.5 * (a + d);
    let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    [mid - r, mid + r]
}

impl PermeabilityKernel {
    pub fn from_samples(time: TimeGrid, fluid_fraction: f64, a: Vec<Mat2>, a0_plus: Option<Mat2>) -> Result<Self> {
        if a.len() != time.len() {
            return Err(Error::Shape(format!("{} kernel samples for {} time nodes", a.len(), time.len())));
        }
        let n = a.len();
        let mut da = vec![[[0.0; 2]; 2]; n];
        if n >= 2 {
            for k in 0..n {
                for i in 0..2 {
                    for j in 0..2 {
                        da[k][i][j] = if k == 0 {
                            (a[1][i][j] - a[0][i][j]) / time.dt(1)
                        } else if k == n - 1 {
                            (a[k][i][j] - a[k - 1][i][j]) / time.dt(k)
                        } else {
                            let (h1, h2) = (time.dt(k), time.dt(k + 1));
                            (h1 * h1 * a[k + 1][i][j] - h2 * h2 * a[k - 1][i][j] + (h2 * h2 - h1 * h1) * a[k][i][j])
                                / (h1 * h2 * (h1 + h2))
                        };
                    }
                }
            }
        }
        let mut derivative_l1 = 0.0;
        for k in 1..n {
            derivative_l1 += mat_norm(&sub(&a[k], &a[k - 1]));
        }
        Ok(Self { time, fluid_fraction, a, a0_plus, da, derivative_l1 })
    }

    /// `A_ij(t_k) = ∫_{Y_f} W_j · e_i`.
    pub fn from_trajectories<T: Real>(traj: &[CorrectorTrajectory<T>]) -> Result<Self> {
        if traj.len() != 2 || traj[0].dir != 0 || traj[1].dir != 1 {
            return Err(Error::Config("the kernel needs the trajectories for both directions in order".into()));
        }
        if traj[0].time != traj[1].time {
            return Err(Error::Config("corrector trajectories use different time grids".into()));
        }
        if traj[0].grid.nfaces() != traj[1].grid.nfaces() || traj[0].grid.solid != traj[1].grid.solid {
            return Err(Error::Config("corrector trajectories use different cell grids".into()));
        }
        let grid = &traj[0].grid;
        let integ = |u: &[T]| grid.fluid_integral(u).map(|v| v.to_f64_lossy());
        let col = |k: usize| [integ(&traj[0].w[k]), integ(&traj[1].w[k])];
        let a: Vec<Mat2> = (0..traj[0].time.len())
            .map(|k| {
                let c = col(k);
                [[c[0][0], c[1][0]], [c[0][1], c[1][1]]]
            })
            .collect();
        let p = [integ(&traj[0].projected_initial), integ(&traj[1].projected_initial)];
        let a0p = [[p[0][0], p[1][0]], [p[0][1], p[1][1]]];
        Self::from_samples(traj[0].time.clone(), grid.fluid_measure(), a, Some(a0p))
    }

    /// `A(t) = I` on the given grid.
    pub fn identity(time: TimeGrid) -> Self {
        let a = vec![[[1.0, 0.0], [0.0, 1.0]]; time.len()];
        Self::from_samples(time, 1.0, a, Some([[1.0, 0.0], [0.0, 1.0]])).expect("shapes agree")
    }

    /// `A(t) = e^{-rate t} I`.
    pub fn exponential(time: TimeGrid, rate: f64) -> Self {
        let a = time.t.iter().map(|&t| {
            let v = (-rate * t).exp();
            [[v, 0.0], [0.0, v]]
        });
        Self::from_samples(time.clone(), 1.0, a.collect(), Some([[1.0, 0.0], [0.0, 1.0]])).expect("shapes agree")
    }

    /// Named synthetic kernel: `identity` or `exp:<rate>`.
    pub fn synthetic(name: &str, time: TimeGrid) -> Result<Self> {
        if name == "identity" {
            return Ok(Self::identity(time));
        }
        if let Some(r) = name.strip_prefix("exp:") {
            let rate: f64 = r.parse().map_err(|_| Error::Config(format!("kernel: bad rate in {name:?}")))?;
            if !(rate >= 0.0 && rate.is_finite()) {
                return Err(Error::Config(format!("kernel: rate must be nonnegative, got {rate}")));
            }
            return Ok(Self::exponential(time, rate));
        }
        Err(Error::Config(format!("kernel: unknown synthetic kernel {name:?}")))
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn trace(&self, k: usize) -> f64 {
        self.a[k][0][0] + self.a[k][1][1]
    }

    /// `max_k |A - Aᵀ|`.
    pub fn symmetry_defect(&self) -> f64 {
        self.a.iter().fold(0.0f64, |m, a| m.max((a[0][1] - a[1][0]).abs()))
    }

    /// `max |A(0) - |Y_f| I|`.
    pub fn initial_defect(&self) -> f64 {
        let y = self.fluid_fraction;
        mat_norm(&sub(&self.a[0], &[[y, 0.0], [0.0, y]]))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.a.iter().map(|a| sym_eigenvalues(a)[0]).fold(f64::INFINITY, f64::min)
    }

    pub fn trace_nonincreasing(&self) -> bool {
        (1..self.len()).all(|k| self.trace(k) <= self.trace(k - 1))
    }

    /// True when every sample is diagonal with equal entries up to `tol`.
    pub fn is_isotropic(&self, tol: f64) -> bool {
        self.a.iter().all(|a| a[0][1].abs() <= tol && a[1][0].abs() <= tol && (a[0][0] - a[1][1]).abs() <= tol)
    }

    /// True when every sample is diagonal up to `tol`.
    pub fn is_diagonal(&self, tol: f64) -> bool {
        self.a.iter().all(|a| a[0][1].abs() <= tol && a[1][0].abs() <= tol)
    }

    /// Linear fit of `log tr A(t)` on `[t0, t1]`.
    pub fn log_trace_fit(&self, t0: f64, t1: f64) -> Result<LineFit> {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (k, &t) in self.time.t.iter().enumerate() {
            if t >= t0 - 1e-12 && t <= t1 + 1e-12 {
                let tr = self.trace(k);
                if tr <= 0.0 {
                    return Err(Error::Solver(format!("tr A({t}) = {tr} is not positive")));
                }
                x.push(t);
                y.push(tr.ln());
            }
        }
        if x.len() < 3 {
            return Err(Error::Config(format!("only {} kernel nodes in [{t0}, {t1}]", x.len())));
        }
        Ok(fit_line(&x, &y))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,A11,A12,A21,A22\n");
        for (k, a) in self.a.iter().enumerate() {
            let _ = writeln!(s, "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}", self.time.t[k], a[0][0], a[0][1], a[1][0], a[1][1]);
        }
        s
    }

    /// Parse the CSV written by [`PermeabilityKernel::to_csv`]. The time grid must match
    /// `time`; `|Y_f|` is read off `A(0)`.
    pub fn from_csv(text: &str, time: TimeGrid) -> Result<Self> {
        let mut a = Vec::new();
        let mut ts = Vec::new();
        for (ln, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let v: Vec<f64> = line
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("kernel csv line {}: {e}", ln + 1)))?;
            if v.len() != 5 {
                return Err(Error::Config(format!("kernel csv line {}: expected 5 columns", ln + 1)));
            }
            ts.push(v[0]);
            a.push([[v[1], v[2]], [v[3], v[4]]]);
        }
        if ts.len() != time.len() || ts.iter().zip(&time.t).any(|(x, y)| (x - y).abs() > 1e-9 * time.horizon) {
            return Err(Error::Config("kernel csv time grid does not match the configured grid".into()));
        }
        let y = 0.5 * (a[0][0][0] + a[0][1][1]);
        Self::from_samples(time, y, a, None)
    }
}

/// Early-time and long-time decay measurements.
#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    /// Fitted `σ` in `‖∇W(t)‖ ~ t^{-σ}` per direction; `None` when `∇W ≡ 0`.
    pub sigma: [Option<f64>; 2],
    pub sigma_window: (f64, f64),
    pub sigma_r2: [Option<f64>; 2],
    /// `(α, ∫ t^α ‖∂_t W‖², ∫ t^α ‖π‖²)` summed over both directions.
    pub weighted: Vec<(f64, f64, f64)>,
    pub trace_fit: Option<LineFit>,
}

impl DecayReport {
    pub fn describe_sigma(&self) -> String {
        self.sigma
            .iter()
            .map(|s| s.map_or("flat".to_string(), |v| format!("{v:.4}")))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// `∫_a^b t^α dt`.
fn power_integral(a: f64, b: f64, alpha: f64) -> f64 {
    (b.powf(alpha + 1.0) - a.powf(alpha + 1.0)) / (alpha + 1.0)
}

/// Early-time exponent fit window: nodes with `t ∈ [lo, hi]`. The default takes `lo` at
/// the diffusive time of one cell (`h²`, below which the wall layer is not resolved) and
/// stops at `T/10` or a quarter of the fitted exponential decay time, whichever is first.
pub fn decay_diagnostics<T: Real>(
    traj: &[CorrectorTrajectory<T>],
    kernel: &PermeabilityKernel,
    window: Option<(f64, f64)>,
) -> Result<DecayReport> {
    let time = &traj[0].time;
    let tenth = time.horizon / 10.0;
    let early = time.t.iter().filter(|&&t| t <= tenth + 1e-12).count();
    if early < 8 {
        return Err(Error::Config(format!("decay diagnostics need 8 nodes in [0, T/10], the grid has {early}")));
    }
    let trace_fit = if kernel.is_isotropic(1e-10) && (kernel.trace(kernel.len() - 1) - kernel.trace(0)).abs() < 1e-10 {
        None
    } else {
        Some(kernel.log_trace_fit(time.horizon / 4.0, time.horizon)?)
    };
    let h = traj[0].grid.h;
    let hi = match &trace_fit {
        Some(f) if f.slope < 0.0 => tenth.min(0.25 / -f.slope),
        _ => tenth,
    };
    let (lo, hi) = window.unwrap_or((h * h, hi));
    let mut sigma = [None, None];
    let mut sigma_r2 = [None, None];
    for (d, tr) in traj.iter().enumerate() {
        let g = tr.gradient_norms();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for k in 1..time.len() {
            let t = time.t[k];
            if t >= lo && t <= hi && g[k] > 1e-12 {
                x.push(t.ln());
                y.push(g[k].ln());
            }
        }
        if x.len() >= 3 {
            let f = fit_line(&x, &y);
            sigma[d] = Some(-f.slope);
            sigma_r2[d] = Some(f.r2);
        }
    }
    let mut weighted = Vec::new();
    for alpha in [0.5, 0.8, 1.0] {
        let (mut dw, mut pp) = (0.0, 0.0);
        for tr in traj {
            let grid = &tr.grid;
            for k in 1..time.len() {
                let dt = time.dt(k);
                let prev = if k == 1 { &tr.projected_initial } else { &tr.w[k - 1] };
                let diff: Vec<T> = tr.w[k].iter().zip(prev).map(|(a, b)| (*a - *b) / T::c(dt)).collect();
                let wint = power_integral(time.t[k - 1], time.t[k], alpha);
                dw += wint * grid.l2_norm_sq(&diff).to_f64_lossy();
                pp += wint * grid.cell_norm_sq(&tr.pi[k]).to_f64_lossy();
            }
        }
        weighted.push((alpha, dw, pp));
    }
    Ok(DecayReport { sigma, sigma_window: (lo, hi), sigma_r2, weighted, trace_fit })
}

/// Discrepancy between the time derivative of the forced corrector and `W_j`.
#[derive(Clone, Debug, Serialize)]
pub struct SemigroupReport {
    pub dir: usize,
    pub dt: f64,
    /// `‖(w^n - w^{n-1})/Δt - W^n‖` per node `n ≥ 1` (exact identity of the scheme).
    pub backward: Vec<f64>,
    /// `‖(w^{n+1} - w^{n-1})/(2Δt) - W^n‖ / ‖W^n‖` at interior nodes (first order).
    pub centered_relative: Vec<(f64, f64)>,
    /// Space-time relative centred discrepancy over `t ≥ T/4`.
    pub late_relative: f64,
}

pub fn verify_semigroup_relation<T: Real>(cell: &CellGeometry<T>, j: usize, time: &TimeGrid) -> Result<SemigroupReport> {
    let dt = time.uniform_step()?;
    let mut s = CellSolver::new(cell)?;
    let traj = s.solve(j, time)?;
    let w = s.solve_forced(j, time)?;
    let grid = s.grid().clone();
    let diff_norm = |a: &[T], b: &[T]| -> f64 {
        let d: Vec<T> = a.iter().zip(b).map(|(x, y)| *x - *y).collect();
        grid.l2_norm_sq(&d).to_f64_lossy().sqrt()
    };
    let mut backward = Vec::new();
    for n in 1..time.len() {
        let d: Vec<T> = w[n].iter().zip(&w[n - 1]).map(|(a, b)| (*a - *b) / T::c(dt)).collect();
        backward.push(diff_norm(&d, &traj.w[n]));
    }
    let mut centered_relative = Vec::new();
    let (mut num, mut den) = (0.0, 0.0);
    for n in 1..time.len() - 1 {
        let d: Vec<T> = w[n + 1].iter().zip(&w[n - 1]).map(|(a, b)| (*a - *b) / T::c(2.0 * dt)).collect();
        let e = diff_norm(&d, &traj.w[n]);
        let wn = grid.l2_norm_sq(&traj.w[n]).to_f64_lossy().sqrt();
        centered_relative.push((time.t[n], if wn > 0.0 { e / wn } else { e }));
        if time.t[n] >= time.horizon / 4.0 - 1e-12 {
            num += e * e;
            den += wn * wn;
        }
    }
    let late_relative = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
    Ok(SemigroupReport { dir: j, dt, backward, centered_relative, late_relative })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ObstacleShape;

    #[test]
    fn trivial_cell_is_constant() {
        let cell = CellGeometry::<f64>::new(ObstacleShape::Square, 0.0, 8).unwrap();
        let time = TimeGrid::graded(1.0, 8, 2.0).unwrap();
        let tr = solve_correctors(&cell, &time).unwrap();
        let k = PermeabilityKernel::from_trajectories(&tr).unwrap();
        for a in &k.a {
            assert!((a[0][0] - 1.0).abs() < 1e-12 && (a[1][1] - 1.0).abs() < 1e-12 && a[0][1].abs() < 1e-12);
        }
    }

    #[test]
    fn centred_derivative_is_exact_on_quadratics() {
        let time = TimeGrid::graded(1.0, 6, 2.0).unwrap();
        let a: Vec<Mat2> = time.t.iter().map(|t| [[t * t, 0.0], [0.0, 1.0]]).collect();
        let k = PermeabilityKernel::from_samples(time.clone(), 1.0, a, None).unwrap();
        for i in 1..6 {
            assert!((k.da[i][0][0] - 2.0 * time.t[i]).abs() < 1e-12);
        }
    }
}
