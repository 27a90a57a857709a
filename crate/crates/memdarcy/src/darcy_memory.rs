//! Darcy's law with memory: `u₀ = A ∗ (f - ∇p₀)`, `div u₀ = 0`, `u₀ · n = 0`.
//!
//! On the uniform grid the velocity is the right-endpoint sum
//! `u₀^n = Δt Σ_{k=1}^{n} A(t_k) F^{n+1-k}` with `F = f - ∇p₀`, the sum the implicit-Euler
//! fine problem produces. Differencing `div u₀^n - div u₀^{n-1} = 0` gives
//!
//! `div[A(t₁) ∇p^n] = div[A(t₁) f^n + Σ_{k≥2} (A(t_k) - A(t_{k-1})) F^{n+1-k}]`,
//!
//! the discrete form of `L p = div[A(0) f + A' ∗ F]`. The leading operator uses `A(t₁)`:
//! the corrector's initial field is not divergence-free, so `A` jumps at `t = 0` and the
//! first kernel increment is not small. The memory part is resolved by Picard iteration
//! on windows short enough that the discrete `∫|A'|` stays inside the contraction budget.

use crate::cell_corrector::{Mat2, PermeabilityKernel};
use crate::error::{Error, Result};
use crate::mac::{FaceKind, MacGrid};
use crate::poisson::FluidPoisson;
use crate::time::TimeGrid;
use crate::Real;
use serde::Serialize;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum InitialGuess {
    /// Each window starts from the solution without in-window memory.
    Predictor,
    /// Each window starts from `p = 0` (used to observe the contraction).
    Zero,
}

#[derive(Clone, Debug)]
pub struct HomogenizedOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Target contraction factor `C₁ ∫_window |A'|`.
    pub budget: f64,
    pub initial_guess: InitialGuess,
    /// Override the window length (in nodes).
    pub window: Option<usize>,
}

impl Default for HomogenizedOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50, budget: 0.25, initial_guess: InitialGuess::Predictor, window: None }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WindowReport {
    /// First and last node of the window.
    pub start: usize,
    pub end: usize,
    pub iterations: usize,
    /// Relative updates `‖∇(p_i - p_{i-1})‖ / ‖∇p_i‖` over the window.
    pub updates: Vec<f64>,
    /// Successive update ratios.
    pub ratios: Vec<f64>,
    /// `C₁ ∫_window |A'|` (the a priori contraction bound).
    pub bound: f64,
}

impl WindowReport {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().fold(0.0, |m, &r| m.max(r))
    }
}

#[derive(Clone, Debug)]
pub struct HomogenizedSolution<T> {
    pub grid: Arc<MacGrid>,
    pub time: TimeGrid,
    /// `p₀(·, t_k)`, zero mean.
    pub p: Vec<Vec<T>>,
    /// `u₀(·, t_k)` on faces.
    pub u: Vec<Vec<T>>,
    pub windows: Vec<WindowReport>,
    /// Measured `‖G L⁻¹ D‖`.
    pub c1: f64,
    /// Diagonal of `A(t₁)`.
    pub leading: [f64; 2],
}

impl<T: Real> HomogenizedSolution<T> {
    pub fn max_contraction_ratio(&self) -> f64 {
        self.windows.iter().map(|w| w.max_ratio()).fold(0.0, f64::max)
    }
}

/// Diagonal entries of every kernel sample; off-diagonal kernels are rejected.
fn diagonal_kernel(kernel: &PermeabilityKernel) -> Result<Vec<[f64; 2]>> {
    let scale = kernel.a.iter().flatten().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    for (k, a) in kernel.a.iter().enumerate() {
        if a[0][1].abs() > 1e-10 * scale || a[1][0].abs() > 1e-10 * scale {
            return Err(Error::Config(format!(
                "kernel has off-diagonal entries at t = {} ({:.3e}); only diagonal kernels are supported",
                kernel.time.t[k], a[0][1]
            )));
        }
    }
    Ok(kernel.a.iter().map(|a: &Mat2| [a[0][0], a[1][1]]).collect())
}

/// Open (non-periodic, all fluid) grid of the unit square.
pub fn macro_grid(n: usize) -> Arc<MacGrid> {
    Arc::new(MacGrid::open(n, n, 1.0 / n as f64, false))
}

/// Face field `Σ c ⊙ x` with the diagonal coefficient picked by the face component.
fn axpy_diag<T: Real>(grid: &MacGrid, out: &mut [T], c: [f64; 2], x: &[T]) {
    let (cu, cv) = (T::c(c[0]), T::c(c[1]));
    let nu = grid.nu();
    for (f, (o, &v)) in out.iter_mut().zip(x).enumerate() {
        *o += if f < nu { cu } else { cv } * v;
    }
}

fn relative_update<T: Real>(grid: &MacGrid, new: &[Vec<T>], old: &[Vec<T>], floor: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (a, b) in new.iter().zip(old) {
        let d: Vec<T> = a.iter().zip(b).map(|(x, y)| *x - *y).collect();
        num += grid.l2_norm_sq(&grid.gradient(&d)).to_f64_lossy();
        den += grid.l2_norm_sq(&grid.gradient(a)).to_f64_lossy();
    }
    num.sqrt() / den.sqrt().max(floor)
}

/// `‖G L⁻¹ D‖` by power iteration (the discrete Neumann-solve constant).
pub fn neumann_constant<T: Real>(grid: &MacGrid, op: &FluidPoisson<T>, iters: usize) -> f64 {
    let mut v: Vec<T> = (0..grid.nfaces())
        .map(|f| if grid.kind(f) == FaceKind::Fluid { T::c(((f * 7919) % 104729) as f64 / 104729.0 - 0.5) } else { T::zero() })
        .collect();
    let mut lam = 0.0;
    for _ in 0..iters {
        let nv = grid.l2_norm_sq(&v).to_f64_lossy().sqrt();
        if nv == 0.0 {
            return 0.0;
        }
        for x in v.iter_mut() {
            *x /= T::c(nv);
        }
        let (p, _) = op.solve(&grid.divergence(&v));
        let w = grid.gradient(&p);
        lam = grid.l2_norm_sq(&w).to_f64_lossy().sqrt();
        v = w;
    }
    lam
}

/// Solve for `p₀` (and `u₀`) given face samples of `f` at every node of `time`.
pub fn solve_homogenized<T: Real>(
    kernel: &PermeabilityKernel,
    grid: Arc<MacGrid>,
    force: &[Vec<T>],
    opts: &HomogenizedOptions,
) -> Result<HomogenizedSolution<T>> {
    let time = kernel.time.clone();
    time.uniform_step()?;
    let m = time.steps;
    if force.len() != time.len() {
        return Err(Error::Shape(format!("{} force samples for {} nodes", force.len(), time.len())));
    }
    if kernel.initial_defect() > 1e-8 * kernel.fluid_fraction.max(1.0) {
        return Err(Error::Config(format!(
            "kernel violates A(0) = |Y_f| I (defect {:.3e})",
            kernel.initial_defect()
        )));
    }
    if !kernel.derivative_l1.is_finite() {
        return Err(Error::Config("kernel derivative is not integrable".into()));
    }
    let a = diagonal_kernel(kernel)?;
    let lead = a[1];
    let op = FluidPoisson::<T>::weighted(grid.clone(), lead)?;
    let c1 = neumann_constant(&grid, &op, 30);
    // increments ΔA_k = A(t_k) - A(t_{k-1}), k >= 2
    let mut da = vec![[0.0; 2]; m + 1];
    for k in 2..=m {
        da[k] = [a[k][0] - a[k - 1][0], a[k][1] - a[k - 1][1]];
    }
    let inc = |k: usize| da[k][0].abs().max(da[k][1].abs());
    let window = match opts.window {
        Some(w) if w >= 1 => w,
        Some(_) => return Err(Error::Config("homogenized.window must be at least 1".into())),
        None => {
            let mut w = 1;
            let mut acc = 0.0;
            while w < m {
                let next = acc + inc(w + 1);
                if c1 * next > opts.budget {
                    break;
                }
                acc = next;
                w += 1;
            }
            w
        }
    };
    let nf = grid.nfaces();
    let boundary_free = |v: &mut Vec<T>| {
        for (f, x) in v.iter_mut().enumerate() {
            if grid.kind(f) != FaceKind::Fluid {
                *x = T::zero();
            }
        }
    };
    let fnorm = force.iter().map(|f| grid.l2_norm_sq(f).to_f64_lossy()).sum::<f64>().sqrt();
    let floor = 1e-14 * fnorm.max(1e-300);
    let solve_node = |b: &[T]| -> Result<Vec<T>> {
        let d = grid.divergence(b);
        let mean = grid.fluid_mean(&d).to_f64_lossy().abs();
        let scale = d.iter().fold(0.0f64, |s, v| s.max(v.to_f64_lossy().abs()));
        if mean > 1e-8 * (1.0 + scale) {
            return Err(Error::Compatibility(format!("Neumann data has mean {mean:.3e}")));
        }
        let (p, _) = op.solve(&d);
        Ok(p)
    };
    let mut f_in: Vec<Vec<T>> = force.to_vec();
    for v in f_in.iter_mut() {
        boundary_free(v);
    }
    let mut p: Vec<Vec<T>> = vec![vec![T::zero(); grid.ncells()]; m + 1];
    // gradients of accepted pressures
    let mut gp: Vec<Vec<T>> = vec![vec![T::zero(); nf]; m + 1];
    {
        let mut b = vec![T::zero(); nf];
        axpy_diag(&grid, &mut b, lead, &f_in[0]);
        p[0] = solve_node(&b)?;
        gp[0] = grid.gradient(&p[0]);
    }
    let mut windows = Vec::new();
    let mut start = 1;
    while start <= m {
        let end = (start + window - 1).min(m);
        let bound = c1 * (2..=(end - start + 1)).map(inc).sum::<f64>();
        // fixed part: A(t₁) f^n + Σ_k ΔA_k f^{n+1-k} - Σ_{k: n+1-k < start} ΔA_k ∇p^{n+1-k}
        let mut fixed: Vec<Vec<T>> = Vec::with_capacity(end - start + 1);
        for n in start..=end {
            let mut b = vec![T::zero(); nf];
            axpy_diag(&grid, &mut b, lead, &f_in[n]);
            for k in 2..=n {
                let mi = n + 1 - k;
                axpy_diag(&grid, &mut b, da[k], &f_in[mi]);
                if mi < start {
                    axpy_diag(&grid, &mut b, [-da[k][0], -da[k][1]], &gp[mi]);
                }
            }
            fixed.push(b);
        }
        let mut cur: Vec<Vec<T>> = match opts.initial_guess {
            InitialGuess::Zero => vec![vec![T::zero(); grid.ncells()]; end - start + 1],
            InitialGuess::Predictor => fixed.iter().map(|b| solve_node(b)).collect::<Result<_>>()?,
        };
        let mut updates = Vec::new();
        let mut ratios = Vec::new();
        let mut above = 0;
        let mut converged = false;
        for _ in 0..opts.max_iter {
            let grads: Vec<Vec<T>> = cur.iter().map(|q| grid.gradient(q)).collect();
            let mut next = Vec::with_capacity(cur.len());
            for (i, n) in (start..=end).enumerate() {
                let mut b = fixed[i].clone();
                for mi in start..n {
                    let k = n + 1 - mi;
                    axpy_diag(&grid, &mut b, [-da[k][0], -da[k][1]], &grads[mi - start]);
                }
                next.push(solve_node(&b)?);
            }
            let upd = relative_update(&grid, &next, &cur, floor);
            if let Some(&prev) = updates.last() {
                let r: f64 = if prev > 0.0 { upd / prev } else { 0.0 };
                ratios.push(r);
                if r >= 1.0 {
                    above += 1;
                    if above >= 3 {
                        return Err(Error::NonContraction { window: windows.len(), ratio: r });
                    }
                } else {
                    above = 0;
                }
            }
            updates.push(upd);
            cur = next;
            if upd < opts.tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Convergence { iterations: opts.max_iter, history: updates });
        }
        for (i, n) in (start..=end).enumerate() {
            gp[n] = grid.gradient(&cur[i]);
            p[n] = std::mem::take(&mut cur[i]);
        }
        windows.push(WindowReport { start, end, iterations: updates.len(), updates, ratios, bound });
        start = end + 1;
    }
    let u = velocity_from_pressure(kernel, &grid, force, &p, crate::volterra::Rule::RightEndpoint)?;
    Ok(HomogenizedSolution { grid, time, p, u, windows, c1, leading: lead })
}

/// `F = f - ∇p` on fluid faces, zero on the boundary (Neumann closure `∂p/∂n = f · n`).
pub fn effective_force<T: Real>(grid: &MacGrid, f: &[T], p: &[T]) -> Vec<T> {
    let g = grid.gradient(p);
    (0..grid.nfaces()).map(|e| if grid.kind(e) == FaceKind::Fluid { f[e] - g[e] } else { T::zero() }).collect()
}

/// `u₀ = A ∗ (f - ∇p₀)` with the requested quadrature.
pub fn velocity_from_pressure<T: Real>(
    kernel: &PermeabilityKernel,
    grid: &MacGrid,
    force: &[Vec<T>],
    p: &[Vec<T>],
    rule: crate::volterra::Rule,
) -> Result<Vec<Vec<T>>> {
    let dt = kernel.time.uniform_step()?;
    let a = diagonal_kernel(kernel)?;
    let n = kernel.len();
    if force.len() != n || p.len() != n {
        return Err(Error::Shape("force, pressure and kernel must share the time grid".into()));
    }
    let big_f: Vec<Vec<T>> = force.iter().zip(p).map(|(f, q)| effective_force(grid, f, q)).collect();
    let mut u = vec![vec![T::zero(); grid.nfaces()]; n];
    for (t, ut) in u.iter_mut().enumerate().skip(1) {
        match rule {
            crate::volterra::Rule::RightEndpoint => {
                for mi in 1..=t {
                    let k = t + 1 - mi;
                    axpy_diag(grid, ut, [dt * a[k][0], dt * a[k][1]], &big_f[mi]);
                }
            }
            crate::volterra::Rule::Trapezoid => {
                for mi in 0..=t {
                    let w = if mi == 0 || mi == t { 0.5 * dt } else { dt };
                    let k = t - mi;
                    axpy_diag(grid, ut, [w * a[k][0], w * a[k][1]], &big_f[mi]);
                }
            }
        }
    }
    Ok(u)
}

/// Per-node residuals of `div u₀ = 0` (interior cells) and `u₀ · n = 0` (boundary faces).
#[derive(Clone, Debug, Serialize)]
pub struct HomogenizedResiduals {
    pub divergence: Vec<f64>,
    pub normal_flux: Vec<f64>,
}

impl HomogenizedResiduals {
    pub fn max_divergence(&self) -> f64 {
        self.divergence.iter().fold(0.0, |m, &v| m.max(v))
    }
    pub fn max_normal_flux(&self) -> f64 {
        self.normal_flux.iter().fold(0.0, |m, &v| m.max(v))
    }
}

pub fn check_homogenized<T: Real>(grid: &MacGrid, u: &[Vec<T>]) -> HomogenizedResiduals {
    let mut divergence = Vec::with_capacity(u.len());
    let mut normal_flux = Vec::with_capacity(u.len());
    for ut in u {
        let mut flux = 0.0f64;
        for f in 0..grid.nfaces() {
            if grid.kind(f) != FaceKind::Fluid {
                flux = flux.max(ut[f].to_f64_lossy().abs());
            }
        }
        let d = grid.divergence(ut);
        divergence.push(grid.fluid_cells().iter().fold(0.0f64, |m, &c| m.max(d[c].to_f64_lossy().abs())));
        normal_flux.push(flux);
    }
    HomogenizedResiduals { divergence, normal_flux }
}

/// `‖∇p₀‖_{L²(0,T;L²)}` and `‖p₀‖_{L²(0,T;L²)}` by the right-endpoint rule.
pub fn pressure_norms<T: Real>(grid: &MacGrid, time: &TimeGrid, p: &[Vec<T>]) -> (f64, f64) {
    let (mut g, mut v) = (0.0, 0.0);
    for k in 1..time.len() {
        let dt = time.dt(k);
        g += dt * grid.l2_norm_sq(&grid.gradient(&p[k])).to_f64_lossy();
        v += dt * grid.cell_norm_sq(&p[k]).to_f64_lossy();
    }
    (g.sqrt(), v.sqrt())
}
