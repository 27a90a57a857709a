//! First-order two-scale expansion of the fine solution, its boundary-layer correction and
//! the error norms against the fine solver.
//!
//! Everything is evaluated on the fine grid: the cell correctors are read through
//! `y = x/ε`, the force enters through a separated representation
//! `F(x, t) ≈ Σ_r a_r(t) F_r(x)`, so every time convolution is done once on the cell.

pub mod convolution;
pub mod layer;
pub mod modes;
pub mod norms;
pub mod probe;
pub mod smoothing;

pub use convolution::{cell_face_map, centres_to_faces, corrector_convolution, flux_term, CorrectorKernels};
pub use layer::{assemble_j, conditional_average, LayerSources, LocalLayerSolver};
pub use modes::ForcingModes;
pub use norms::{min_over_constant, rate_fit, rate_fits, ErrorReport, RateFits};
pub use probe::{bogovskii_estimate_probe, BogovskiiProbe};
pub use smoothing::{generic_cutoff, Mollifier};

use crate::aux_correctors::BogovskiiCorrector;
use crate::cell_corrector::{CorrectorTrajectory, PermeabilityKernel};
use crate::error::{Error, Result};
use crate::fine_scale::{extend_pressure, fine_grid, EnergyHistory, FineSolver};
use crate::forcing::BodyForce;
use crate::geometry::{CutoffFunction, LayerDecomposition, PerforatedDomain};
use crate::mac::MacGrid;
use crate::stokes::StokesSolver;
use crate::Real;
use convolution::{mid2, mid22};
use modes::{bilinear, centred_gradient};
use norms::{face_diff_sq, gradient_error_sq, sample_plan};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Everything the expansion needs besides the fine solve itself.
pub struct ExpansionInputs<'a, T> {
    pub dom: &'a PerforatedDomain<T>,
    pub traj: &'a [CorrectorTrajectory<T>; 2],
    pub kernel: &'a PermeabilityKernel,
    pub phi: Option<&'a BogovskiiCorrector<T>>,
    pub modes: &'a ForcingModes<T>,
    /// `p₀` per node on the cells of an `n_macro × n_macro` grid.
    pub p0: &'a [Vec<T>],
    pub n_macro: usize,
    pub force: &'a BodyForce,
}

impl<T: Real> ExpansionInputs<'_, T> {
    fn check(&self) -> Result<(Arc<MacGrid>, Vec<u32>)> {
        let fine = fine_grid(self.dom);
        let map = cell_face_map(&fine, &self.traj[0].grid, self.dom.eps)?;
        if self.modes.n != self.dom.n || (self.modes.eps - self.dom.eps).abs() > 1e-12 {
            return Err(Error::Shape("force modes were built for another fine grid".into()));
        }
        if self.modes.time.t != self.kernel.time.t {
            return Err(Error::Shape("force modes and kernel use different time grids".into()));
        }
        if self.p0.len() != self.kernel.len() || self.p0.iter().any(|p| p.len() != self.n_macro * self.n_macro) {
            return Err(Error::Shape("p₀ history does not match the time grid or the macroscopic grid".into()));
        }
        Ok((fine, map))
    }
}

/// `p₀` at the fine cell centres by bilinear interpolation.
pub fn pressure_on_fine<T: Real>(p0: &[T], n_macro: usize, n: usize) -> Vec<T> {
    let v: Vec<f64> = p0.iter().map(|x| x.to_f64_lossy()).collect();
    let h = 1.0 / n as f64;
    (0..n * n)
        .map(|c| {
            let (x, y) = (((c % n) as f64 + 0.5) * h, ((c / n) as f64 + 0.5) * h);
            T::c(bilinear(&v, n_macro, x, y, |p, q, s| p + s * (q - p)))
        })
        .collect()
}

/// The fine solve together with the four error norms, accumulated node by node.
pub struct ExpansionOutcome {
    pub errors: ErrorReport,
    pub energy: EnergyHistory,
    /// `max_t max |div u_ε|`.
    pub max_divergence: f64,
}

pub fn run_error_norms<T: Real>(inp: &ExpansionInputs<'_, T>) -> Result<ExpansionOutcome> {
    let (fine, map) = inp.check()?;
    let dom = inp.dom;
    let eps = dom.eps;
    let modes = inp.modes;
    let kernels = CorrectorKernels::new(inp.traj, inp.kernel, None, &modes.a)?;
    let f_face: Vec<Vec<[T; 2]>> = modes.f.iter().map(|m| centres_to_faces(&fine, m, mid2)).collect();
    let g_face: Vec<Vec<[T; 2]>> = modes.g.iter().map(|m| centres_to_faces(&fine, m, mid2)).collect();
    let plan = sample_plan(&fine, &kernels.cell, &map, eps);
    let dt = modes.time.uniform_step()?;
    let h2 = fine.h * fine.h;
    let nf = fine.nfaces();

    let mut rep = ErrorReport { eps, ..Default::default() };
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    let (mut u_prev, mut e_prev) = (vec![T::zero(); nf], vec![T::zero(); nf]);
    let (mut ef, mut eg) = (vec![T::zero(); nf], vec![T::zero(); nf]);
    let mut max_div = 0.0f64;
    let mut solver = FineSolver::new(dom)?;
    let energy = solver.run(inp.force, &modes.time, |k, u, p| {
        if k == 0 {
            return Ok(());
        }
        max_div = max_div.max(fine.max_divergence(u).to_f64_lossy());
        corrector_convolution(&kernels, &fine, &map, &f_face, k, &mut ef);
        corrector_convolution(&kernels, &fine, &map, &g_face, k, &mut eg);
        rep.velocity += dt * face_diff_sq(&fine, u, &ef);
        rep.velocity_g += dt * face_diff_sq(&fine, u, &eg);
        rep.f_minus_g += dt * face_diff_sq(&fine, &ef, &eg);
        rep.velocity_scale += dt * fine.l2_norm_sq(u).to_f64_lossy();
        let kref: Vec<[&[T]; 2]> = (0..kernels.rank).map(|r| [kernels.w(k, r, 0), kernels.w(k, r, 1)]).collect();
        rep.gradient += dt * gradient_error_sq(&plan, u, &kref, &f_face);
        rep.gradient_g += dt * gradient_error_sq(&plan, u, &kref, &g_face);
        let idt = T::c(1.0 / dt);
        let du: Vec<T> = (0..nf).map(|f| ((u[f] - u_prev[f]) - (ef[f] - e_prev[f])) * idt).collect();
        rep.time_derivative += dt * fine.l2_norm_sq(&du).to_f64_lossy();
        let pt = extend_pressure(dom, p);
        let p0 = pressure_on_fine(&inp.p0[k], inp.n_macro, dom.n);
        for (a, b) in pt.iter().zip(&p0) {
            let d = (*a - *b).to_f64_lossy();
            s0 += dt * h2;
            s1 += dt * h2 * d;
            s2 += dt * h2 * d * d;
            rep.pressure_scale += dt * h2 * a.to_f64_lossy().powi(2);
        }
        u_prev.copy_from_slice(u);
        e_prev.copy_from_slice(&ef);
        Ok(())
    })?;
    let (pmin, c) = min_over_constant(s0, s1, s2);
    rep.pressure = pmin.sqrt();
    rep.pressure_shift = c;
    for v in [
        &mut rep.velocity,
        &mut rep.gradient,
        &mut rep.time_derivative,
        &mut rep.velocity_g,
        &mut rep.gradient_g,
        &mut rep.f_minus_g,
        &mut rep.velocity_scale,
        &mut rep.pressure_scale,
    ] {
        *v = v.sqrt();
    }
    rep.force_scale = (1..energy.t.len()).map(|k| dt * energy.forcing[k]).sum::<f64>().sqrt();
    Ok(ExpansionOutcome { errors: rep, energy, max_divergence: max_div })
}

/// Boundary-layer quantities over `(0, T)`; norms are `L²(0, T; L²)` with the right-endpoint
/// rule, gradient norms carry the factor `ε`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub eps: f64,
    pub xi_hat: f64,
    pub xi_hat_grad: f64,
    pub eta_hat: f64,
    pub eta_hat_grad: f64,
    pub xi: f64,
    pub xi_grad: f64,
    pub eta: f64,
    pub eta_grad: f64,
    /// `max |div ξ̂ - (J₂ + ⟨J₁⟩)|` and `max |div η̂ - (J₁ - ⟨J₁⟩)|`.
    pub div_residual_xi: f64,
    pub div_residual_eta: f64,
    /// Largest value on a non-fluid face of any corrector.
    pub trace: f64,
    /// `max |div V - div ξ̂ - div η̂|` and the same without `η̂`, restricted to `O_ε`.
    pub identity: f64,
    pub identity_without_eta: f64,
    /// `max_t |∫_{Ω_ε} (J₁ + J₂)|` and the scale `max_t ∫ |J₁| + |J₂|`.
    pub compatibility: f64,
    pub source_scale: f64,
    /// `max |mean of Π over a decomposition cell|`, `|∫ Π|` and `|∫ H|`.
    pub pi_cell_mean: f64,
    pub pi_integral: f64,
    pub h_integral: f64,
    /// Largest `|J₁|` outside `O_ε` (zero by construction).
    pub j1_outside: f64,
    /// `‖J₂ - four-term formula‖ / ‖J₂‖` over the whole run.
    pub j2_formula: f64,
    /// `‖J₁‖`, `‖J₂‖` in `L²(0, T; L²)`.
    pub j1: f64,
    pub j2: f64,
}

/// Stored layer fields (small runs only).
#[derive(Clone, Debug, Default)]
pub struct LayerFields<T> {
    pub xi_hat: Vec<Vec<T>>,
    pub eta_hat: Vec<Vec<T>>,
    pub xi: Vec<Vec<T>>,
    pub eta: Vec<Vec<T>>,
    pub sources: Vec<LayerSources<T>>,
    pub cond_avg: Vec<Vec<T>>,
}

pub struct LayerOptions {
    pub tol: f64,
    pub keep: bool,
    /// Leave `η̂` out (negative control); the identity residual then fails on `O_ε`.
    pub skip_eta: bool,
}

impl Default for LayerOptions {
    fn default() -> Self {
        Self { tol: 1e-9, keep: false, skip_eta: false }
    }
}

/// The boundary-layer correctors `ξ̂`, `η̂` node by node. Needs the Bogovskii corrector
/// `φ` and `ε ≤ 1/8` (the cut-off layer must fit).
pub fn run_boundary_layer<T: Real>(inp: &ExpansionInputs<'_, T>, opts: &LayerOptions) -> Result<(LayerReport, LayerFields<T>)> {
    let (fine, map) = inp.check()?;
    let dom = inp.dom;
    let eps = dom.eps;
    let n = dom.n;
    let phi = inp.phi.ok_or_else(|| Error::Config("boundary-layer correctors need the Bogovskii corrector".into()))?;
    let modes = inp.modes;
    let kernels = CorrectorKernels::new(inp.traj, inp.kernel, Some(phi), &modes.a)?;
    let psi = CutoffFunction::<T>::new(dom.domain, eps, n)?;
    let psi_face = layer::cutoff_on_faces(&psi, &fine);
    let decomp = LayerDecomposition::new(dom.domain, eps, n)?;
    let in_layer: Vec<bool> = decomp.owner.iter().map(|o| o.is_some()).collect();
    let g_face: Vec<Vec<[T; 2]>> = modes.g.iter().map(|m| centres_to_faces(&fine, m, mid2)).collect();
    let dg_face: Vec<Vec<[[T; 2]; 2]>> = modes.dg.iter().map(|m| centres_to_faces(&fine, m, mid22)).collect();
    // ∂_m ∂_i G_j at centres, stored [m][i][j]
    let d2g: Vec<Vec<[[[T; 2]; 2]; 2]>> = modes
        .dg
        .iter()
        .map(|d| {
            let by_i: [Vec<[[T; 2]; 2]>; 2] = [0, 1].map(|i| centred_gradient(&d.iter().map(|x| x[i]).collect::<Vec<_>>(), n));
            (0..n * n)
                .map(|c| {
                    let mut o = [[[T::zero(); 2]; 2]; 2];
                    for m in 0..2 {
                        for i in 0..2 {
                            o[m][i] = by_i[i][c][m];
                        }
                    }
                    o
                })
                .collect()
        })
        .collect();
    let dt = modes.time.uniform_step()?;
    let h2 = fine.h * fine.h;
    let nf = fine.nfaces();
    let e2 = eps * eps;
    let yf = kernels.fluid_fraction;
    let mut st = StokesSolver::<T>::new(fine.clone())?;
    let mut local = LocalLayerSolver::<T>::new(fine.h);
    let mut rep = LayerReport { eps, ..Default::default() };
    let mut fields = LayerFields::default();
    let (mut eg, mut fg) = (vec![T::zero(); nf], vec![T::zero(); nf]);
    let (mut xi_prev, mut eta_prev) = (vec![T::zero(); nf], vec![T::zero(); nf]);
    let (mut j2_num, mut j2_den) = (0.0, 0.0);
    let idt = T::c(1.0 / dt);
    for k in 1..modes.time.len() {
        corrector_convolution(&kernels, &fine, &map, &g_face, k, &mut eg);
        flux_term(&kernels, &fine, &map, &dg_face, eps, k, &mut fg);
        let ag: Vec<[T; 2]> = (0..n * n)
            .map(|c| {
                let mut s = [T::zero(); 2];
                for r in 0..kernels.rank {
                    let a = kernels.a(k, r);
                    let g = modes.g[r][c];
                    for p in 0..2 {
                        s[p] += T::c(a[p][0]) * g[0] + T::c(a[p][1]) * g[1];
                    }
                }
                s
            })
            .collect();
        let src = assemble_j(&fine, &psi, &psi_face, &eg, &fg, &ag);
        let (cavg, _) = conditional_average(&src.j1, &decomp, &fine);
        let mut rhs_xi = vec![T::zero(); n * n];
        let mut rhs_eta = vec![T::zero(); n * n];
        let (mut comp, mut scale, mut pi_int, mut h_int) = (0.0, 0.0, 0.0, 0.0);
        for &c in fine.fluid_cells() {
            rhs_xi[c] = src.j2[c] + cavg[c];
            rhs_eta[c] = src.j1[c] - cavg[c];
            let (a, b) = (src.j1[c].to_f64_lossy(), src.j2[c].to_f64_lossy());
            comp += h2 * (a + b);
            scale += h2 * (a.abs() + b.abs());
            pi_int += h2 * rhs_eta[c].to_f64_lossy();
            h_int += h2 * rhs_xi[c].to_f64_lossy();
            rep.j1 += dt * h2 * a * a;
            rep.j2 += dt * h2 * b * b;
            if !in_layer[c] {
                rep.j1_outside = rep.j1_outside.max(a.abs());
            }
        }
        rep.compatibility = rep.compatibility.max(comp.abs());
        rep.source_scale = rep.source_scale.max(scale);
        rep.pi_integral = rep.pi_integral.max(pi_int.abs());
        rep.h_integral = rep.h_integral.max(h_int.abs());
        let (_, pi_means) = conditional_average(&rhs_eta, &decomp, &fine);
        rep.pi_cell_mean = pi_means.iter().fold(rep.pi_cell_mean, |m, v| m.max(v.to_f64_lossy().abs()));

        let xi_hat = st.bogovskii(&rhs_xi, opts.tol)?;
        let eta_hat = if opts.skip_eta { vec![T::zero(); nf] } else { local.solve(&fine, &decomp, &rhs_eta, opts.tol)? };
        rep.div_residual_xi = rep.div_residual_xi.max(layer::divergence_residual(&fine, &xi_hat, &rhs_xi));
        if !opts.skip_eta {
            rep.div_residual_eta = rep.div_residual_eta.max(layer::divergence_residual(&fine, &eta_hat, &rhs_eta));
        }
        rep.trace = rep.trace.max(layer::trace_max(&fine, &xi_hat)).max(layer::trace_max(&fine, &eta_hat));
        let (id, abl) = layer::divergence_identity(&fine, &src.v, &xi_hat, &eta_hat, &in_layer);
        rep.identity = rep.identity.max(id);
        rep.identity_without_eta = rep.identity_without_eta.max(abl);

        let xi: Vec<T> = xi_hat.iter().zip(&xi_prev).map(|(a, b)| (*a - *b) * idt).collect();
        let eta: Vec<T> = eta_hat.iter().zip(&eta_prev).map(|(a, b)| (*a - *b) * idt).collect();
        let nrm = |v: &[T]| fine.l2_norm_sq(v).to_f64_lossy();
        let grd = |v: &[T]| e2 * fine.grad_norm_sq(v).to_f64_lossy();
        rep.xi_hat += dt * nrm(&xi_hat);
        rep.xi_hat_grad += dt * grd(&xi_hat);
        rep.eta_hat += dt * nrm(&eta_hat);
        rep.eta_hat_grad += dt * grd(&eta_hat);
        rep.xi += dt * nrm(&xi);
        rep.xi_grad += dt * grd(&xi);
        rep.eta += dt * nrm(&eta);
        rep.eta_grad += dt * grd(&eta);

        // the four-term formula for J₂ at the cell centres
        let (fx, fy) = fine.cell_average(&fg);
        let mut phic: Vec<[Vec<T>; 2]> = Vec::new();
        for r in 0..kernels.rank {
            for ij in 0..4 {
                let kf = kernels.phi(k, r, ij / 2, ij % 2).unwrap();
                let mut face = vec![T::zero(); nf];
                for &f in fine.fluid_faces() {
                    face[f] = kf[map[f] as usize];
                }
                let (a, b) = fine.cell_average(&face);
                phic.push([a, b]);
            }
        }
        for &c in fine.fluid_cells() {
            let (gp, ps) = (psi.grad[c], psi.psi[c]);
            let mut t = gp[0] * (ag[c][0] + fx[c]) + gp[1] * (ag[c][1] + fy[c]);
            for r in 0..kernels.rank {
                let a = kernels.a(k, r);
                let d = modes.dg[r][c];
                for i in 0..2 {
                    for j in 0..2 {
                        t += ps * T::c(a[i][j] / yf) * d[i][j];
                        let pc = &phic[r * 4 + 2 * i + j];
                        for m in 0..2 {
                            t += T::c(eps) * ps * pc[m][c] * d2g[r][c][m][i][j];
                        }
                    }
                }
            }
            let j2 = src.j2[c].to_f64_lossy();
            j2_num += (j2 - t.to_f64_lossy()).powi(2);
            j2_den += j2 * j2;
        }

        if opts.keep {
            fields.xi_hat.push(xi_hat.clone());
            fields.eta_hat.push(eta_hat.clone());
            fields.xi.push(xi);
            fields.eta.push(eta);
            fields.cond_avg.push(cavg);
            fields.sources.push(src);
        }
        xi_prev = xi_hat;
        eta_prev = eta_hat;
    }
    for v in [
        &mut rep.xi_hat,
        &mut rep.xi_hat_grad,
        &mut rep.eta_hat,
        &mut rep.eta_hat_grad,
        &mut rep.xi,
        &mut rep.xi_grad,
        &mut rep.eta,
        &mut rep.eta_grad,
        &mut rep.j1,
        &mut rep.j2,
    ] {
        *v = v.sqrt();
    }
    rep.j2_formula = if j2_den > 0.0 { (j2_num / j2_den).sqrt() } else { 0.0 };
    Ok((rep, fields))
}

impl LayerReport {
    /// `‖ξ̂‖ + ε‖∇ξ̂‖`.
    pub fn xi_size(&self) -> f64 {
        self.xi_hat + self.xi_hat_grad
    }
    /// `‖η̂‖ + ε‖∇η̂‖`.
    pub fn eta_size(&self) -> f64 {
        self.eta_hat + self.eta_hat_grad
    }
}
