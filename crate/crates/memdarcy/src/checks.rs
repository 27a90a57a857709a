//! The acceptance checks run by `verify`. Each check reports the measured quantity next to
//! its threshold.

use crate::aux_correctors::{bogovskii_cell, flux_corrector};
use crate::cell_corrector::{solve_correctors, verify_semigroup_relation, PermeabilityKernel};
use crate::config::RunConfig;
use crate::darcy_memory::{macro_grid, solve_homogenized, HomogenizedOptions};
use crate::error::Result;
use crate::forcing::{BodyForce, TimeProfile};
use crate::geometry::CellGeometry;
use crate::mac::{Comp, FaceKind};
use crate::pipeline::{cell_stage, SweepReport};
use crate::poisson::FluidPoisson;
use crate::time::TimeGrid;
use serde::Serialize;
use std::time::Instant;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub id: u8,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(id: u8, name: &str, pass: bool, detail: String) -> Self {
        Self { id, name: name.into(), pass, detail }
    }

    pub fn line(&self) -> String {
        format!("[{}] {:>2} {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.id, self.name, self.detail)
    }
}

/// Kernel structure on the graded grid, with the cell-stage wall time.
pub fn kernel_structure(cfg: &RunConfig) -> Result<Check> {
    let start = Instant::now();
    let st = cell_stage::<f64>(cfg, &cfg.kernel_time()?, false)?;
    let secs = start.elapsed().as_secs_f64();
    let k = &st.kernel;
    let t = cfg.time.horizon;
    let fit = k.log_trace_fit(t / 4.0, t)?;
    let pass = k.initial_defect() <= 1e-8
        && k.symmetry_defect() <= 1e-6
        && k.min_eigenvalue() > 0.0
        && fit.slope < 0.0
        && fit.r2 >= 0.99
        && secs <= 120.0;
    Ok(Check::new(
        1,
        "kernel structure",
        pass,
        format!(
            "|A(0)-|Y_f|I| = {:.1e}, asym = {:.1e}, min eig = {:.4}, log tr A slope {:.3} (R² {:.5}), {secs:.1} s",
            k.initial_defect(),
            k.symmetry_defect(),
            k.min_eigenvalue(),
            fit.slope,
            fit.r2
        ),
    ))
}

/// Correctors, kernel, flux corrector and Bogovskii corrector of the empty cell.
pub fn trivial_cell(cfg: &RunConfig) -> Result<Check> {
    let cell = CellGeometry::<f64>::new(cfg.geometry.shape, 0.0, cfg.geometry.n_cell)?;
    let time = TimeGrid::graded(cfg.time.horizon, cfg.time.steps.min(32), cfg.time.gamma)?;
    let traj = solve_correctors(&cell, &time)?;
    let mut w_err = 0.0f64;
    for (j, tr) in traj.iter().enumerate() {
        let mut e = [0.0; 2];
        e[j] = 1.0;
        let want = tr.grid.constant_field(e);
        for w in &tr.w {
            w_err = w.iter().zip(&want).fold(w_err, |m, (a, b)| m.max((a - b).abs()));
        }
    }
    let k = PermeabilityKernel::from_trajectories(&traj)?;
    let a_err = k.a.iter().flatten().flatten().zip([1.0, 0.0, 0.0, 1.0].iter().cycle()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let phi = bogovskii_cell(&traj, &k)?.max_abs();
    let flux = flux_corrector(&traj, &k)?.max_abs();
    let worst = w_err.max(a_err).max(phi).max(flux);
    Ok(Check::new(
        2,
        "trivial cell",
        worst <= 1e-8,
        format!("|W-e_j| = {w_err:.1e}, |A-I| = {a_err:.1e}, |φ| = {phi:.1e}, |Φ| = {flux:.1e}"),
    ))
}

/// Strict kinetic-energy decay and first-order summed energy residuals (graded grid).
pub fn corrector_energy(cfg: &RunConfig) -> Result<Check> {
    let cell = cfg.cell_geometry::<f64>()?;
    let mut sums = Vec::new();
    let mut monotone = true;
    for m in [cfg.time.steps, 2 * cfg.time.steps] {
        let time = TimeGrid::graded(cfg.time.horizon, m, cfg.time.gamma)?;
        let traj = solve_correctors(&cell, &time)?;
        monotone &= traj.iter().all(|t| t.kinetic.windows(2).all(|w| w[1] < w[0]));
        sums.push(traj.iter().map(|t| t.energy_residuals().iter().map(|r| r.abs()).sum::<f64>()).fold(0.0, f64::max));
    }
    let ratio = sums[0] / sums[1];
    Ok(Check::new(
        3,
        "corrector energy",
        monotone && ratio >= 1.5,
        format!("Σ|residual| = {:.3e} → {:.3e} under Δt halving (ratio {ratio:.2}), strictly decreasing: {monotone}", sums[0], sums[1]),
    ))
}

/// Contraction on the configured run, the gradient-force balance and the isotropic oracle.
pub fn fixed_point(cfg: &RunConfig) -> Result<Check> {
    let time = cfg.sweep_time()?;
    let st = cell_stage::<f64>(cfg, &time, false)?;
    let grid = macro_grid(cfg.sweep.n_macro);
    let opts = HomogenizedOptions { tol: cfg.tolerance.homogenized, ..Default::default() };
    let sol = solve_homogenized(&st.kernel, grid.clone(), &cfg.forcing.history::<f64>(&grid, &time.t), &opts)?;
    let ratio = sol.max_contraction_ratio();

    let grad = BodyForce { curl: 0.0, grad: 1.0, profile: TimeProfile::Constant };
    let g = solve_homogenized(&st.kernel, grid.clone(), &grad.history::<f64>(&grid, &time.t), &opts)?;
    let q = grad.potential_cells::<f64>(&grid);
    let qm = grid.fluid_mean(&q);
    let u_max = g.u.iter().map(|u| grid.l2_norm_sq(u).sqrt()).fold(0.0, f64::max);
    let p_err = g.p.iter().flat_map(|p| p.iter().zip(&q).map(|(a, b)| (a - (b - qm)).abs())).fold(0.0, f64::max);

    let iso = PermeabilityKernel::exponential(time.clone(), 4.0);
    let base: Vec<f64> = (0..grid.nfaces())
        .map(|f| {
            if grid.kind(f) != FaceKind::Fluid {
                return 0.0;
            }
            let [x, y] = grid.face_pos(f);
            match grid.face_ij(f).0 {
                Comp::U => (2.0 * x + y).sin() + x * y * y,
                Comp::V => (3.0 * y).cos() * x - y * y * y,
            }
        })
        .collect();
    let prof = TimeProfile::Sine { omega: 2.0 };
    let hist: Vec<Vec<f64>> = time.t.iter().map(|&t| base.iter().map(|v| v * prof.value(t)).collect()).collect();
    let s = solve_homogenized(&iso, grid.clone(), &hist, &opts)?;
    let (oracle, _) = FluidPoisson::<f64>::new(grid.clone())?.solve(&grid.divergence(&base));
    let iso_err = s
        .p
        .iter()
        .zip(&time.t)
        .flat_map(|(p, &t)| p.iter().zip(&oracle).map(move |(a, b)| (a - prof.value(t) * b).abs()))
        .fold(0.0, f64::max);
    Ok(Check::new(
        4,
        "fixed-point solver",
        ratio <= 0.6 && u_max <= 1e-8 && p_err <= 1e-8 && iso_err <= 1e-6,
        format!("max ratio {ratio:.3}, ∇q force: ‖u₀‖ = {u_max:.1e}, |p₀-q| = {p_err:.1e}; isotropic vs Poisson {iso_err:.1e}"),
    ))
}

/// First-order shrinkage of the late semigroup discrepancy under Δt halving.
pub fn semigroup(cfg: &RunConfig) -> Result<Check> {
    let cell = cfg.cell_geometry::<f64>()?;
    let m = cfg.time.steps.max(8);
    let mut late = Vec::new();
    for k in [m / 2, m, 2 * m] {
        late.push(verify_semigroup_relation(&cell, 0, &TimeGrid::uniform(cfg.time.horizon, k)?)?.late_relative);
    }
    let r: Vec<f64> = late.windows(2).map(|w| w[0] / w[1]).collect();
    Ok(Check::new(
        10,
        "semigroup relation",
        r.iter().all(|&x| x >= 1.6),
        format!("late discrepancy {:.3e}, {:.3e}, {:.3e} (ratios {:.2}, {:.2})", late[0], late[1], late[2], r[0], r[1]),
    ))
}

/// Criteria read off a finished sweep.
pub fn sweep_checks(report: &SweepReport) -> Vec<Check> {
    let tol = report.config.tolerance.divergence;
    let mut out = Vec::new();

    let phi = report.shared.as_ref().and_then(|s| s.phi_max_divergence);
    let layers: Vec<_> = report.results.iter().filter_map(|r| r.layer.as_ref()).collect();
    let div = layers.iter().map(|l| l.div_residual_xi.max(l.div_residual_eta)).fold(phi.unwrap_or(0.0), f64::max);
    let compat = layers.iter().map(|l| l.compatibility / l.source_scale.max(1e-300)).fold(0.0, f64::max);
    let pi = layers.iter().map(|l| l.pi_cell_mean / l.source_scale.max(1e-300)).fold(0.0, f64::max);
    out.push(Check::new(
        5,
        "divergence machinery",
        phi.is_some() && !layers.is_empty() && div <= 1e-6 && compat <= 10.0 * tol && pi <= 10.0 * tol,
        format!("max div residual {div:.1e}, compatibility {compat:.1e}, Π cell means {pi:.1e} (relative), {} layer runs", layers.len()),
    ));

    match report.probe_spread {
        Some([a, b]) => out.push(Check::new(
            6,
            "Bogovskii ε-uniformity",
            a <= 2.0 && b <= 2.0,
            format!("spread of ‖v‖/(ε‖∇v‖) {a:.3}, of ε‖∇v‖/‖g‖ {b:.3}"),
        )),
        None => out.push(Check::new(6, "Bogovskii ε-uniformity", false, "probe ratios undefined".into())),
    }

    match &report.rates {
        Some(r) => {
            out.push(Check::new(
                7,
                "convergence rate",
                r.gradient.slope >= 0.4 && r.velocity.slope >= 0.4,
                format!("gradient slope {:.3}, velocity slope {:.3}", r.gradient.slope, r.velocity.slope),
            ));
            out.push(Check::new(
                8,
                "pressure rate",
                r.pressure.slope >= 0.4,
                format!("pressure slope {:.3} (R² {:.3})", r.pressure.slope, r.pressure.r2),
            ));
        }
        None => {
            out.push(Check::new(7, "convergence rate", false, "fewer than 3 ε".into()));
            out.push(Check::new(8, "pressure rate", false, "fewer than 3 ε".into()));
        }
    }

    let need = 2f64.powf(0.4);
    let ok = !report.layer_ratios.is_empty() && report.layer_ratios.iter().all(|r| r[0] >= need && r[1] >= need);
    let txt: Vec<String> = report.layer_ratios.iter().map(|r| format!("ξ̂ {:.2}, η̂ {:.2}", r[0], r[1])).collect();
    out.push(Check::new(
        9,
        "boundary-layer scaling",
        ok,
        if txt.is_empty() { "no layer pairs".into() } else { format!("{} (need {need:.3})", txt.join("; ")) },
    ));
    out
}
