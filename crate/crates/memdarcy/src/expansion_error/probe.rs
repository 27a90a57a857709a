//! Measured constants of the divergence equation on `Ω_ε`.

use crate::error::Result;
use crate::fine_scale::fine_grid;
use crate::geometry::PerforatedDomain;
use crate::stokes::StokesSolver;
use crate::Real;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BogovskiiProbe {
    pub eps: f64,
    /// `‖v‖ / (ε‖∇v‖)`; `None` when `v = 0`.
    pub poincare: Option<f64>,
    /// `ε‖∇v‖ / ‖g‖`; `None` when `g = 0`.
    pub stability: Option<f64>,
    pub div_residual: f64,
    pub trace: f64,
}

/// Solve `div v = g` in `Ω_ε`, `v = 0` on `∂Ω_ε`, with least gradient energy, and report
/// the two ratios. These depend on the chosen right inverse, not only on the domain.
pub fn bogovskii_estimate_probe<T: Real>(dom: &PerforatedDomain<T>, g: &[T]) -> Result<(BogovskiiProbe, Vec<T>)> {
    let grid = fine_grid(dom);
    let mut st = StokesSolver::<T>::new(grid.clone())?;
    let v = st.bogovskii(g, 1e-9)?;
    let nv = grid.l2_norm_sq(&v).to_f64_lossy().sqrt();
    let ngv = dom.eps * grid.grad_norm_sq(&v).to_f64_lossy().sqrt();
    let ng = grid.fluid_cells().iter().map(|&c| g[c].to_f64_lossy().powi(2)).sum::<f64>().sqrt() * grid.h;
    let probe = BogovskiiProbe {
        eps: dom.eps,
        poincare: (ngv > 0.0).then(|| nv / ngv),
        stability: (ng > 0.0).then(|| ngv / ng),
        div_residual: super::layer::divergence_residual(&grid, &v, g),
        trace: super::layer::trace_max(&grid, &v),
    };
    Ok((probe, v))
}

/// `g - ⨍_{Ω_ε} g` on the fluid cells of the fine grid for a function of position.
pub fn zero_mean_probe_data<T: Real>(dom: &PerforatedDomain<T>, f: impl Fn(f64, f64) -> f64) -> Vec<T> {
    let grid = fine_grid(dom);
    let mut g: Vec<T> = (0..grid.ncells())
        .map(|c| {
            if grid.solid[c] {
                T::zero()
            } else {
                let [x, y] = grid.cell_pos(c);
                T::c(f(x, y))
            }
        })
        .collect();
    let m = grid.fluid_mean(&g);
    for &c in grid.fluid_cells() {
        g[c] -= m;
    }
    g
}
