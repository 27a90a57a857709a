//! Error norms of the first-order expansion and the log-log rate fits.

use crate::error::{Error, Result};
use crate::mac::{FaceKind, MacGrid, SampleKind};
use crate::quadrature::{fit_line, LineFit};
use crate::Real;
use serde::{Deserialize, Serialize};

/// `(S0, S1, S2) = (Σw, Σw d, Σw d²)` → `min_c Σ w (d - c)²`, attained at `c = S1/S0`.
pub fn min_over_constant(s0: f64, s1: f64, s2: f64) -> (f64, f64) {
    if s0 <= 0.0 {
        return (0.0, 0.0);
    }
    let c = s1 / s0;
    ((s2 - s1 * c).max(0.0), c)
}

/// Per-ε error norms over `(0, T)` (right-endpoint rule in time).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub eps: f64,
    /// `‖u_ε - W(·/ε) ∗ F‖`
    pub velocity: f64,
    /// `‖ε∇u_ε - ∇_y W(·/ε) ∗ F‖`
    pub gradient: f64,
    /// `‖∂_t u_ε - ∂_t (W(·/ε) ∗ F)‖`
    pub time_derivative: f64,
    /// `inf_c ‖p̃_ε - p₀ - c‖` over `Ω × (0, T)`
    pub pressure: f64,
    /// The minimizing constant.
    pub pressure_shift: f64,
    /// Velocity and gradient norms with `G` in place of `F`.
    pub velocity_g: f64,
    pub gradient_g: f64,
    /// `‖(W(·/ε) ∗ F) - (W(·/ε) ∗ G)‖`.
    pub f_minus_g: f64,
    /// `‖u_ε‖`, `‖p̃_ε‖` and `‖f‖` for scale.
    pub velocity_scale: f64,
    pub pressure_scale: f64,
    pub force_scale: f64,
}

/// One gradient sample of the fine grid together with the cell faces it reads.
#[derive(Clone, Copy, Debug)]
pub struct SamplePlan {
    pub a: usize,
    /// Fluid partner face of `u`, if any.
    pub b: Option<usize>,
    pub cell_a: usize,
    pub cell_b: usize,
    /// Scale of the `u` difference and of the corrector difference (`ε/h` or `2ε/h`).
    pub cu: f64,
    pub ce: f64,
    pub weight: f64,
}

/// Pair every fine gradient sample with the matching difference on the periodic cell.
pub fn sample_plan(fine: &MacGrid, cell: &MacGrid, map: &[u32], eps: f64) -> Vec<SamplePlan> {
    let h = fine.h;
    let e = eps / h;
    fine.samples()
        .iter()
        .map(|s| {
            let cell_a = map[s.a] as usize;
            let (b, cell_b, cu, ce) = match (s.kind, s.b) {
                (SampleKind::Pair, Some(g)) => (Some(g), map[g] as usize, e, e),
                (SampleKind::OneSided, Some(g)) => (None, map[g] as usize, e, e),
                (SampleKind::Ghost, Some(g)) => (None, map[g] as usize, 2.0 * e, 2.0 * e),
                (_, None) => {
                    // across ∂Ω: the corrector is still periodic there
                    let (comp, i, j) = fine.face_ij(s.a);
                    let along = if s.dir == 0 { i } else { j };
                    let plus = along > 0;
                    let (_, ci, cj) = cell.face_ij(cell_a);
                    let nc = cell.nx as isize;
                    let d = if plus { 1 } else { -1 };
                    let (mut x, mut y) = (ci as isize, cj as isize);
                    if s.dir == 0 {
                        x = (x + d).rem_euclid(nc);
                    } else {
                        y = (y + d).rem_euclid(nc);
                    }
                    let nb = match comp {
                        crate::mac::Comp::U => cell.uidx(x as usize, y as usize),
                        crate::mac::Comp::V => cell.vidx(x as usize, y as usize),
                    };
                    (None, nb, 2.0 * e, e)
                }
            };
            SamplePlan { a: s.a, b, cell_a, cell_b, cu, ce, weight: fine.sample_weight(s) }
        })
        .collect()
}

/// `Σ_w [ε∇u - ∇_y W ∗ S]²` over the samples, with `S` frozen at the sample.
/// `k[r][j]` are the convolved correctors on the cell faces and `s_face[r][f]` the mode
/// values on the fine faces.
pub fn gradient_error_sq<T: Real>(plan: &[SamplePlan], u: &[T], k: &[[&[T]; 2]], s_face: &[Vec<[T; 2]>]) -> f64 {
    let half = T::c(0.5);
    let mut acc = 0.0;
    for p in plan {
        let du = match p.b {
            Some(b) => u[b] - u[p.a],
            None => -u[p.a],
        };
        let mut dk = T::zero();
        for (kr, sr) in k.iter().zip(s_face) {
            let s = match p.b {
                Some(b) => [half * (sr[p.a][0] + sr[b][0]), half * (sr[p.a][1] + sr[b][1])],
                None => sr[p.a],
            };
            for j in 0..2 {
                dk += (kr[j][p.cell_b] - kr[j][p.cell_a]) * s[j];
            }
        }
        let d = T::c(p.cu) * du - T::c(p.ce) * dk;
        acc += p.weight * d.to_f64_lossy().powi(2);
    }
    acc
}

/// Fluid-face L² norm squared of `a - b`.
pub fn face_diff_sq<T: Real>(grid: &MacGrid, a: &[T], b: &[T]) -> f64 {
    let h2 = grid.h * grid.h;
    grid.fluid_faces().iter().map(|&f| (a[f] - b[f]).to_f64_lossy().powi(2)).sum::<f64>() * h2
}

/// Values of a face field on the non-fluid faces are ignored by every norm here.
pub fn zero_off_fluid<T: Real>(grid: &MacGrid, v: &mut [T]) {
    for (f, x) in v.iter_mut().enumerate() {
        if grid.kind(f) != FaceKind::Fluid {
            *x = T::zero();
        }
    }
}

/// Least-squares slopes of `log(error)` against `log(ε)` for the four norms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFits {
    pub eps: Vec<f64>,
    pub velocity: LineFit,
    pub gradient: LineFit,
    pub time_derivative: LineFit,
    pub pressure: LineFit,
}

pub fn rate_fit(eps: &[f64], err: &[f64]) -> Result<LineFit> {
    if eps.len() != err.len() || eps.len() < 3 {
        return Err(Error::Config(format!("a rate fit needs at least 3 (ε, error) pairs, got {}", eps.len().min(err.len()))));
    }
    if let Some((e, v)) = eps.iter().zip(err).find(|(e, v)| !(**e > 0.0 && **v > 0.0 && v.is_finite())) {
        return Err(Error::Config(format!("rate fit needs positive values, got error {v} at ε = {e}")));
    }
    let x: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = err.iter().map(|e| e.ln()).collect();
    Ok(fit_line(&x, &y))
}

pub fn rate_fits(reports: &[ErrorReport]) -> Result<RateFits> {
    let eps: Vec<f64> = reports.iter().map(|r| r.eps).collect();
    let col = |f: fn(&ErrorReport) -> f64| reports.iter().map(f).collect::<Vec<_>>();
    Ok(RateFits {
        velocity: rate_fit(&eps, &col(|r| r.velocity))?,
        gradient: rate_fit(&eps, &col(|r| r.gradient))?,
        time_derivative: rate_fit(&eps, &col(|r| r.time_derivative))?,
        pressure: rate_fit(&eps, &col(|r| r.pressure))?,
        eps,
    })
}
