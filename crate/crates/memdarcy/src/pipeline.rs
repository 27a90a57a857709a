//! Stage chain cell → kernel → homogenized → fine → errors, with per-ε results cached
//! on disk by content hash.

use crate::aux_correctors::{bogovskii_cell, BogovskiiCorrector};
use crate::cell_corrector::{solve_correctors, CorrectorTrajectory, PermeabilityKernel};
use crate::config::RunConfig;
use crate::darcy_memory::{effective_force, macro_grid, solve_homogenized, HomogenizedOptions, HomogenizedSolution};
use crate::error::{Error, Result};
use crate::expansion_error::{
    bogovskii_estimate_probe, probe::zero_mean_probe_data, rate_fits, run_boundary_layer, run_error_norms, BogovskiiProbe,
    ErrorReport, ExpansionInputs, ForcingModes, LayerOptions, LayerReport, RateFits,
};
use crate::geometry::{CellGeometry, Domain, PerforatedDomain};
use crate::mac::MacGrid;
use crate::time::TimeGrid;
use crate::Real;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Bump when a change alters cached numbers.
const CACHE_EPOCH: u32 = 1;

impl RunConfig {
    pub fn cell_geometry<T: Real>(&self) -> Result<CellGeometry<T>> {
        CellGeometry::new(self.geometry.shape, self.geometry.obstacle_extent, self.geometry.n_cell)
    }

    /// Graded grid of the kernel study.
    pub fn kernel_time(&self) -> Result<TimeGrid> {
        TimeGrid::graded(self.time.horizon, self.time.steps, self.time.gamma)
    }

    /// Uniform grid shared by the homogenized and fine solves.
    pub fn sweep_time(&self) -> Result<TimeGrid> {
        TimeGrid::uniform(self.time.horizon, self.time.steps)
    }

    pub fn domain<T: Real>(&self, cell: &CellGeometry<T>, eps: f64) -> Result<PerforatedDomain<T>> {
        let n = self.fine_n(eps)?;
        PerforatedDomain::build(Domain::unit_square(), cell, eps, self.geometry.kappa0, Some(n))
    }
}

/// Hex SHA-256 of a serializable value together with the cache epoch.
pub fn content_hash<S: Serialize>(tag: &str, value: &S) -> String {
    let mut h = Sha256::new();
    h.update(tag.as_bytes());
    h.update(CACHE_EPOCH.to_le_bytes());
    h.update(serde_json::to_vec(value).expect("hashable value serializes"));
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Correctors, kernel and (for a perforated cell) the Bogovskii corrector on one time grid.
pub struct CellStage<T> {
    pub cell: CellGeometry<T>,
    pub traj: [CorrectorTrajectory<T>; 2],
    pub kernel: PermeabilityKernel,
    pub phi: Option<BogovskiiCorrector<T>>,
}

pub fn cell_stage<T: Real>(cfg: &RunConfig, time: &TimeGrid, with_phi: bool) -> Result<CellStage<T>> {
    let cell = cfg.cell_geometry::<T>()?;
    let traj = solve_correctors(&cell, time)?;
    let kernel = PermeabilityKernel::from_trajectories(&traj)?;
    let phi = if with_phi && cell.has_obstacle() { Some(bogovskii_cell(&traj, &kernel)?) } else { None };
    Ok(CellStage { cell, traj, kernel, phi })
}

/// `p₀` on the macroscopic grid and the effective force `F = f - ∇p₀` per node.
pub struct MacroStage<T> {
    pub grid: Arc<MacGrid>,
    pub solution: HomogenizedSolution<T>,
    pub effective: Vec<Vec<T>>,
}

pub fn macro_stage<T: Real>(cfg: &RunConfig, kernel: &PermeabilityKernel) -> Result<MacroStage<T>> {
    let grid = macro_grid(cfg.sweep.n_macro);
    let force = cfg.forcing.history::<T>(&grid, &kernel.time.t);
    let opts = HomogenizedOptions { tol: cfg.tolerance.homogenized, ..Default::default() };
    let solution = solve_homogenized(kernel, grid.clone(), &force, &opts)?;
    let effective = force.iter().zip(&solution.p).map(|(f, p)| effective_force(&grid, f, p)).collect();
    Ok(MacroStage { grid, solution, effective })
}

/// Everything measured at one `ε`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsResult {
    pub eps: f64,
    /// Fine cells per side.
    pub n: usize,
    pub obstacles: usize,
    pub errors: ErrorReport,
    pub layer: Option<LayerReport>,
    pub probe: BogovskiiProbe,
    /// `sup_t (‖u_ε‖² + ε²‖∇u_ε‖²_{L²(0,t)}) / ‖f‖²_{L²(0,T)}`.
    pub energy_constant: f64,
    /// `‖u_ε‖ / (ε‖∇u_ε‖)` over the run.
    pub poincare_constant: f64,
    pub max_divergence: f64,
    /// Rank of the separated force and the relative energy it drops.
    pub force_rank: usize,
    pub force_truncation: f64,
}

pub fn eps_stage<T: Real>(cfg: &RunConfig, cell: &CellStage<T>, mac: &MacroStage<T>, eps: f64) -> Result<EpsResult> {
    let dom = cfg.domain(&cell.cell, eps)?;
    let time = cell.kernel.time.clone();
    let modes = ForcingModes::from_macro(time, &mac.grid, &mac.effective, eps, dom.n, cfg.tolerance.force_modes)?;
    let inp = ExpansionInputs {
        dom: &dom,
        traj: &cell.traj,
        kernel: &cell.kernel,
        phi: cell.phi.as_ref(),
        modes: &modes,
        p0: &mac.solution.p,
        n_macro: cfg.sweep.n_macro,
        force: &cfg.forcing,
    };
    let out = run_error_norms(&inp)?;
    let layer = if cfg.sweep.boundary_layer && eps <= 0.125 + 1e-12 && cell.phi.is_some() {
        let opts = LayerOptions { tol: cfg.tolerance.divergence, ..Default::default() };
        Some(run_boundary_layer(&inp, &opts)?.0)
    } else {
        None
    };
    let g = zero_mean_probe_data::<T>(&dom, |x, _| (2.0 * std::f64::consts::PI * x).sin());
    let (probe, _) = bogovskii_estimate_probe(&dom, &g)?;
    Ok(EpsResult {
        eps,
        n: dom.n,
        obstacles: dom.kept.len(),
        errors: out.errors,
        layer,
        probe,
        energy_constant: out.energy.energy_constant(),
        poincare_constant: out.energy.poincare_constant(),
        max_divergence: out.max_divergence,
        force_rank: modes.rank(),
        force_truncation: modes.truncation,
    })
}

/// Summary of the shared stages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharedSummary {
    pub fluid_fraction: f64,
    /// `A(t)` at the first, middle and last node.
    pub kernel_samples: Vec<(f64, [[f64; 2]; 2])>,
    pub corrector_max_divergence: f64,
    pub phi_max_abs: Option<f64>,
    /// `max |div φ - rhs|` over all nodes and entries.
    pub phi_max_divergence: Option<f64>,
    pub homogenized_windows: usize,
    pub homogenized_max_ratio: f64,
}

/// `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: RunConfig,
    pub config_hash: String,
    pub cell_mask_hash: String,
    pub shared: Option<SharedSummary>,
    pub results: Vec<EpsResult>,
    pub rates: Option<RateFits>,
    /// Successive ratios of `‖ξ̂‖ + ε‖∇ξ̂‖` and `‖η̂‖ + ε‖∇η̂‖` between neighbouring `ε`.
    pub layer_ratios: Vec<[f64; 2]>,
    /// `max/min` over the sweep of the two probe ratios.
    pub probe_spread: Option<[f64; 2]>,
}

impl SweepReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `eps,velocity,gradient,time_derivative,pressure,velocity_g,gradient_g` rows plus the slopes.
    pub fn rates_csv(&self) -> String {
        let mut s = String::from("eps,velocity,gradient,time_derivative,pressure,velocity_g,gradient_g\n");
        for r in &self.results {
            let e = &r.errors;
            s.push_str(&format!(
                "{},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}\n",
                r.eps, e.velocity, e.gradient, e.time_derivative, e.pressure, e.velocity_g, e.gradient_g
            ));
        }
        if let Some(f) = &self.rates {
            s.push_str(&format!(
                "slope,{:.6},{:.6},{:.6},{:.6},,\n",
                f.velocity.slope, f.gradient.slope, f.time_derivative.slope, f.pressure.slope
            ));
        }
        s
    }

    /// Two-column `log ε, log error` files, one per norm.
    pub fn plot_data(&self) -> Vec<(String, String)> {
        let cols: [(&str, fn(&ErrorReport) -> f64); 4] = [
            ("velocity", |e| e.velocity),
            ("gradient", |e| e.gradient),
            ("time_derivative", |e| e.time_derivative),
            ("pressure", |e| e.pressure),
        ];
        cols.iter()
            .map(|(name, f)| {
                let mut s = String::from("# log_eps log_error\n");
                for r in &self.results {
                    let v = f(&r.errors);
                    if v > 0.0 {
                        s.push_str(&format!("{:.9} {:.9}\n", r.eps.ln(), v.ln()));
                    }
                }
                (format!("rate_{name}.dat"), s)
            })
            .collect()
    }
}

fn spread(v: &[f64]) -> f64 {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(0.0, f64::max);
    hi / lo
}

/// Fills in rates, layer ratios and probe spread from the per-ε results (sorted by
/// decreasing `ε`).
pub fn summarize(cfg: &RunConfig, shared: Option<SharedSummary>, mut results: Vec<EpsResult>) -> Result<SweepReport> {
    results.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    let errs: Vec<ErrorReport> = results.iter().map(|r| r.errors.clone()).collect();
    let rates = if errs.len() >= 3 { Some(rate_fits(&errs)?) } else { None };
    let layered: Vec<&LayerReport> = results.iter().filter_map(|r| r.layer.as_ref()).collect();
    let layer_ratios = layered.windows(2).map(|w| [w[0].xi_size() / w[1].xi_size(), w[0].eta_size() / w[1].eta_size()]).collect();
    let pc: Option<Vec<f64>> = results.iter().map(|r| r.probe.poincare).collect();
    let st: Option<Vec<f64>> = results.iter().map(|r| r.probe.stability).collect();
    let probe_spread = match (pc, st) {
        (Some(a), Some(b)) if !a.is_empty() => Some([spread(&a), spread(&b)]),
        _ => None,
    };
    let cell = cfg.cell_geometry::<f64>()?;
    Ok(SweepReport {
        config: cfg.clone(),
        config_hash: content_hash("config", &(cfg.geometry.clone(), &cfg.time, &cfg.forcing, &cfg.sweep, &cfg.tolerance)),
        cell_mask_hash: content_hash("mask", &cell.solid),
        shared,
        results,
        rates,
        layer_ratios,
        probe_spread,
    })
}

/// Where per-stage artifacts live, keyed by content hash.
pub struct Cache {
    pub dir: PathBuf,
}

impl Cache {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn path(&self, stage: &str, hash: &str) -> PathBuf {
        self.dir.join(format!("{stage}-{}.json", &hash[..16]))
    }

    pub fn load<D: for<'de> Deserialize<'de>>(&self, stage: &str, hash: &str) -> Option<D> {
        let text = std::fs::read_to_string(self.path(stage, hash)).ok()?;
        serde_json::from_str(&text).ok()
    }

    /// Write-once: an existing artifact is left untouched.
    pub fn store<S: Serialize>(&self, stage: &str, hash: &str, value: &S) -> Result<PathBuf> {
        let p = self.path(stage, hash);
        if !p.exists() {
            let tmp = p.with_extension("tmp");
            std::fs::write(&tmp, serde_json::to_vec_pretty(value)?)?;
            std::fs::rename(&tmp, &p)?;
        }
        Ok(p)
    }
}

/// Hash of everything an `ε` result depends on.
pub fn eps_hash(cfg: &RunConfig, eps: f64) -> String {
    content_hash("eps", &(&cfg.geometry, &cfg.time, &cfg.forcing, cfg.sweep.n_macro, cfg.sweep.boundary_layer, &cfg.tolerance, eps))
}

fn shared_hash(cfg: &RunConfig) -> String {
    content_hash("shared", &(&cfg.geometry, &cfg.time, &cfg.forcing, cfg.sweep.n_macro, &cfg.tolerance))
}

/// Run the sweep. Cached `ε` results are reused; the shared stages are only computed if
/// some `ε` is missing. `jobs > 1` runs the missing `ε` concurrently.
pub fn run_sweep(cfg: &RunConfig, cache: Option<&Cache>, jobs: usize, log: &(dyn Fn(&str) + Sync)) -> Result<SweepReport> {
    cfg.validate()?;
    let mut done: Vec<EpsResult> = Vec::new();
    let mut todo: Vec<f64> = Vec::new();
    for &e in &cfg.sweep.epsilons {
        match cache.and_then(|c| c.load::<EpsResult>("eps", &eps_hash(cfg, e))) {
            Some(r) => {
                log(&format!("ε = {e}: cached"));
                done.push(r);
            }
            None => todo.push(e),
        }
    }
    let mut shared = cache.and_then(|c| c.load::<SharedSummary>("shared", &shared_hash(cfg)));
    if !todo.is_empty() {
        let time = cfg.sweep_time()?;
        log(&format!("cell stage: n_cell = {}, M = {}", cfg.geometry.n_cell, time.steps));
        let cell = cell_stage::<f64>(cfg, &time, cfg.sweep.boundary_layer)?;
        log("homogenized stage");
        let mac = macro_stage::<f64>(cfg, &cell.kernel)?;
        let k = &cell.kernel;
        let summary = SharedSummary {
            fluid_fraction: k.fluid_fraction,
            kernel_samples: [0, k.len() / 2, k.len() - 1].iter().map(|&i| (k.time.t[i], k.a[i])).collect(),
            corrector_max_divergence: cell.traj.iter().map(|t| t.max_divergence()).fold(0.0, f64::max),
            phi_max_abs: cell.phi.as_ref().map(|p| p.max_abs()),
            phi_max_divergence: cell.phi.as_ref().map(|p| p.divergence_residuals().into_iter().fold(0.0, f64::max)),
            homogenized_windows: mac.solution.windows.len(),
            homogenized_max_ratio: mac.solution.max_contraction_ratio(),
        };
        if let Some(c) = cache {
            c.store("shared", &shared_hash(cfg), &summary)?;
        }
        shared = Some(summary);
        let one = |e: f64| -> Result<EpsResult> {
            log(&format!("ε = {e}: fine solve and expansion (N = {})", cfg.fine_n(e)?));
            let r = eps_stage(cfg, &cell, &mac, e)?;
            if let Some(c) = cache {
                c.store("eps", &eps_hash(cfg, e), &r)?;
            }
            log(&format!("ε = {e}: gradient error {:.4e}, velocity error {:.4e}", r.errors.gradient, r.errors.velocity));
            Ok(r)
        };
        if jobs > 1 && todo.len() > 1 {
            let out: Vec<Result<EpsResult>> = std::thread::scope(|s| {
                let mut pending = Vec::new();
                let mut results = Vec::new();
                for &e in &todo {
                    if pending.len() == jobs {
                        let h: std::thread::ScopedJoinHandle<'_, Result<EpsResult>> = pending.remove(0);
                        results.push(h.join().unwrap_or_else(|_| Err(Error::Solver("worker panicked".into()))));
                    }
                    let one = &one;
                    pending.push(s.spawn(move || one(e)));
                }
                for h in pending {
                    results.push(h.join().unwrap_or_else(|_| Err(Error::Solver("worker panicked".into()))));
                }
                results
            });
            for r in out {
                done.push(r?);
            }
        } else {
            for &e in &todo {
                done.push(one(e)?);
            }
        }
    }
    summarize(cfg, shared, done)
}
