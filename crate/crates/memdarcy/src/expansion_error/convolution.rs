//! Time convolutions of the cell correctors with the force modes, and their evaluation on
//! the fine grid through `y = x/ε`.

use crate::aux_correctors::BogovskiiCorrector;
use crate::cell_corrector::{CorrectorTrajectory, PermeabilityKernel};
use crate::error::{Error, Result};
use crate::mac::{Comp, MacGrid};
use crate::Real;
use std::sync::Arc;

type Mat2 = [[f64; 2]; 2];

/// Right-endpoint convolutions `K[n] = Δt Σ_{k=1}^{n} X(t_k) a_r(t_{n+1-k})` of the cell
/// fields `X = W_j` (and `φ_{·i,j}`, `A_ij`) against every time mode `a_r`.
#[derive(Clone, Debug)]
pub struct CorrectorKernels<T> {
    pub cell: Arc<MacGrid>,
    pub nodes: usize,
    pub rank: usize,
    pub fluid_fraction: f64,
    nfc: usize,
    kw: Vec<T>,
    kphi: Option<Vec<T>>,
    ka: Vec<Mat2>,
}

fn convolve_into<T: Real>(out: &mut [T], fields: &[Vec<T>], a: &[f64], dt: f64, nfc: usize, stride: usize, offset: usize) {
    let nodes = fields.len();
    for n in 1..nodes {
        let base = (n * stride + offset) * nfc;
        let dst = &mut out[base..base + nfc];
        for k in 1..=n {
            let c = T::c(dt * a[n + 1 - k]);
            if c == T::zero() {
                continue;
            }
            for (d, &x) in dst.iter_mut().zip(&fields[k]) {
                *d += c * x;
            }
        }
    }
}

impl<T: Real> CorrectorKernels<T> {
    pub fn new(
        traj: &[CorrectorTrajectory<T>; 2],
        kernel: &PermeabilityKernel,
        phi: Option<&BogovskiiCorrector<T>>,
        a: &[Vec<f64>],
    ) -> Result<Self> {
        let time = &traj[0].time;
        let dt = time.uniform_step()?;
        let nodes = time.len();
        if traj[1].time.t != time.t || kernel.time.t != time.t {
            return Err(Error::Shape("corrector trajectories and kernel use different time grids".into()));
        }
        if a.iter().any(|x| x.len() != nodes) {
            return Err(Error::Shape(format!("force modes must have {nodes} samples")));
        }
        if let Some(p) = phi {
            if p.time.t != time.t || p.grid.nfaces() != traj[0].grid.nfaces() {
                return Err(Error::Shape("Bogovskii corrector does not match the trajectories".into()));
            }
        }
        let cell = traj[0].grid.clone();
        let nfc = cell.nfaces();
        let rank = a.len();
        let mut kw = vec![T::zero(); nodes * rank * 2 * nfc];
        for (r, ar) in a.iter().enumerate() {
            for (j, tr) in traj.iter().enumerate() {
                convolve_into(&mut kw, &tr.w, ar, dt, nfc, rank * 2, r * 2 + j);
            }
        }
        let kphi = phi.map(|p| {
            let mut out = vec![T::zero(); nodes * rank * 4 * nfc];
            for (r, ar) in a.iter().enumerate() {
                for i in 0..2 {
                    for j in 0..2 {
                        convolve_into(&mut out, &p.fields[i][j], ar, dt, nfc, rank * 4, r * 4 + 2 * i + j);
                    }
                }
            }
            out
        });
        let mut ka = vec![[[0.0; 2]; 2]; nodes * rank];
        for (r, ar) in a.iter().enumerate() {
            for n in 1..nodes {
                let mut s = [[0.0; 2]; 2];
                for k in 1..=n {
                    for (p, row) in s.iter_mut().enumerate() {
                        for (q, v) in row.iter_mut().enumerate() {
                            *v += dt * kernel.a[k][p][q] * ar[n + 1 - k];
                        }
                    }
                }
                ka[n * rank + r] = s;
            }
        }
        Ok(Self { cell, nodes, rank, fluid_fraction: kernel.fluid_fraction, nfc, kw, kphi, ka })
    }

    /// `(W_j ∗ a_r)(t_n)` on the cell faces.
    pub fn w(&self, n: usize, r: usize, j: usize) -> &[T] {
        let b = ((n * self.rank + r) * 2 + j) * self.nfc;
        &self.kw[b..b + self.nfc]
    }

    /// `(φ_{·i,j} ∗ a_r)(t_n)` on the cell faces.
    pub fn phi(&self, n: usize, r: usize, i: usize, j: usize) -> Option<&[T]> {
        self.kphi.as_ref().map(|k| {
            let b = ((n * self.rank + r) * 4 + 2 * i + j) * self.nfc;
            &k[b..b + self.nfc]
        })
    }

    pub fn has_phi(&self) -> bool {
        self.kphi.is_some()
    }

    /// `(A ∗ a_r)(t_n)`.
    pub fn a(&self, n: usize, r: usize) -> Mat2 {
        self.ka[n * self.rank + r]
    }
}

/// Fine-grid face → cell face through `y = x/ε` (periodic reduction).
pub fn cell_face_map(fine: &MacGrid, cell: &MacGrid, eps: f64) -> Result<Vec<u32>> {
    let nc = cell.nx;
    if !cell.periodic || cell.ny != nc {
        return Err(Error::Config("the cell grid must be square and periodic".into()));
    }
    let m = (1.0 / eps).round() as usize;
    if fine.nx != fine.ny || m == 0 || fine.nx != m * nc || (m as f64 * eps - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "epsilon = {eps} is not commensurate with the fine grid ({} cells) and n_cell = {nc}",
            fine.nx
        )));
    }
    Ok((0..fine.nfaces())
        .map(|f| {
            let (c, i, j) = fine.face_ij(f);
            (match c {
                Comp::U => cell.uidx(i % nc, j % nc),
                Comp::V => cell.vidx(i % nc, j % nc),
            }) as u32
        })
        .collect())
}

/// Face values of a cell-centred field: mean of the two adjacent cells, or the one cell
/// inside the box on the outer faces.
pub fn centres_to_faces<V: Copy>(grid: &MacGrid, vals: &[V], mid: impl Fn(V, V) -> V) -> Vec<V> {
    let (nx, ny) = (grid.nx, grid.ny);
    (0..grid.nfaces())
        .map(|f| {
            let (c, i, j) = grid.face_ij(f);
            let (lo, hi) = match c {
                Comp::U => {
                    let l = if i == 0 { if grid.periodic { nx - 1 } else { 0 } } else { i - 1 };
                    let r = if i == nx { nx - 1 } else { i };
                    (j * nx + l, j * nx + r)
                }
                Comp::V => {
                    let b = if j == 0 { if grid.periodic { ny - 1 } else { 0 } } else { j - 1 };
                    let t = if j == ny { ny - 1 } else { j };
                    (b * nx + i, t * nx + i)
                }
            };
            if lo == hi {
                vals[lo]
            } else {
                mid(vals[lo], vals[hi])
            }
        })
        .collect()
}

pub fn mid2<T: Real>(p: [T; 2], q: [T; 2]) -> [T; 2] {
    let h = T::c(0.5);
    [h * (p[0] + q[0]), h * (p[1] + q[1])]
}

pub fn mid22<T: Real>(p: [[T; 2]; 2], q: [[T; 2]; 2]) -> [[T; 2]; 2] {
    [mid2(p[0], q[0]), mid2(p[1], q[1])]
}

/// `W(·/ε) ∗ S` on the fine faces for a mode expansion `S = Σ_r a_r S_r`, where `modes[r]`
/// holds `S_r` at every fine face.
pub fn corrector_convolution<T: Real>(
    kernels: &CorrectorKernels<T>,
    fine: &MacGrid,
    map: &[u32],
    modes: &[Vec<[T; 2]>],
    n: usize,
    out: &mut [T],
) {
    out.iter_mut().for_each(|v| *v = T::zero());
    for (r, sr) in modes.iter().enumerate() {
        let (w0, w1) = (kernels.w(n, r, 0), kernels.w(n, r, 1));
        for &f in fine.fluid_faces() {
            let cf = map[f] as usize;
            out[f] += w0[cf] * sr[f][0] + w1[cf] * sr[f][1];
        }
    }
}

/// `ε φ(·/ε) ∗₂ ∂S` on the fine faces; `dmodes[r][f][i][j] = ∂_i S_{r,j}` at face `f`.
pub fn flux_term<T: Real>(
    kernels: &CorrectorKernels<T>,
    fine: &MacGrid,
    map: &[u32],
    dmodes: &[Vec<[[T; 2]; 2]>],
    eps: f64,
    n: usize,
    out: &mut [T],
) {
    out.iter_mut().for_each(|v| *v = T::zero());
    if !kernels.has_phi() {
        return;
    }
    let e = T::c(eps);
    for (r, dr) in dmodes.iter().enumerate() {
        for i in 0..2 {
            for j in 0..2 {
                let k = kernels.phi(n, r, i, j).unwrap();
                for &f in fine.fluid_faces() {
                    out[f] += e * k[map[f] as usize] * dr[f][i][j];
                }
            }
        }
    }
}
