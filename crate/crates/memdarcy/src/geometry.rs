//! Unit cell, perforated domain, boundary distance, radial cut-off and the decomposition of
//! the boundary layer into ε-cells.

use crate::error::{Error, Result};
use crate::quadrature::simpson;
use crate::Real;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// Shape of the solid inclusion inside the unit cell `Y = [0,1]²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleShape {
    /// Axis-aligned square centred in the cell; `extent` is its side length.
    Square,
    /// Staircase approximation of a centred disk; `extent` is the radius.
    Disk,
}

/// Rasterized periodic cell `Y = Y_f ∪ Y_s`.
#[derive(Clone, Debug)]
pub struct CellGeometry<T> {
    pub shape: ObstacleShape,
    pub extent: f64,
    /// Cells per unit length.
    pub n_cell: usize,
    /// Row-major solid flags, index `j * n_cell + i`.
    pub solid: Vec<bool>,
    /// `|Y_f|` by exact cell counting.
    pub fluid_fraction: T,
    /// Half-open bounding box `[i0, i1) × [j0, j1)` of the solid cells, if any.
    pub solid_bbox: Option<[usize; 4]>,
}

impl<T: Real> CellGeometry<T> {
    pub fn new(shape: ObstacleShape, extent: f64, n_cell: usize) -> Result<Self> {
        if !(0.0..0.5).contains(&extent) {
            return Err(Error::Config(format!("obstacle_extent must lie in [0, 1/2), got {extent}")));
        }
        if n_cell < 4 {
            return Err(Error::Config(format!("n_cell must be at least 4, got {n_cell}")));
        }
        let n = n_cell;
        let h = 1.0 / n as f64;
        let mut solid = vec![false; n * n];
        for j in 0..n {
            for i in 0..n {
                let (x, y) = ((i as f64 + 0.5) * h - 0.5, (j as f64 + 0.5) * h - 0.5);
                solid[j * n + i] = match shape {
                    ObstacleShape::Square => x.abs() < 0.5 * extent && y.abs() < 0.5 * extent,
                    ObstacleShape::Disk => x * x + y * y < extent * extent,
                };
            }
        }
        let bbox = bounding_box(&solid, n);
        if let Some([i0, i1, j0, j1]) = bbox {
            if i1 - i0 < 4 || j1 - j0 < 4 {
                return Err(Error::Config(format!(
                    "n_cell = {n} does not resolve the obstacle with at least 4 cells across"
                )));
            }
            if i0 < 1 || j0 < 1 || i1 > n - 1 || j1 > n - 1 {
                return Err(Error::Config("obstacle must keep one grid cell of clearance from ∂Y".into()));
            }
        } else if extent > 0.0 {
            return Err(Error::Config(format!("n_cell = {n} is too coarse to see an obstacle of extent {extent}")));
        }
        let nsolid = solid.iter().filter(|&&s| s).count();
        let fluid_fraction = T::from_usize_lossy(n * n - nsolid) / T::from_usize_lossy(n * n);
        let cell = Self { shape, extent, n_cell: n, solid, fluid_fraction, solid_bbox: bbox };
        if !cell.fluid_connected() {
            return Err(Error::Config("fluid part of the cell is not connected".into()));
        }
        Ok(cell)
    }

    pub fn has_obstacle(&self) -> bool {
        self.solid_bbox.is_some()
    }

    /// Flood fill over the periodic fluid cells.
    pub fn fluid_connected(&self) -> bool {
        let n = self.n_cell;
        let fluid: Vec<bool> = self.solid.iter().map(|s| !s).collect();
        flood_connected(&fluid, n, n, true)
    }

    pub fn is_solid(&self, i: usize, j: usize) -> bool {
        self.solid[j * self.n_cell + i]
    }

    /// Portable graymap (ASCII) of the cell, fluid white.
    pub fn to_pgm(&self) -> String {
        mask_to_pgm(&self.solid, self.n_cell, self.n_cell)
    }
}

fn bounding_box(solid: &[bool], n: usize) -> Option<[usize; 4]> {
    let mut b = [usize::MAX, 0, usize::MAX, 0];
    let mut any = false;
    for j in 0..n {
        for i in 0..n {
            if solid[j * n + i] {
                any = true;
                b[0] = b[0].min(i);
                b[1] = b[1].max(i + 1);
                b[2] = b[2].min(j);
                b[3] = b[3].max(j + 1);
            }
        }
    }
    any.then_some(b)
}

/// 4-neighbour connectivity of the `true` cells of an `nx × ny` mask.
pub fn flood_connected(mask: &[bool], nx: usize, ny: usize, periodic: bool) -> bool {
    let total = mask.iter().filter(|&&m| m).count();
    let Some(start) = mask.iter().position(|&m| m) else { return true };
    let mut seen = vec![false; mask.len()];
    let mut stack = vec![start];
    seen[start] = true;
    let mut count = 1;
    while let Some(c) = stack.pop() {
        let (i, j) = (c % nx, c / nx);
        let mut nb = [None; 4];
        if i > 0 {
            nb[0] = Some(c - 1);
        } else if periodic {
            nb[0] = Some(c + nx - 1);
        }
        if i + 1 < nx {
            nb[1] = Some(c + 1);
        } else if periodic {
            nb[1] = Some(c + 1 - nx);
        }
        if j > 0 {
            nb[2] = Some(c - nx);
        } else if periodic {
            nb[2] = Some(c + nx * (ny - 1));
        }
        if j + 1 < ny {
            nb[3] = Some(c + nx);
        } else if periodic {
            nb[3] = Some(c - nx * (ny - 1));
        }
        for d in nb.into_iter().flatten() {
            if mask[d] && !seen[d] {
                seen[d] = true;
                count += 1;
                stack.push(d);
            }
        }
    }
    count == total
}

/// ASCII PGM (P2) with solid cells black and fluid white; row 0 of the image is the top.
pub fn mask_to_pgm(solid: &[bool], nx: usize, ny: usize) -> String {
    let mut s = format!("P2\n{nx} {ny}\n255\n");
    for j in (0..ny).rev() {
        let row: Vec<&str> = (0..nx).map(|i| if solid[j * nx + i] { "0" } else { "255" }).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

/// Macroscopic box `Ω = [0, lx] × [0, ly]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lx: f64,
    pub ly: f64,
}

impl Default for Domain {
    fn default() -> Self {
        Self::unit_square()
    }
}

impl Domain {
    pub fn unit_square() -> Self {
        Self { lx: 1.0, ly: 1.0 }
    }

    pub fn is_unit_square(&self) -> bool {
        self.lx == 1.0 && self.ly == 1.0
    }

    /// `dist(x, ∂Ω)` for a point inside the box.
    pub fn dist(&self, x: f64, y: f64) -> f64 {
        x.min(self.lx - x).min(y).min(self.ly - y)
    }

    /// Membership in the co-layer `Σ_ε = {dist(x, ∂Ω) ≥ ε}`.
    pub fn in_colayer(&self, x: f64, y: f64, eps: f64) -> bool {
        self.dist(x, y) >= eps
    }

    /// Inward unit normal of the nearest side; ties resolved in the order left, right,
    /// bottom, top.
    pub fn inward_normal(&self, x: f64, y: f64) -> [f64; 2] {
        let d = [x, self.lx - x, y, self.ly - y];
        let k = (0..4).fold(0, |k, m| if d[m] < d[k] { m } else { k });
        match k {
            0 => [1.0, 0.0],
            1 => [-1.0, 0.0],
            2 => [0.0, 1.0],
            _ => [0.0, -1.0],
        }
    }

    /// True when two sides are (almost) equally close, i.e. near a corner diagonal.
    pub fn near_diagonal(&self, x: f64, y: f64, band: f64) -> bool {
        let mut d = [x, self.lx - x, y, self.ly - y];
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        d[1] - d[0] <= band
    }
}

/// Ω_ε: the unit square with obstacles stamped in the kept ε-cells.
#[derive(Clone, Debug)]
pub struct PerforatedDomain<T> {
    pub eps: f64,
    /// `1/ε`.
    pub cells_per_side: usize,
    pub kappa0: f64,
    /// Macroscopic cells per side, `N = n_cell / ε`.
    pub n: usize,
    /// Lattice points `z_k` whose cells carry an obstacle.
    pub kept: Vec<[usize; 2]>,
    /// Row-major solid flags on the macroscopic grid.
    pub solid: Vec<bool>,
    pub cell: CellGeometry<T>,
    pub domain: Domain,
}

/// `1/ε` as an integer, or a configuration error naming `key`.
pub fn reciprocal_index(eps: f64, key: &str) -> Result<usize> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Config(format!("{key}: ε = {eps} must lie in (0, 1]")));
    }
    let m = (1.0 / eps).round();
    if (m * eps - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("{key}: 1/ε must be an integer, got ε = {eps}")));
    }
    Ok(m as usize)
}

impl<T: Real> PerforatedDomain<T> {
    /// Stamp obstacles into every ε-cell that lies inside Ω and keeps its obstacle at
    /// distance ≥ κ₀ε from ∂Ω. An empty perforation is allowed here (Ω_ε = Ω); use
    /// [`PerforatedDomain::ensure_perforated`] where obstacles are required.
    pub fn build(domain: Domain, cell: &CellGeometry<T>, eps: f64, kappa0: f64, n_macro: Option<usize>) -> Result<Self> {
        if !domain.is_unit_square() {
            return Err(Error::UnsupportedDomain("only the unit square is supported".into()));
        }
        let m = reciprocal_index(eps, "epsilon")?;
        if kappa0 < 2.0 {
            return Err(Error::Config(format!("kappa0 must be at least 2, got {kappa0}")));
        }
        let nc = cell.n_cell;
        let n = nc * m;
        if let Some(nm) = n_macro {
            if nm != n {
                return Err(Error::Config(format!("N = {nm} is not aligned with n_cell/ε = {n}")));
            }
        }
        let mut solid = vec![false; n * n];
        let mut kept = Vec::new();
        if let Some([i0, i1, j0, j1]) = cell.solid_bbox {
            let margin = kappa0 * nc as f64 - 1e-9;
            for zj in 0..m {
                for zi in 0..m {
                    let (x0, x1) = (zi * nc + i0, zi * nc + i1);
                    let (y0, y1) = (zj * nc + j0, zj * nc + j1);
                    let d = (x0 as f64).min((n - x1) as f64).min(y0 as f64).min((n - y1) as f64);
                    if d >= margin {
                        kept.push([zi, zj]);
                        for cj in 0..nc {
                            for ci in 0..nc {
                                if cell.is_solid(ci, cj) {
                                    solid[(zj * nc + cj) * n + zi * nc + ci] = true;
                                }
                            }
                        }
                    }
                }
            }
        }
        let dom = Self { eps, cells_per_side: m, kappa0, n, kept, solid, cell: cell.clone(), domain };
        if !dom.fluid_connected() {
            return Err(Error::Config("perforated domain is not connected".into()));
        }
        Ok(dom)
    }

    pub fn ensure_perforated(&self) -> Result<()> {
        if self.kept.is_empty() {
            return Err(Error::DegeneratePerforation(format!(
                "no ε-cell qualifies for an obstacle at ε = {} with κ₀ = {}",
                self.eps, self.kappa0
            )));
        }
        Ok(())
    }

    pub fn is_degenerate(&self) -> bool {
        self.kept.is_empty()
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn fluid_connected(&self) -> bool {
        let fluid: Vec<bool> = self.solid.iter().map(|s| !s).collect();
        flood_connected(&fluid, self.n, self.n, false)
    }

    /// Smallest distance (in length units) between a solid cell and ∂Ω, `None` without
    /// obstacles.
    pub fn obstacle_margin(&self) -> Option<f64> {
        let n = self.n;
        let mut best: Option<usize> = None;
        for j in 0..n {
            for i in 0..n {
                if self.solid[j * n + i] {
                    let d = i.min(n - 1 - i).min(j).min(n - 1 - j);
                    best = Some(best.map_or(d, |b| b.min(d)));
                }
            }
        }
        best.map(|d| d as f64 * self.h())
    }

    /// Index of the ε-cell containing macroscopic cell `(i, j)`.
    pub fn lattice_of(&self, i: usize, j: usize) -> [usize; 2] {
        [i / self.cell.n_cell, j / self.cell.n_cell]
    }

    pub fn fluid_measure(&self) -> f64 {
        let h = self.h();
        self.solid.iter().filter(|s| !**s).count() as f64 * h * h
    }

    pub fn to_pgm(&self) -> String {
        mask_to_pgm(&self.solid, self.n, self.n)
    }
}

/// Standard bump `exp(-1/(1-z²))` on (-1, 1), not normalized.
#[inline]
pub fn bump(z: f64) -> f64 {
    if z.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - z * z)).exp()
    }
}

/// `1 / ∫ bump` over (-1, 1).
pub fn bump_normalization() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| 1.0 / simpson(bump, -1.0, 1.0, 4096))
}

/// The radial profile `g_ε`: the ramp from 0 at 4ε/3 to 1 at 5ε/3, mollified with the
/// normalized bump at width ε/3. Its support of change is exactly `[ε, 2ε]`.
#[derive(Clone, Copy, Debug)]
pub struct RadialProfile {
    pub eps: f64,
}

const PROFILE_NODES: usize = 256;

impl RadialProfile {
    fn eta(z: f64) -> f64 {
        bump_normalization() * bump(z)
    }

    /// `g_ε(r)`.
    pub fn value(&self, r: f64) -> f64 {
        let a = 3.0 * r / self.eps;
        if a <= 3.0 {
            return 0.0;
        }
        if a >= 6.0 {
            return 1.0;
        }
        let mut g = 0.0;
        let b = (a - 5.0).min(1.0);
        if b > -1.0 {
            g += simpson(Self::eta, -1.0, b, PROFILE_NODES);
        }
        let (lo, hi) = ((a - 5.0).max(-1.0), (a - 4.0).min(1.0));
        if hi > lo {
            g += simpson(|z| Self::eta(z) * (a - 4.0 - z), lo, hi, PROFILE_NODES);
        }
        g.clamp(0.0, 1.0)
    }

    /// `g_ε'(r)`.
    pub fn slope(&self, r: f64) -> f64 {
        let a = 3.0 * r / self.eps;
        if a <= 3.0 || a >= 6.0 {
            return 0.0;
        }
        let (lo, hi) = ((a - 5.0).max(-1.0), (a - 4.0).min(1.0));
        if hi <= lo {
            return 0.0;
        }
        3.0 / self.eps * simpson(Self::eta, lo, hi, PROFILE_NODES)
    }

    /// `g_ε''(r)`, from differentiating the integration limits.
    pub fn curvature(&self, r: f64) -> f64 {
        let a = 3.0 * r / self.eps;
        let k = 3.0 / self.eps;
        k * k * (Self::eta(a - 4.0) - Self::eta(a - 5.0))
    }
}

/// Radial cut-off `ψ_ε(x) = g_ε(dist(x, ∂Ω))` sampled at the centres of an `N × N` grid.
#[derive(Clone, Debug)]
pub struct CutoffFunction<T> {
    pub eps: f64,
    pub n: usize,
    pub profile: RadialProfile,
    pub domain: Domain,
    pub psi: Vec<T>,
    pub grad: Vec<[T; 2]>,
}

impl<T: Real> CutoffFunction<T> {
    /// Requires `ε ≤ 1/8` (one eighth of the side length).
    pub fn new(domain: Domain, eps: f64, n: usize) -> Result<Self> {
        if !domain.is_unit_square() {
            return Err(Error::UnsupportedDomain("the radial cut-off is built for the unit square".into()));
        }
        if !(eps > 0.0 && eps <= 0.125 + 1e-12) {
            return Err(Error::Config(format!("radial cut-off needs 0 < ε ≤ 1/8, got ε = {eps}")));
        }
        let profile = RadialProfile { eps };
        let h = 1.0 / n as f64;
        let mut psi = Vec::with_capacity(n * n);
        let mut grad = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                let (x, y) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
                psi.push(T::c(profile.value(domain.dist(x, y))));
                let g = Self::gradient_at(&profile, &domain, x, y);
                grad.push([T::c(g[0]), T::c(g[1])]);
            }
        }
        Ok(Self { eps, n, profile, domain, psi, grad })
    }

    fn gradient_at(profile: &RadialProfile, domain: &Domain, x: f64, y: f64) -> [f64; 2] {
        let s = profile.slope(domain.dist(x, y));
        let nrm = domain.inward_normal(x, y);
        [s * nrm[0], s * nrm[1]]
    }

    /// `ψ_ε` at an arbitrary point.
    pub fn value_at(&self, x: f64, y: f64) -> f64 {
        self.profile.value(self.domain.dist(x, y))
    }

    /// `∇ψ_ε` at an arbitrary point (chain rule through the distance function).
    pub fn grad_at(&self, x: f64, y: f64) -> [f64; 2] {
        Self::gradient_at(&self.profile, &self.domain, x, y)
    }

    /// Largest sampled `|∇ψ_ε|`.
    pub fn max_grad(&self) -> f64 {
        self.grad
            .iter()
            .map(|g| (g[0] * g[0] + g[1] * g[1]).sqrt().to_f64_lossy())
            .fold(0.0, f64::max)
    }

    /// Largest `|∇²ψ_ε|` at the sample points away from corner diagonals, where the
    /// Hessian is `g'' ν⊗ν`.
    pub fn max_hessian(&self) -> f64 {
        let h = 1.0 / self.n as f64;
        let mut m: f64 = 0.0;
        for j in 0..self.n {
            for i in 0..self.n {
                let (x, y) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
                m = m.max(self.profile.curvature(self.domain.dist(x, y)).abs());
            }
        }
        m
    }

    /// Grid cells in `O_ε = supp ∇ψ_ε`.
    pub fn layer_mask(&self) -> Vec<bool> {
        self.grad.iter().map(|g| g[0] != T::zero() || g[1] != T::zero()).collect()
    }
}

/// Kind of boundary-layer cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerCellKind {
    Corner,
    Cylinder,
}

/// One piece of the layer decomposition, a half-open block of grid cells
/// `[i0, i1) × [j0, j1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCell {
    pub kind: LayerCellKind,
    pub rect: [usize; 4],
}

impl LayerCell {
    pub fn contains(&self, i: usize, j: usize) -> bool {
        let [i0, i1, j0, j1] = self.rect;
        (i0..i1).contains(&i) && (j0..j1).contains(&j)
    }
    pub fn ncells(&self) -> usize {
        let [i0, i1, j0, j1] = self.rect;
        (i1 - i0) * (j1 - j0)
    }
}

/// Partition of `O_ε` into four corner squares and ε-cylinders along the sides.
#[derive(Clone, Debug)]
pub struct LayerDecomposition {
    pub eps: f64,
    pub n: usize,
    pub cells: Vec<LayerCell>,
    /// Grid cell → decomposition cell.
    pub owner: Vec<Option<usize>>,
}

impl LayerDecomposition {
    pub fn new(domain: Domain, eps: f64, n: usize) -> Result<Self> {
        if !domain.is_unit_square() {
            return Err(Error::UnsupportedDomain("layer decomposition needs the unit square".into()));
        }
        let m = reciprocal_index(eps, "epsilon")?;
        if m < 4 || n % m != 0 {
            return Err(Error::Config(format!("layer decomposition needs 1/ε ≥ 4 dividing N, got 1/ε = {m}, N = {n}")));
        }
        let e = n / m;
        let mut cells = Vec::new();
        let lo = [e, 2 * e];
        let hi = [n - 2 * e, n - e];
        for &(x0, x1) in &[(lo[0], lo[1]), (hi[0], hi[1])] {
            for &(y0, y1) in &[(lo[0], lo[1]), (hi[0], hi[1])] {
                cells.push(LayerCell { kind: LayerCellKind::Corner, rect: [x0, x1, y0, y1] });
            }
        }
        let mut s = 2 * e;
        while s + e <= n - 2 * e {
            // bottom, top, left, right cylinders at offset s
            cells.push(LayerCell { kind: LayerCellKind::Cylinder, rect: [s, s + e, lo[0], lo[1]] });
            cells.push(LayerCell { kind: LayerCellKind::Cylinder, rect: [s, s + e, hi[0], hi[1]] });
            cells.push(LayerCell { kind: LayerCellKind::Cylinder, rect: [lo[0], lo[1], s, s + e] });
            cells.push(LayerCell { kind: LayerCellKind::Cylinder, rect: [hi[0], hi[1], s, s + e] });
            s += e;
        }
        let mut owner = vec![None; n * n];
        for (k, c) in cells.iter().enumerate() {
            let [i0, i1, j0, j1] = c.rect;
            for j in j0..j1 {
                for i in i0..i1 {
                    if owner[j * n + i].is_some() {
                        return Err(Error::Solver("layer decomposition cells overlap".into()));
                    }
                    owner[j * n + i] = Some(k);
                }
            }
        }
        Ok(Self { eps, n, cells, owner })
    }

    pub fn cylinders(&self) -> usize {
        self.cells.iter().filter(|c| c.kind == LayerCellKind::Cylinder).count()
    }

    /// Area of one decomposition cell in length units.
    pub fn area(&self, k: usize) -> f64 {
        let h = 1.0 / self.n as f64;
        self.cells[k].ncells() as f64 * h * h
    }

    /// Grid cells of `O_ε` by the distance rule `ε < dist(centre) < 2ε`.
    pub fn layer_by_distance(&self) -> Vec<bool> {
        let n = self.n;
        let e = (self.eps * n as f64).round() as usize;
        (0..n * n)
            .map(|c| {
                let (i, j) = (c % n, c / n);
                let d = i.min(n - 1 - i).min(j).min(n - 1 - j);
                d >= e && d < 2 * e
            })
            .collect()
    }
}
