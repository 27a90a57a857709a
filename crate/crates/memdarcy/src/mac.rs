//! Staggered (MAC) grid on a box or a periodic cell with a solid mask.
//!
//! Velocities live on cell faces (`u` on vertical faces, `v` on horizontal faces), pressures
//! and divergences at cell centres. A face is *fluid* when both adjacent cells are fluid,
//! a *wall* face when exactly one is (its normal velocity vanishes), and *dead* otherwise.
//!
//! The discrete gradient of a face field is a list of samples:
//! differences between neighbouring fluid faces, a one-sided sample `u/h` when the
//! neighbour face is a wall face (zero at distance `h`), and a ghost sample `2u/h` when the
//! neighbour face is dead or outside the box (wall at distance `h/2`).

use crate::linalg::{CsrMatrix, Triplets};
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaceKind {
    Fluid,
    Wall,
    Dead,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Comp {
    U,
    V,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleKind {
    /// `(u_a - u_b) / h`, weight `h²`
    Pair,
    /// `u_a / h`, weight `h²`
    OneSided,
    /// `2 u_a / h`, weight `h²/2`
    Ghost,
}

/// One sample of the discrete velocity gradient.
#[derive(Clone, Copy, Debug)]
pub struct GradSample {
    pub kind: SampleKind,
    pub a: usize,
    /// Neighbour face (pair partner or wall face); `None` outside the box.
    pub b: Option<usize>,
    /// Direction of differentiation (0 = x, 1 = y).
    pub dir: u8,
}

#[derive(Clone, Debug)]
pub struct MacGrid {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub periodic: bool,
    /// Row-major solid flags of the cells.
    pub solid: Vec<bool>,
    kinds: Vec<FaceKind>,
    fluid_faces: Vec<usize>,
    face_dof: Vec<usize>,
    fluid_cells: Vec<usize>,
    cell_dof: Vec<usize>,
    samples: Vec<GradSample>,
}

pub const NO_DOF: usize = usize::MAX;

impl MacGrid {
    pub fn new(nx: usize, ny: usize, h: f64, periodic: bool, solid: Vec<bool>) -> Self {
        assert_eq!(solid.len(), nx * ny);
        let mut g = Self {
            nx,
            ny,
            h,
            periodic,
            solid,
            kinds: Vec::new(),
            fluid_faces: Vec::new(),
            face_dof: Vec::new(),
            fluid_cells: Vec::new(),
            cell_dof: Vec::new(),
            samples: Vec::new(),
        };
        g.classify();
        g
    }

    /// All-fluid grid.
    pub fn open(nx: usize, ny: usize, h: f64, periodic: bool) -> Self {
        Self::new(nx, ny, h, periodic, vec![false; nx * ny])
    }

    pub fn nu(&self) -> usize {
        self.nux() * self.ny
    }
    pub fn nux(&self) -> usize {
        if self.periodic {
            self.nx
        } else {
            self.nx + 1
        }
    }
    pub fn nvy(&self) -> usize {
        if self.periodic {
            self.ny
        } else {
            self.ny + 1
        }
    }
    pub fn nv(&self) -> usize {
        self.nx * self.nvy()
    }
    pub fn nfaces(&self) -> usize {
        self.nu() + self.nv()
    }
    pub fn ncells(&self) -> usize {
        self.nx * self.ny
    }
    #[inline]
    pub fn uidx(&self, i: usize, j: usize) -> usize {
        j * self.nux() + i
    }
    #[inline]
    pub fn vidx(&self, i: usize, j: usize) -> usize {
        self.nu() + j * self.nx + i
    }
    #[inline]
    pub fn cidx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// `(component, i, j)` of a face index.
    #[inline]
    pub fn face_ij(&self, f: usize) -> (Comp, usize, usize) {
        if f < self.nu() {
            (Comp::U, f % self.nux(), f / self.nux())
        } else {
            let g = f - self.nu();
            (Comp::V, g % self.nx, g / self.nx)
        }
    }

    /// Physical position of a face centre.
    pub fn face_pos(&self, f: usize) -> [f64; 2] {
        let (c, i, j) = self.face_ij(f);
        match c {
            Comp::U => [i as f64 * self.h, (j as f64 + 0.5) * self.h],
            Comp::V => [(i as f64 + 0.5) * self.h, j as f64 * self.h],
        }
    }

    pub fn cell_pos(&self, c: usize) -> [f64; 2] {
        [((c % self.nx) as f64 + 0.5) * self.h, ((c / self.nx) as f64 + 0.5) * self.h]
    }

    /// Is cell `(i, j)` (possibly outside, wrapped when periodic) fluid?
    pub fn cell_fluid(&self, i: isize, j: isize) -> bool {
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        let (i, j) = if self.periodic {
            (i.rem_euclid(nx), j.rem_euclid(ny))
        } else if i < 0 || j < 0 || i >= nx || j >= ny {
            return false;
        } else {
            (i, j)
        };
        !self.solid[(j * nx + i) as usize]
    }

    /// The two cells adjacent to a face (`(left, right)` or `(below, above)`) as signed
    /// coordinates, unwrapped.
    pub fn face_cells(&self, f: usize) -> ([isize; 2], [isize; 2]) {
        let (c, i, j) = self.face_ij(f);
        let (i, j) = (i as isize, j as isize);
        match c {
            Comp::U => ([i - 1, j], [i, j]),
            Comp::V => ([i, j - 1], [i, j]),
        }
    }

    /// Wrapped cell index of signed coordinates, `None` outside the box.
    pub fn wrap_cell(&self, i: isize, j: isize) -> Option<usize> {
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        if self.periodic {
            Some((j.rem_euclid(ny) * nx + i.rem_euclid(nx)) as usize)
        } else if i < 0 || j < 0 || i >= nx || j >= ny {
            None
        } else {
            Some((j * nx + i) as usize)
        }
    }

    fn classify(&mut self) {
        let nf = self.nfaces();
        self.kinds = (0..nf)
            .map(|f| {
                let (a, b) = self.face_cells(f);
                let fa = self.cell_fluid(a[0], a[1]);
                let fb = self.cell_fluid(b[0], b[1]);
                match (fa, fb) {
                    (true, true) => FaceKind::Fluid,
                    (false, false) => FaceKind::Dead,
                    _ => FaceKind::Wall,
                }
            })
            .collect();
        self.face_dof = vec![NO_DOF; nf];
        self.fluid_faces.clear();
        for f in 0..nf {
            if self.kinds[f] == FaceKind::Fluid {
                self.face_dof[f] = self.fluid_faces.len();
                self.fluid_faces.push(f);
            }
        }
        self.cell_dof = vec![NO_DOF; self.ncells()];
        self.fluid_cells.clear();
        for c in 0..self.ncells() {
            if !self.solid[c] {
                self.cell_dof[c] = self.fluid_cells.len();
                self.fluid_cells.push(c);
            }
        }
        self.build_samples();
    }

    /// Neighbour face of the same component in direction `dir` (0 = x, 1 = y) and sign.
    fn neighbour(&self, f: usize, dir: u8, plus: bool) -> Option<usize> {
        let (c, i, j) = self.face_ij(f);
        let (ni, nj) = match c {
            Comp::U => (self.nux() as isize, self.ny as isize),
            Comp::V => (self.nx as isize, self.nvy() as isize),
        };
        let (mut a, mut b) = (i as isize, j as isize);
        let d = if plus { 1 } else { -1 };
        if dir == 0 {
            a += d;
        } else {
            b += d;
        }
        if self.periodic {
            a = a.rem_euclid(ni);
            b = b.rem_euclid(nj);
        } else if a < 0 || b < 0 || a >= ni || b >= nj {
            return None;
        }
        let (a, b) = (a as usize, b as usize);
        Some(match c {
            Comp::U => self.uidx(a, b),
            Comp::V => self.vidx(a, b),
        })
    }

    fn build_samples(&mut self) {
        let mut s = Vec::new();
        for &f in &self.fluid_faces {
            for dir in 0..2u8 {
                for plus in [false, true] {
                    match self.neighbour(f, dir, plus) {
                        Some(g) => match self.kinds[g] {
                            FaceKind::Fluid => {
                                if plus {
                                    s.push(GradSample { kind: SampleKind::Pair, a: f, b: Some(g), dir });
                                }
                            }
                            FaceKind::Wall => s.push(GradSample { kind: SampleKind::OneSided, a: f, b: Some(g), dir }),
                            FaceKind::Dead => s.push(GradSample { kind: SampleKind::Ghost, a: f, b: Some(g), dir }),
                        },
                        None => s.push(GradSample { kind: SampleKind::Ghost, a: f, b: None, dir }),
                    }
                }
            }
        }
        // Periodic pair samples are pushed from the `plus` side only; in a 1-wide periodic
        // direction the face would pair with itself, which contributes nothing.
        s.retain(|x| !(x.kind == SampleKind::Pair && x.b == Some(x.a)));
        self.samples = s;
    }

    pub fn kind(&self, f: usize) -> FaceKind {
        self.kinds[f]
    }
    pub fn kinds(&self) -> &[FaceKind] {
        &self.kinds
    }
    pub fn fluid_faces(&self) -> &[usize] {
        &self.fluid_faces
    }
    pub fn face_dof(&self, f: usize) -> usize {
        self.face_dof[f]
    }
    pub fn fluid_cells(&self) -> &[usize] {
        &self.fluid_cells
    }
    pub fn cell_dof(&self, c: usize) -> usize {
        self.cell_dof[c]
    }
    pub fn samples(&self) -> &[GradSample] {
        &self.samples
    }

    /// Fluid-cell count times `h²`.
    pub fn fluid_measure(&self) -> f64 {
        self.fluid_cells.len() as f64 * self.h * self.h
    }

    /// Value of a gradient sample for the face field `u`.
    #[inline]
    pub fn sample_value<T: Real>(&self, s: &GradSample, u: &[T]) -> T {
        let ih = T::c(1.0 / self.h);
        match s.kind {
            SampleKind::Pair => (u[s.b.unwrap()] - u[s.a]) * ih,
            SampleKind::OneSided => u[s.a] * ih,
            SampleKind::Ghost => T::c(2.0) * u[s.a] * ih,
        }
    }

    #[inline]
    pub fn sample_weight(&self, s: &GradSample) -> f64 {
        match s.kind {
            SampleKind::Ghost => 0.5 * self.h * self.h,
            _ => self.h * self.h,
        }
    }

    /// Gradient energy matrix `Q` on fluid faces: `uᵀ Q u = ‖∇u‖²`.
    pub fn gradient_energy<T: Real>(&self) -> CsrMatrix<T> {
        let n = self.fluid_faces.len();
        let mut t = Triplets::with_capacity(n, n, 5 * n);
        for s in &self.samples {
            let a = self.face_dof[s.a];
            match s.kind {
                SampleKind::Pair => {
                    let b = self.face_dof[s.b.unwrap()];
                    t.push(a, a, T::one());
                    t.push(b, b, T::one());
                    t.push(a, b, -T::one());
                    t.push(b, a, -T::one());
                }
                SampleKind::OneSided => t.push(a, a, T::one()),
                SampleKind::Ghost => t.push(a, a, T::c(2.0)),
            }
        }
        t.to_csr()
    }

    /// `‖∇u‖²` over the sample set.
    pub fn grad_norm_sq<T: Real>(&self, u: &[T]) -> T {
        self.samples
            .iter()
            .map(|s| {
                let v = self.sample_value(s, u);
                T::c(self.sample_weight(s)) * v * v
            })
            .sum()
    }

    /// MAC kinetic quadrature `h² Σ_f w_f u_f²`, `w_f` = (fluid neighbours of f)/2.
    pub fn l2_norm_sq<T: Real>(&self, u: &[T]) -> T {
        let h2 = T::c(self.h * self.h);
        let mut s = T::zero();
        for (f, &k) in self.kinds.iter().enumerate() {
            let w = match k {
                FaceKind::Fluid => T::one(),
                FaceKind::Wall => T::c(0.5),
                FaceKind::Dead => continue,
            };
            s += w * u[f] * u[f];
        }
        s * h2
    }

    /// Discrete divergence at every cell.
    pub fn divergence<T: Real>(&self, u: &[T]) -> Vec<T> {
        let ih = T::c(1.0 / self.h);
        let mut d = vec![T::zero(); self.ncells()];
        for j in 0..self.ny {
            for i in 0..self.nx {
                let ir = if self.periodic { (i + 1) % self.nx } else { i + 1 };
                let jt = if self.periodic { (j + 1) % self.ny } else { j + 1 };
                d[self.cidx(i, j)] =
                    (u[self.uidx(ir, j)] - u[self.uidx(i, j)] + u[self.vidx(i, jt)] - u[self.vidx(i, j)]) * ih;
            }
        }
        d
    }

    /// Largest `|div u|` over fluid cells.
    pub fn max_divergence<T: Real>(&self, u: &[T]) -> T {
        let d = self.divergence(u);
        self.fluid_cells.iter().fold(T::zero(), |m, &c| m.max(d[c].abs()))
    }

    /// Gradient of a cell field on fluid faces (zero elsewhere).
    pub fn gradient<T: Real>(&self, p: &[T]) -> Vec<T> {
        let ih = T::c(1.0 / self.h);
        let mut g = vec![T::zero(); self.nfaces()];
        for &f in &self.fluid_faces {
            let (a, b) = self.face_cells(f);
            let ca = self.wrap_cell(a[0], a[1]).unwrap();
            let cb = self.wrap_cell(b[0], b[1]).unwrap();
            g[f] = (p[cb] - p[ca]) * ih;
        }
        g
    }

    /// Cell-centred average of the two faces of each component: `(u_c, v_c)`.
    pub fn cell_average<T: Real>(&self, u: &[T]) -> (Vec<T>, Vec<T>) {
        let half = T::c(0.5);
        let mut uc = vec![T::zero(); self.ncells()];
        let mut vc = vec![T::zero(); self.ncells()];
        for j in 0..self.ny {
            for i in 0..self.nx {
                let ir = if self.periodic { (i + 1) % self.nx } else { i + 1 };
                let jt = if self.periodic { (j + 1) % self.ny } else { j + 1 };
                let c = self.cidx(i, j);
                uc[c] = half * (u[self.uidx(i, j)] + u[self.uidx(ir, j)]);
                vc[c] = half * (u[self.vidx(i, j)] + u[self.vidx(i, jt)]);
            }
        }
        (uc, vc)
    }

    /// `∫ u_i` by the midpoint rule on fluid cells (cell averages of the faces).
    pub fn fluid_integral<T: Real>(&self, u: &[T]) -> [T; 2] {
        let (uc, vc) = self.cell_average(u);
        let h2 = T::c(self.h * self.h);
        let mut s = [T::zero(); 2];
        for &c in &self.fluid_cells {
            s[0] += uc[c];
            s[1] += vc[c];
        }
        [s[0] * h2, s[1] * h2]
    }

    /// Constant vector field `e` on every face adjacent to a fluid cell.
    pub fn constant_field<T: Real>(&self, e: [T; 2]) -> Vec<T> {
        let mut u = vec![T::zero(); self.nfaces()];
        for f in 0..self.nfaces() {
            if self.kinds[f] != FaceKind::Dead {
                u[f] = match self.face_ij(f).0 {
                    Comp::U => e[0],
                    Comp::V => e[1],
                };
            }
        }
        u
    }

    /// Mean over fluid cells.
    pub fn fluid_mean<T: Real>(&self, p: &[T]) -> T {
        let s: T = self.fluid_cells.iter().map(|&c| p[c]).sum();
        s / T::from_usize_lossy(self.fluid_cells.len().max(1))
    }

    /// `h² Σ_fluid p²`.
    pub fn cell_norm_sq<T: Real>(&self, p: &[T]) -> T {
        let s: T = self.fluid_cells.iter().map(|&c| p[c] * p[c]).sum();
        s * T::c(self.h * self.h)
    }
}
