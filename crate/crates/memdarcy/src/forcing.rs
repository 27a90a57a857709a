//! Body forces `f(x, t) = h(t) [a_curl curl φ + a_grad ∇q]` on the unit square with
//! `φ = sin²(πx) sin²(πy)` and `q = cos(πx) cos(πy)`.
//!
//! Both parts have zero normal component on `∂Ω`. On a MAC grid the curl part is sampled
//! as the discrete curl of nodal `φ` and the gradient part as the discrete gradient of
//! cell-centred `q`, so the discrete Helmholtz split is exact.

use crate::error::{Error, Result};
use crate::mac::{Comp, FaceKind, MacGrid};
use crate::Real;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeProfile {
    Constant,
    /// `sin(ω t)`
    Sine { omega: f64 },
    /// `1 - e^{-r t}`
    Ramp { rate: f64 },
}

impl TimeProfile {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant => 1.0,
            TimeProfile::Sine { omega } => (omega * t).sin(),
            TimeProfile::Ramp { rate } => 1.0 - (-rate * t).exp(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyForce {
    pub curl: f64,
    pub grad: f64,
    pub profile: TimeProfile,
}

impl Default for BodyForce {
    fn default() -> Self {
        Self { curl: 1.0, grad: 1.0, profile: TimeProfile::Constant }
    }
}

pub fn stream(x: f64, y: f64) -> f64 {
    let (a, b) = ((PI * x).sin(), (PI * y).sin());
    a * a * b * b
}

pub fn potential(x: f64, y: f64) -> f64 {
    (PI * x).cos() * (PI * y).cos()
}

impl BodyForce {
    pub fn zero() -> Self {
        Self { curl: 0.0, grad: 0.0, profile: TimeProfile::Constant }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.curl.is_finite() && self.grad.is_finite()) {
            return Err(Error::Config("forcing: amplitudes must be finite".into()));
        }
        match self.profile {
            TimeProfile::Sine { omega } if !omega.is_finite() => Err(Error::Config("forcing.profile.omega must be finite".into())),
            TimeProfile::Ramp { rate } if !(rate.is_finite() && rate > 0.0) => {
                Err(Error::Config("forcing.profile.rate must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// Closed-form value.
    pub fn value(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let h = self.profile.value(t);
        let (sx, sy) = ((PI * x).sin(), (PI * y).sin());
        let (cx, cy) = ((PI * x).cos(), (PI * y).cos());
        let d1 = PI * (2.0 * PI * x).sin() * sy * sy;
        let d2 = PI * sx * sx * (2.0 * PI * y).sin();
        [
            h * (self.curl * d2 - self.grad * PI * sx * cy),
            h * (-self.curl * d1 - self.grad * PI * cx * sy),
        ]
    }

    /// Time-independent face samples of the curl part and of the gradient part on the
    /// unit square grid (zero on non-fluid faces).
    pub fn spatial_parts<T: Real>(&self, grid: &MacGrid) -> [Vec<T>; 2] {
        let h = grid.h;
        let mut c = vec![T::zero(); grid.nfaces()];
        let mut g = vec![T::zero(); grid.nfaces()];
        for f in 0..grid.nfaces() {
            if grid.kind(f) != FaceKind::Fluid {
                continue;
            }
            let (comp, i, j) = grid.face_ij(f);
            let (x, y) = (i as f64 * h, j as f64 * h);
            match comp {
                Comp::U => {
                    c[f] = T::c((stream(x, y + h) - stream(x, y)) / h);
                    g[f] = T::c((potential(x + 0.5 * h, y + 0.5 * h) - potential(x - 0.5 * h, y + 0.5 * h)) / h);
                }
                Comp::V => {
                    c[f] = T::c(-(stream(x + h, y) - stream(x, y)) / h);
                    g[f] = T::c((potential(x + 0.5 * h, y + 0.5 * h) - potential(x + 0.5 * h, y - 0.5 * h)) / h);
                }
            }
        }
        [c, g]
    }

    /// Face samples `f(·, t)`.
    pub fn sample<T: Real>(&self, grid: &MacGrid, t: f64) -> Vec<T> {
        let [c, g] = self.spatial_parts::<T>(grid);
        let (a, b) = (T::c(self.curl * self.profile.value(t)), T::c(self.grad * self.profile.value(t)));
        c.iter().zip(&g).map(|(&x, &y)| a * x + b * y).collect()
    }

    /// `f(·, t_k)` at every node.
    pub fn history<T: Real>(&self, grid: &MacGrid, t: &[f64]) -> Vec<Vec<T>> {
        let [c, g] = self.spatial_parts::<T>(grid);
        t.iter()
            .map(|&s| {
                let h = self.profile.value(s);
                let (a, b) = (T::c(self.curl * h), T::c(self.grad * h));
                c.iter().zip(&g).map(|(&x, &y)| a * x + b * y).collect()
            })
            .collect()
    }

    /// Cell-centred `q` scaled by the gradient amplitude (the exact homogenized pressure
    /// when the curl part is absent and the kernel is isotropic).
    pub fn potential_cells<T: Real>(&self, grid: &MacGrid) -> Vec<T> {
        (0..grid.ncells())
            .map(|c| {
                let [x, y] = grid.cell_pos(c);
                T::c(self.grad * potential(x, y))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curl_part_is_discretely_solenoidal() {
        let grid = MacGrid::open(16, 16, 1.0 / 16.0, false);
        let f = BodyForce { curl: 1.0, grad: 0.0, profile: TimeProfile::Constant };
        let s: Vec<f64> = f.sample(&grid, 0.0);
        assert!(grid.max_divergence(&s) < 1e-12);
    }

    #[test]
    fn closed_form_matches_samples() {
        let grid = MacGrid::open(256, 256, 1.0 / 256.0, false);
        let f = BodyForce::default();
        let s: Vec<f64> = f.sample(&grid, 0.3);
        let fc = grid.uidx(100, 37);
        let [x, y] = grid.face_pos(fc);
        assert!((s[fc] - f.value(x, y, 0.3)[0]).abs() < 1e-3);
    }
}
