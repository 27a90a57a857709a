//! The mollifier `S_δ` and the generic cut-off `φ_ε` used to build `G = S_δ(φ_ε F)`.

use crate::error::{Error, Result};
use crate::geometry::bump;
use crate::Real;

/// Discrete convolution with `ζ_δ(y) = δ⁻² ζ(y/δ)`, `ζ` the radial bump supported in the
/// ball of radius 1/2, on the cell centres of an `n × n` grid of the unit square. Values
/// outside the square are taken as zero.
#[derive(Clone, Debug)]
pub struct Mollifier {
    pub delta: f64,
    pub n: usize,
    taps: Vec<(isize, isize, f64)>,
}

impl Mollifier {
    pub fn new(delta: f64, n: usize) -> Result<Self> {
        let h = 1.0 / n as f64;
        if !(delta >= 2.0 * h - 1e-12) {
            return Err(Error::Config(format!("smoothing width δ = {delta} is below two grid spacings ({h})")));
        }
        let reach = (0.5 * delta / h).ceil() as isize;
        let mut taps = Vec::new();
        for b in -reach..=reach {
            for a in -reach..=reach {
                let r = ((a * a + b * b) as f64).sqrt() * h;
                let w = bump(2.0 * r / delta);
                if w > 0.0 {
                    taps.push((a, b, w));
                }
            }
        }
        let s: f64 = taps.iter().map(|t| t.2).sum();
        for t in &mut taps {
            t.2 /= s;
        }
        Ok(Self { delta, n, taps })
    }

    /// Support radius `δ/2` in length units.
    pub fn radius(&self) -> f64 {
        0.5 * self.delta
    }

    pub fn taps(&self) -> usize {
        self.taps.len()
    }

    pub fn smooth<T: Real>(&self, f: &[T]) -> Vec<T> {
        self.smooth_with(f, T::zero(), |acc: &mut T, w: T, v: T| *acc += w * v)
    }

    pub fn smooth_vec<T: Real>(&self, f: &[[T; 2]]) -> Vec<[T; 2]> {
        self.smooth_with(f, [T::zero(); 2], |acc: &mut [T; 2], w: T, v: [T; 2]| {
            acc[0] += w * v[0];
            acc[1] += w * v[1];
        })
    }

    fn smooth_with<V: Copy, T: Real>(&self, f: &[V], zero: V, add: impl Fn(&mut V, T, V)) -> Vec<V> {
        let n = self.n as isize;
        assert_eq!(f.len(), (n * n) as usize);
        let taps: Vec<(isize, isize, T)> = self.taps.iter().map(|&(a, b, w)| (a, b, T::c(w))).collect();
        let mut out = vec![zero; f.len()];
        for j in 0..n {
            for i in 0..n {
                let mut acc = zero;
                for &(a, b, w) in &taps {
                    let (x, y) = (i - a, j - b);
                    if x >= 0 && y >= 0 && x < n && y < n {
                        add(&mut acc, w, f[(y * n + x) as usize]);
                    }
                }
                out[(j * n + i) as usize] = acc;
            }
        }
        out
    }
}

/// Cut-off `φ_ε(d)` as a function of the distance to `∂Ω`: 0 below `3ε/8`, 1 from `ε/2`
/// on, `C¹` smoothstep in between.
pub fn generic_cutoff(eps: f64, dist: f64) -> f64 {
    let s = ((dist - 0.375 * eps) / (0.125 * eps)).clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taps_are_symmetric() {
        let m = Mollifier::new(0.25, 32).unwrap();
        for &(a, b, w) in &m.taps {
            let twin = m.taps.iter().find(|t| t.0 == -a && t.1 == -b).unwrap();
            assert_eq!(twin.2, w);
        }
        assert!(Mollifier::new(0.05, 32).is_err());
    }

    #[test]
    fn cutoff_levels() {
        assert_eq!(generic_cutoff(0.1, 0.03), 0.0);
        assert_eq!(generic_cutoff(0.1, 0.05), 1.0);
        assert!((generic_cutoff(0.1, 0.04375) - 0.5).abs() < 1e-12);
    }
}
