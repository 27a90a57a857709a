//! Volterra convolutions `∫_0^t K(t-s) X(s) ds` on a uniform time grid.
//!
//! Kernel and history samples are small tensors stored flat (row-major). The contraction
//! pairs the trailing axes of the kernel with all axes of the history:
//! `∗` matrix-vector, `∗₁` vector-vector, `∗₂` double contraction, `∗₃` triple contraction.

use crate::error::{Error, Result};
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Contraction {
    /// `A ∗ b`: kernel rank 2, history rank 1, vector result.
    Star,
    /// `a ∗₁ b`: kernel rank 1, history rank 1, scalar result.
    Star1,
    /// `C ∗₂ A`: kernel rank ≥ 2, history rank 2; the last two kernel axes are contracted.
    Star2,
    /// `C ∗₃ D`: kernel rank 3, history rank 3, scalar result.
    Star3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    /// Product trapezoid rule on the grid nodes.
    Trapezoid,
    /// `Δt Σ_{m=1}^{n} K(t_{n+1-m}) X(t_m)`: the sum an implicit-Euler recursion produces.
    RightEndpoint,
}

/// Flat samples of a tensor-valued time series.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorSeries<T> {
    pub shape: Vec<usize>,
    pub samples: Vec<Vec<T>>,
}

impl<T: Real> TensorSeries<T> {
    pub fn new(shape: Vec<usize>, samples: Vec<Vec<T>>) -> Result<Self> {
        let size: usize = shape.iter().product();
        if samples.iter().any(|s| s.len() != size) {
            return Err(Error::Shape(format!("samples do not match tensor shape {shape:?}")));
        }
        Ok(Self { shape, samples })
    }

    pub fn scalar(values: &[T]) -> Self {
        Self { shape: vec![], samples: values.iter().map(|&v| vec![v]).collect() }
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn check_ranks(mode: Contraction, k: &[usize], x: &[usize]) -> Result<Vec<usize>> {
    let ok = match mode {
        Contraction::Star => k.len() == 2 && x.len() == 1,
        Contraction::Star1 => k.len() == 1 && x.len() == 1,
        Contraction::Star2 => k.len() >= 2 && x.len() == 2,
        Contraction::Star3 => k.len() == 3 && x.len() == 3,
    };
    // a rank-0 kernel scales any history
    if k.is_empty() {
        return Ok(x.to_vec());
    }
    if !ok || k[k.len() - x.len()..] != *x {
        return Err(Error::Shape(format!("{mode:?}: kernel shape {k:?} does not contract with history shape {x:?}")));
    }
    Ok(k[..k.len() - x.len()].to_vec())
}

/// Discrete convolution at every node; node 0 is zero.
pub fn volterra_convolve<T: Real>(
    kernel: &TensorSeries<T>,
    history: &TensorSeries<T>,
    mode: Contraction,
    dt: f64,
    rule: Rule,
) -> Result<TensorSeries<T>> {
    if kernel.len() != history.len() {
        return Err(Error::Shape(format!("kernel has {} nodes, history {}", kernel.len(), history.len())));
    }
    let out_shape = check_ranks(mode, &kernel.shape, &history.shape)?;
    let nx: usize = history.shape.iter().product();
    let nout: usize = out_shape.iter().product();
    let scale_only = kernel.shape.is_empty();
    let n = kernel.len();
    let mut out = vec![vec![T::zero(); nout]; n];
    let dtt = T::c(dt);
    let half = T::c(0.5);
    let apply = |acc: &mut [T], kk: &[T], x: &[T], w: T| {
        if scale_only {
            for (a, &xv) in acc.iter_mut().zip(x) {
                *a += w * kk[0] * xv;
            }
        } else {
            for (o, a) in acc.iter_mut().enumerate() {
                let row = &kk[o * nx..(o + 1) * nx];
                let mut s = T::zero();
                for (r, &xv) in row.iter().zip(x) {
                    s += *r * xv;
                }
                *a += w * s;
            }
        }
    };
    for (t, acc) in out.iter_mut().enumerate().skip(1) {
        match rule {
            Rule::Trapezoid => {
                for m in 0..=t {
                    let w = if m == 0 || m == t { half * dtt } else { dtt };
                    apply(acc, &kernel.samples[t - m], &history.samples[m], w);
                }
            }
            Rule::RightEndpoint => {
                for m in 1..=t {
                    apply(acc, &kernel.samples[t + 1 - m], &history.samples[m], dtt);
                }
            }
        }
    }
    Ok(TensorSeries { shape: out_shape, samples: out })
}

/// Cumulative trapezoid `∫_0^{t_k} X` of a field history on a uniform grid.
pub fn cumulative_trapezoid<T: Real>(history: &[Vec<T>], dt: f64) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = Vec::with_capacity(history.len());
    if history.is_empty() {
        return out;
    }
    out.push(vec![T::zero(); history[0].len()]);
    let h = T::c(0.5 * dt);
    for k in 1..history.len() {
        let v = out[k - 1].iter().zip(&history[k - 1]).zip(&history[k]).map(|((&s, &a), &b)| s + h * (a + b)).collect();
        out.push(v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_kernel_gives_time() {
        let n = 11;
        let k = TensorSeries::scalar(&vec![1.0f64; n]);
        let x = TensorSeries::scalar(&vec![1.0f64; n]);
        let r = volterra_convolve(&k, &x, Contraction::Star, 0.1, Rule::Trapezoid).unwrap();
        for (i, s) in r.samples.iter().enumerate() {
            assert!((s[0] - 0.1 * i as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn rank_mismatch_is_an_error() {
        let k = TensorSeries::new(vec![2, 2], vec![vec![1.0f64; 4]; 3]).unwrap();
        let x = TensorSeries::new(vec![3], vec![vec![1.0f64; 3]; 3]).unwrap();
        assert!(matches!(volterra_convolve(&k, &x, Contraction::Star, 0.1, Rule::Trapezoid), Err(Error::Shape(_))));
        assert!(volterra_convolve(&k, &x, Contraction::Star3, 0.1, Rule::Trapezoid).is_err());
    }
}
