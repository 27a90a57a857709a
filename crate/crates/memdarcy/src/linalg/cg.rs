//! Jacobi-preconditioned conjugate gradients.

use super::sparse::{dot, CsrMatrix};
use crate::error::{Error, Result};
use crate::Real;

/// Convergence record of a CG solve.
#[derive(Clone, Debug)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
    /// Relative residual every 50 iterations, for diagnostics on failure.
    pub history: Vec<f64>,
}

/// Solve the SPD system `A x = b` starting from `x`.
///
/// Stops once `‖b - A x‖ <= tol ‖b‖`; returns an error carrying the residual history when
/// `max_iter` is reached first.
pub fn pcg<T: Real>(a: &CsrMatrix<T>, b: &[T], x: &mut [T], tol: f64, max_iter: usize) -> Result<CgStats> {
    let n = b.len();
    let diag = a.diagonal();
    let minv: Vec<T> = diag
        .iter()
        .map(|&d| if d > T::zero() { T::one() / d } else { T::one() })
        .collect();
    let bnorm = dot(b, b).sqrt();
    if bnorm == T::zero() {
        x.iter_mut().for_each(|v| *v = T::zero());
        return Ok(CgStats { iterations: 0, relative_residual: 0.0, history: vec![] });
    }
    let ax = a.mul_vec(x);
    let mut r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
    let mut z: Vec<T> = r.iter().zip(&minv).map(|(&ri, &mi)| ri * mi).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];
    let mut history = Vec::new();
    let tol_t = T::c(tol);
    for it in 0..=max_iter {
        let rel = dot(&r, &r).sqrt() / bnorm;
        if it % 50 == 0 {
            history.push(rel.to_f64_lossy());
        }
        if rel <= tol_t {
            return Ok(CgStats { iterations: it, relative_residual: rel.to_f64_lossy(), history });
        }
        if it == max_iter {
            break;
        }
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            return Err(Error::Solver(format!("CG breakdown at iteration {it}: pᵀAp = {pap}")));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] * minv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Convergence { iterations: max_iter, history })
}
