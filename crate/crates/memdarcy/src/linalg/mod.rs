//! Sparse linear algebra used by the elliptic and Stokes solvers.

pub mod cg;
pub mod cholesky;
pub mod ordering;
pub mod sparse;

pub use cg::{pcg, CgStats};
pub use cholesky::SparseCholesky;
pub use sparse::{dot, norm2, norm_inf, CsrMatrix, Triplets};
