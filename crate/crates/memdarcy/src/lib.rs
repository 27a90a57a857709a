//! Numerical laboratory for the homogenization of unsteady Stokes flow in periodically
//! perforated domains (Darcy's law with memory).

pub mod aux_correctors;
pub mod cell_corrector;
pub mod checks;
pub mod config;
pub mod darcy_memory;
pub mod error;
pub mod expansion_error;
pub mod fine_scale;
pub mod forcing;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod mac;
pub mod pipeline;
pub mod poisson;
pub mod quadrature;
pub mod scalar;
pub mod stokes;
pub mod time;
pub mod volterra;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision instances of the generic core.
pub type Cell = geometry::CellGeometry<f64>;
pub type Perforated = geometry::PerforatedDomain<f64>;
pub type Cutoff = geometry::CutoffFunction<f64>;
pub type Trajectory = cell_corrector::CorrectorTrajectory<f64>;
pub type Flux = aux_correctors::FluxCorrector<f64>;
pub type Bogovskii = aux_correctors::BogovskiiCorrector<f64>;
pub type Homogenized = darcy_memory::HomogenizedSolution<f64>;
pub type Fine = fine_scale::FineScaleSolution<f64>;
pub type Series = volterra::TensorSeries<f64>;
