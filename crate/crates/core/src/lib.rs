//! Numerical laboratory for anisotropic (Finsler) heat flow on flat periodic
//! tori: metric families and their fundamental tensors, curvature and
//! S-curvature sampling, discrete Finsler differential operators, geodesic
//! distance, the nonlinear heat equation, Ricci flow coupling, and pointwise
//! verification of parabolic gradient and Harnack estimates.

pub mod analytic;
pub mod error;
pub mod flow;
pub mod geodesic;
pub mod grid;
pub mod heat;
pub mod linalg;
pub mod bounds;
pub mod calculus;
pub mod curvature;
pub mod measure;
pub mod metric;
pub mod run;

pub mod scenario;
pub mod verify;

pub use error::{FinslerError, Result};
pub use grid::{CovectorField, ScalarField, TorusGrid, VectorField};
pub use measure::{MeasureField, MeasureKind};
pub use metric::{direction_quadrature, FinslerStructure, MetricFamily};
