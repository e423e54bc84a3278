//! Merton portfolio optimization under a multivariate Volterra square-root
//! variance model with Poisson jumps.
//!
//! The crate simulates the variance and wealth processes, solves the
//! Riccati–Volterra equations behind the optimal strategies, evaluates value
//! functions for exponential, power and log utility, and checks the
//! exponential-affine Laplace transform of the variance against Monte Carlo.

pub mod error;
pub mod grid;
pub mod kernels;
pub mod laplace;
pub mod merton;
pub mod params;
pub mod quadrature;
pub mod riccati;
pub mod sim;
pub mod special;

pub use error::{Error, NumericError, Result};
pub use grid::TimeGrid;
pub use kernels::{KernelKind, KernelSpec, ResolventCurve};
pub use params::{JumpMeasureQuadrature, JumpSpec, ModelInputs, ModelParams};
pub use riccati::{RiccatiSolution, UtilityKind, UtilityProblem};
