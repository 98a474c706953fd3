//! Solver library for normalized solutions of nonlinear Schrödinger equations
//! with a spatially modulated subcritical nonlinearity and a fixed
//! supercritical one.
//!
//! The library is organized around the variational structure of the problem:
//!
//! * [`landscape`] — scalar analysis of the constrained energy: interpolation
//!   exponents, best Gagliardo–Nirenberg/Sobolev constants, the lower-bound
//!   profile in terms of the gradient norm, its thresholds, and the smooth
//!   truncation used to cap the supercritical term.
//! * [`field`] — periodic-box discretization with spectral derivatives,
//!   norms, the full and truncated energy functionals and their L²-gradients.
//! * [`potential`] — bump-sum coefficient functions, their validation, and
//!   the barycenter machinery that localizes low-energy states near the
//!   coefficient maxima.
//! * [`optimizer`] — sphere-constrained projected gradient descent producing
//!   one local minimizer per localization region, with Lagrange multiplier
//!   extraction and ordering diagnostics.
//! * [`dynamics`] — split-step time integration of the associated
//!   time-dependent equation and the orbital-stability experiment.

pub mod dynamics;
pub mod field;
pub mod landscape;
pub mod optimizer;
pub mod potential;

pub use field::{Coefficient, Field, FieldError, Grid};
pub use landscape::{EnergyFloor, LandscapeError, LandscapeReport, ProblemParams, TruncationProfile};
pub use optimizer::{MinimizerRecord, MultiplicityReport, OptimError, SolverSettings};
pub use potential::{LocalizationConfig, Peak, PotentialError, PotentialSpec};
