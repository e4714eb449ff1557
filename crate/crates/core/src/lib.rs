//! Invariant beta-ensembles built from switched free/commuting matrix
//! diffusions, their eigenvalue SDEs, and the Gauss–Wigner crossover
//! densities `rho_c(x) ∝ 1/|D_{-c}(ix)|^2`.
//!
//! Layout:
//!
//! - [`special_fn`]: `D_{-c}(i x)` by contour quadrature and by integrating
//!   the Weber equation, plus `ln Γ`.
//! - [`density`]: Gaussian, semicircle, crossover and finite-N corrected
//!   densities, Stieltjes transforms and residual checks.
//! - [`eigen_sde`]: Euler–Maruyama integration of the Dyson-type gas with
//!   ordering constraint (fixed beta, crossover `c/N`, switched).
//! - [`matrix_process`]: the full symmetric matrix diffusion alternating
//!   free and commuting slices, with a Jacobi eigensolver.
//! - [`spectral_stats`]: histograms, spacing statistics, Wigner surmise,
//!   KS distances and moments with jackknife errors.

pub mod density;
pub mod eigen_sde;
pub mod error;
pub mod io;
pub mod matrix_process;
pub mod rng;
pub mod special_fn;
pub mod spectral_stats;

pub use error::{Error, Result};
pub use num_complex::Complex64 as ComplexVal;
pub use spectral_stats::SpectrumSample;
