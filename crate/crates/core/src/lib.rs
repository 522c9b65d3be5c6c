//! Large and moderate deviations for compound sums `S_{N_n} = X_1 + … + X_{N_n}`.
//!
//! The crate is organized bottom-up:
//!
//! * [`dual`]: finite-dimensional dual pairs, covariance operators and extended reals;
//! * [`summand`]: laws of the i.i.d. summands (finite support, Gaussian, grid functions);
//! * [`counting`]: the counting processes `N_n` and their cumulant generating functions;
//! * [`special`]: the Mittag-Leffler function used by the fractional Poisson model;
//! * [`variational`]: Legendre transforms, rate functions and moment limits;
//! * [`montecarlo`]: simulation, exact enumeration and importance sampling;
//! * [`config`] and [`runner`]: the declarative experiment runner behind the CLI.

pub mod config;
pub mod counting;
pub mod dual;
pub mod error;
pub mod montecarlo;
pub mod numeric;
pub mod runner;
pub mod special;
pub mod summand;
pub mod variational;

pub use error::{Error, Result};
