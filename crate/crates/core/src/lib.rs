//! Dynamic ECME (DECME) accelerators for EM algorithms.
//!
//! The crate is organised around a small plug-in surface, [`em::EmModel`],
//! and an engine ([`em::run`]) that accelerates any model's EM map with
//! successive overrelaxation (SOR/SORF) or one of the conjugate-direction
//! style DECME variants. Everything else supports that engine:
//!
//! * [`spectral`]: quadratic surrogates of a log-likelihood near its maximum
//!   and the closed-form spectral quantities of EM and SOR on them.
//! * [`line_search`]: feasible-interval computation for constrained
//!   parameter lines and a derivative-free scalar maximizer.
//! * [`models`]: univariate Gaussian mixtures, the bivariate t, and the
//!   surrogate wrapped as a model.
//! * [`dm_probe`]: finite-difference estimates of the EM rate matrix.
//! * [`checks`]: randomized numerical checks of the SOR and DECME_v1
//!   convergence results, and of the DM probe, on surrogates.
//! * [`protocol`]: the benchmark protocol (l_max pre-run, races, summaries).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// A failed run hands back its partial trace.
#![allow(clippy::result_large_err)]

pub mod checks;
pub mod dm_probe;
pub mod em;
pub mod error;
pub mod line_search;
pub mod models;
pub mod protocol;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};

/// A point in the parameter space.
pub type ParamVec = nalgebra::DVector<f64>;

/// Dense real matrix used throughout.
pub type Matrix = nalgebra::DMatrix<f64>;
