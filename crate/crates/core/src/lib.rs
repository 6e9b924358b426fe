//! Density estimation on `[0,1]^d` under Wasserstein loss.
//!
//! The crate is organised by role:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`haar`] | dyadic cubes, tensor Haar system, analysis and synthesis |
//! | [`besov`] | Besov sequence norms of any smoothness |
//! | [`density`] | grid densities, test-density families, exact sampling |
//! | [`estimators`] | empirical, histogram and lower-bounded estimators |
//! | [`transport`] | exact / 1-d / Sinkhorn solvers and certified bounds on `W_p` |
//! | [`resample`] | alias tables and the estimator resample distribution |
//! | [`harness`] | rate, trade-off, sandwich and not-a-norm experiments |
//!
//! Everything is a pure function of its inputs; randomness always enters
//! through an explicit 64-bit seed (see [`rng`]).

pub mod besov;
pub mod density;
pub mod error;
pub mod estimators;
pub mod haar;
pub mod harness;
pub mod resample;
pub mod rng;
mod quad;
pub mod transport;

pub use error::{Error, Result};
