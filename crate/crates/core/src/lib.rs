//! Learning the means of separated mixtures by testing candidate points in the
//! Fourier domain.
//!
//! The crate is organised bottom-up:
//!
//! - [`mixture`] and [`geometry`]: mixture models, separation, ε-closeness.
//! - [`rng`] and [`sampling`]: reproducible streams and mixture samplers.
//! - [`tester`]: the Gaussian-truncated characteristic-function tester.
//! - [`learner`]: candidate generation, majority voting and clustering.
//! - [`family`]: the general location-family tester and reductions.
//! - [`hard`]: moment-matched hard instances and total-variation certificates.
//! - [`verify`]: numeric check suites shared by the tests and the CLI.

// Lanczos and quadrature coefficients keep their published digits; `!(x > 0.0)`
// guards are deliberate so that NaN inputs are rejected.
#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod family;
pub mod geometry;
pub mod hard;
pub mod learner;
pub mod mixture;
pub mod optim;
pub mod quad;
pub mod rng;
pub mod sampling;
pub mod special;
pub mod sum;
pub mod tester;
pub mod verify;

mod error;

pub use error::{Error, Result};
pub use mixture::{FamilyId, MixtureModel};
pub use rng::RngStream;
