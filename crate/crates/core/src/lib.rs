//! Scattering resonances of `√(−Δ) + V` in odd dimensions.
//!
//! The free resolvent of the half-Laplacian continues analytically to the
//! logarithmic cover Λ of the punctured plane. This crate evaluates that
//! continuation ([`freeresolvent`]), discretizes the Birman–Schwinger operator
//! `V R₀(z) χ` by a Nyström rule on the support ball ([`discretize`]), locates
//! zeros of `det(I + K(z))` on Λ by the argument principle ([`resonances`]),
//! and assembles the on-shell scattering matrix ([`scattering`]).

pub mod discretize;
pub mod error;
pub mod freeresolvent;
pub mod linalg;
pub mod logcover;
pub mod oracles;
pub mod quad;
pub mod resonances;
pub mod scattering;
pub mod validate;

pub use error::{Error, Result};
pub use logcover::SheetPoint;
