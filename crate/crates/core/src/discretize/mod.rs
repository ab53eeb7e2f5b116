//! Potentials, quadrature on the support ball, Nyström assembly of the
//! Birman–Schwinger matrix `K(z) ≈ V R₀(z) χ`, and the Fourier-space oracles.
//!
//! `χ` is the indicator of the quadrature ball. Matrix pipelines are
//! three-dimensional.

mod assembly;
mod fourier;
mod potential;
mod quadrature;

pub use assembly::{assemble_bs, assemble_bs_dense, assemble_bs_with_dz, zero_energy_operator, BSOperator, BsMatrix, Factored};
pub use fourier::{
    apply_resolvent_fourier, apply_symbol, fourier_grid_eigenvalues, radial_grid_eigenvalues, EigenOracle, GridFunction,
    RadialEigenOracle,
};
pub use potential::{write_grid_file, GridSamples, Potential, PotentialKind};
pub use quadrature::{
    ball_inverse_integral, ball_inverse_square_integral, ball_log_integral, build_quadrature, build_product_rule, build_quadrature_for, build_quadrature_with_breaks,
    DiagCorrection, Quadrature,
};

pub(crate) fn norm3(x: [f64; 3]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

pub(crate) fn dist3(x: [f64; 3], y: [f64; 3]) -> f64 {
    norm3([x[0] - y[0], x[1] - y[1], x[2] - y[2]])
}
