//! Special functions and adaptive quadrature used by the analytic formulas.

mod quad;
mod special;

pub use quad::{integrate_1d, integrate_2d, QuadratureResult, Rect, Tolerance};
pub use special::{
    bessel_i01e, bessel_i0e, bessel_i1e, bessel_i_scaled, erf, erfc, erfcx, BesselOrder,
};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NumericsError {
    #[error("{function}: argument {argument} outside the domain")]
    Domain {
        function: &'static str,
        argument: f64,
    },
    #[error("integrand is not finite at {at:?}")]
    NonFinite { at: (f64, f64) },
    #[error(
        "quadrature did not converge after {subdivisions} subdivisions \
         (best value {}, error estimate {})",
        best.value, best.abs_error_estimate
    )]
    NonConvergent {
        best: QuadratureResult,
        subdivisions: usize,
    },
    #[error("invalid integration bounds [{a}, {b}]")]
    Bounds { a: f64, b: f64 },
}
