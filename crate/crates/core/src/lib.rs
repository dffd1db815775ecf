//! Numerical and symbolic laboratory for the Hardy–Weyl algebra generated by
//! the Hardy operator `H`, the Volterra operator `V` and multiplication by
//! `x` on L²[0,1].

pub mod error;
pub mod poly;
pub mod quad;
pub mod forms;
pub mod eigen;
pub mod linalg;
pub mod operators;
pub mod hardy;
pub mod calkin;
pub mod alglat;
pub mod scan;

pub use error::{LabError, Result};
pub use forms::ClosedForm;
pub use quad::{GridFunction, GridHandle, QuadratureGrid};

/// Chain polynomials `p_n(u)` carry exact rational coefficients.
pub type RationalPoly = poly::Poly<num_rational::BigRational>;
/// Floating point polynomials for evaluation.
pub type RealPoly = poly::Poly<f64>;
