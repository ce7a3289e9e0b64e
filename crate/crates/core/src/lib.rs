//! Numerical laboratory for Berezin-Toeplitz quantization on closed-form
//! model geometries: the flat Bargmann plane and the hyperbolic upper
//! half-plane with its modular quotient.
//!
//! The crate is organized bottom-up:
//!
//! * [`numerics`] — complex linear algebra, branch-continued determinant
//!   powers, Gaussian integrals, quadrature rules, asymptotic fitting;
//! * [`localmodel`] — the flat local model kernel on R^{2n} and the analytic
//!   leading-coefficient predictors for norms and intersections;
//! * [`bargmann`] — the flat geometry X = C: exact Bergman kernel,
//!   Bohr-Sommerfeld circles, curve states, inner products, Toeplitz elements;
//! * [`hyperbolic`] — the upper half-plane and SL2(Z) quotient: Moebius
//!   machinery, coset enumeration, relative Poincare series, Petersson norms;
//! * [`harness`] — p-sweep experiment runners that fit exponents and
//!   coefficients and compare them against the analytic predictors.

pub mod bargmann;
pub mod harness;
pub mod hyperbolic;
pub mod localmodel;
pub mod numerics;

pub use numerics::C64;
