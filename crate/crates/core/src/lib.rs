//! Early-exercise boundaries and prices for American vanilla and floating-strike
//! Asian options under linear and nonlinear Black-Scholes models.
//!
//! The American call is handled in the fixed-domain variables
//! `x = ln(ρ(τ)/S)`, `Π = V - S ∂V/∂S`, which move the free boundary into a
//! nonlocal coefficient. For constant volatility the boundary also solves a
//! singular integral equation; [`integral_eq`] implements that route and a
//! semi-explicit price formula. [`pde`] marches the transformed parabolic
//! problem for any of the volatility models in [`model`], and [`asian`] does
//! the same for the floating-strike Asian call. [`gamma_eq`] covers the
//! risk-adjusted pricing methodology (hedging interval, Γ-equation, bid-ask,
//! calibration) and [`oracles`] holds independent reference pricers.

// `!(x > 0.0)` is how parameter checks reject NaN alongside bad values, and
// stencil loops index several arrays by the same node.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod asian;
pub mod boundary;
pub mod error;
pub mod gamma_eq;
pub mod integral_eq;
pub mod model;
pub mod numerics;
pub mod oracles;
pub mod pde;
pub mod psi;

pub use boundary::BoundaryCurve;
pub use error::{Error, Result};
pub use model::{MarketParams, VolatilitySpec};
