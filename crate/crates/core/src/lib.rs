//! Heat-kernel score fields for diffusion models: quadrature evaluation of
//! ∇log p and D²log p, closed-form Hessian bounds and the sweeps that check
//! them, blow-up counter-examples, and an exponential-integrator sampler with
//! convergence metrics.

pub mod bounds;
pub mod counterexample;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod quadrature;
pub mod report;
mod rng;
pub mod sampler;
pub mod scorefield;
pub mod targets;

pub use error::{Error, Result};
