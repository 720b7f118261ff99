//! Spectral continuation solver for the complex Monge-Ampere equation with a
//! gradient term,
//!
//! ```text
//! det(g_{i jbar} + a_i u_jbar + conj(a_j) u_i + u_{i jbar}) = e^{F + b} det(g_{i jbar}),
//! ```
//!
//! on flat complex tori of dimension 1 to 3, together with monitors for the
//! identities and bounds its solutions satisfy.

pub mod app;
pub mod bundle;
pub mod config;
pub mod hermitian;
pub mod monitors;
pub mod operator;
pub mod solver;
pub mod torus;
