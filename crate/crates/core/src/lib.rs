//! Structured-grid solver library for the d-dimensional Allen-Cahn equation
//!
//! ```text
//! dphi/dt = eps^2 * laplace(phi) - f(phi),      f(phi) = phi^3 - phi,
//! ```
//!
//! on square domains with homogeneous Neumann, homogeneous Dirichlet, or
//! periodic boundary conditions (d = 1, 2, 3).
//!
//! The production integrator ([`scheme`]) is a two-level finite-difference
//! scheme that is explicit in diffusion and trapezoidal in the reaction term;
//! each node update reduces to one real cubic root with a closed-form solution,
//! so a step is a single embarrassingly parallel sweep. Under the parameter
//! conditions checked by [`scheme::derive_params`] the scheme preserves the
//! discrete maximum principle (max-norm bound 1) and dissipates the discrete
//! free energy; [`diagnostics`] provides the corresponding monitors.
//!
//! [`kinetic`] contains the mesoscopic lattice-Boltzmann formulation the
//! macroscopic scheme is derived from; its zeroth moment reproduces
//! [`scheme::step`] to rounding accuracy and serves as a derivation-level
//! oracle in the test suite. [`baselines`] has a fully explicit scheme and a
//! Crank-Nicolson scheme for stability/accuracy comparisons, and [`problems`]
//! defines the benchmark initial conditions and exact solutions.

pub mod baselines;
pub mod diagnostics;
pub mod grid;
pub mod kinetic;
pub mod problems;
pub mod scheme;
