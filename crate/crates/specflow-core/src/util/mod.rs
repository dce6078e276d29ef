//! Small numeric building blocks shared across modules: deterministic RNG,
//! quadrature rules, finite differences, least squares, root finding, and an
//! adaptive Runge-Kutta integrator.

pub mod fd;
pub mod lsq;
pub mod ode;
pub mod quadrature;
pub mod rng;
pub mod roots;
pub mod special;
