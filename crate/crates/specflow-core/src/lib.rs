//! Spectral geometry and geometric flow laboratory.
//!
//! The crate has three layers that feed each other:
//!
//! * **Spectra** ([`spectrum`]): Dirichlet Laplacian eigenvalues on plane
//!   domains, either analytic (rectangles via lattice enumeration, disks via
//!   Bessel zeros) or numeric (5-point finite differences on a grid mask,
//!   solved by Lanczos with full reorthogonalization).
//! * **Asymptotics and ensembles** ([`asymptotics`], [`ensembles`]): two-term
//!   eigenvalue-counting models, heat-trace expansions with selectable
//!   constant-term conventions, and the microcanonical / canonical entropy
//!   functions built from either a spectrum or a closed-form model.
//! * **Geometric flows** ([`plane_curve`], [`curve_flow`], [`surface_flow`],
//!   [`hypersurface_flow`]): curve shortening and area-preserving curve flow,
//!   intrinsic entropy-derived flows of warped 2-metrics, the weighted-measure
//!   gradient flow of the `F` functional, a maximally symmetric ODE reduction,
//!   and extrinsic (mean-curvature / lapse-shift) flows of axisymmetric
//!   surfaces. Each flow carries the conservation and monotonicity checks the
//!   accompanying entropy calculus predicts.
//!
//! Everything is deterministic: the only randomness (eigensolver start
//! vectors, randomized lapse/shift fields) is drawn from an explicit 64-bit
//! seed through a counter-based splitting scheme in [`util::rng`].

pub mod asymptotics;
pub mod curve_flow;
pub mod ensembles;
pub mod hypersurface_flow;
pub mod plane_curve;
pub mod spectrum;
pub mod surface_flow;
pub mod util;
