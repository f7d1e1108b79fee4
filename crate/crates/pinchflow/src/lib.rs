//! Numerical laboratory for quartic curvature pinching under mean curvature
//! flow in the round sphere.
//!
//! The crate is organised around five pillars:
//!
//! * [`profile`] — dimensional constants and the scalar pinching functions
//!   `a`, `å`, `ω`, `f`, plus the sharp product-of-spheres family.
//! * [`sff`] — value-semantic tensor algebra for normal-bundle-valued second
//!   fundamental forms: decompositions, normal curvature, reaction terms.
//! * [`lab`] — grid scans and seeded random sampling that certify every
//!   standalone scalar, matrix, reaction, gradient, and decay inequality,
//!   emitting machine-readable verification reports.
//! * [`equivariant`] — the exact ODE reduction of the flow on
//!   `S^p(cos φ) × S^q(sin φ)`, used as the high-dimension dynamical testbed.
//! * [`pde`] — a desk-scale parametric flow solver on periodic grids, used to
//!   validate the evolution identities by finite differences.
//!
//! [`oracle`] hosts the independent finite-difference oracles the tests use,
//! and [`report`] the JSON/CSV artifact plumbing shared by the CLI.

pub mod equivariant;
pub mod lab;
pub mod oracle;
pub mod pde;
pub mod profile;
pub mod report;
pub mod sff;
