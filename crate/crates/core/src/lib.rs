//! Maslov index toolkit for Lagrangian paths and semi-Riemannian Jacobi flows.
//!
//! The crate is organised bottom-up:
//!
//! * [`symforms`]: inertia of symmetric bilinear forms and the perturbation bounds on `n₊`.
//! * [`lagrangian`]: symplectic spaces, Lagrangian frames, the chart atlas and the `(P, S)`
//!   parametrization.
//! * [`maslov`]: Maslov index of sampled paths (chart and crossing-form methods), Hörmander and
//!   Kashiwara indices, and the reference-change estimates.
//! * [`jacobi`]: Jacobi flow along a geodesic in a parallel frame, the Lagrangian path it
//!   induces, and conjugate/focal instant detection.
//! * [`comparison`]: conjugate versus focal comparison verdicts on a scenario.
//! * [`cli`]: scenario files, built-in models, report emission and the randomized property suite.

pub mod cli;
pub mod comparison;
pub mod error;
pub mod jacobi;
pub mod lagrangian;
pub mod linalg;
pub mod maslov;
pub mod symforms;

pub use error::{Error, Result};
