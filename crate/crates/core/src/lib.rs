//! Numerical machinery for local boundedness estimates of weak solutions of
//! degenerate quasilinear equations `div A(x,u,∇u) = B(x,u,∇u)`.
//!
//! The principal part is a symmetric nonnegative definite quadratic form
//! `Q(x)` that may vanish on nonzero directions. The crate provides:
//!
//! * pointwise symmetric-matrix machinery (square roots, kernel bases,
//!   equivalence maps, subunit decompositions) in [`linalg`],
//! * discrete domains, quasimetric backends (Euclidean / scaled / subunit
//!   shortest path) and ball-measure diagnostics in [`grid`] and [`geometry`],
//! * degenerate Sobolev pairs, form-weighted and Morrey norms, cutoff
//!   sequences and the chain-rule constructions in [`spaces`],
//! * structural-condition bookkeeping and coefficient surgery in
//!   [`structural`],
//! * the iteration engine computing every constant of the sup bound in
//!   [`moser`],
//! * finite-difference generators and weak-form residuals in [`solve`],
//! * field I/O and deterministic reports in [`io`] and [`report`].

pub mod geometry;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod moser;
pub mod qform;
pub mod report;
pub mod solve;
pub mod spaces;
pub mod structural;

pub use grid::{GridDomain, ScalarField, VectorField};
pub use qform::QuadraticFormField;
