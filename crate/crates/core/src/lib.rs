//! Theta-linear finite element scheme for the quasi-static
//! Maxwell–Landau–Lifshitz–Gilbert system.
//!
//! The magnetization lives in continuous P1 space on the ferromagnet, the
//! magnetic field in lowest-order Nédélec edge space on the surrounding
//! cavity. Each time step solves one linear system for a tangential velocity
//! and the new field, then renormalizes the magnetization node by node.
//!
//! Module map:
//! - [`mesh`]: Kuhn tetrahedral meshes of a box and the ferromagnet submesh.
//! - [`fem`]: nodal and edge fields, interpolation, tangent frames, normalization.
//! - [`assembly`]: mass, stiffness, cross-term, curl-curl and coupling matrices
//!   and the per-step coupled system.
//! - [`solver`]: GMRES with ILU(0), banded direct fallback, dense oracle.
//! - [`timestepper`]: initialization, single steps and the time loop.
//! - [`diagnostics`]: norms, discrete energy, energy ledger, discrete Lp norm.
//! - [`experiment`]: run configuration, reference initial data, CSV/VTK output.

// NaN-rejecting comparisons and index loops over small fixed arrays are intended.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assembly;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod fem;
pub mod mesh;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod timestepper;
pub mod vec3;

pub use error::{Error, Result};
