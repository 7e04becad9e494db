//! Nehari-manifold methods for the quasilinear Dirichlet problem
//! `-div(φ(|∇u|)∇u) = f(x, u)` in `Ω`, `u = 0` on `∂Ω`, discretized with P1 finite elements.
//!
//! The crate evaluates N-functions and nonlinearities, computes ground states,
//! sign-definite and sign-changing critical points and the Poincaré constant,
//! and audits the structural inequalities behind the theory numerically.
//! Everything is generic over the scalar type; the aliases below fix `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod energy;
pub mod error;
pub mod interp;
pub mod linalg;
pub mod mesh;
pub mod nehari;
pub mod nfunction;
pub mod nonlinearity;
mod par;
pub mod quadrature;
pub mod sampling;
pub mod scalar;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;

pub type NFunction64 = nfunction::NFunction<f64>;
pub type NFunctionSpec64 = nfunction::NFunctionSpec<f64>;
pub type Nonlinearity64 = nonlinearity::Nonlinearity<f64>;
pub type NonlinearitySpec64 = nonlinearity::NonlinearitySpec<f64>;
pub type Mesh64 = mesh::Mesh<f64>;
pub type MeshDescriptor64 = mesh::MeshDescriptor<f64>;
pub type Field64 = mesh::Field<f64>;
pub type Problem64 = energy::Problem<f64>;
pub type SolveOptions64 = solver::SolveOptions<f64>;
pub type SolveResult64 = solver::SolveResult<f64>;
pub type RunConfig64 = cli::RunConfig<f64>;

pub type NFunction32 = nfunction::NFunction<f32>;
pub type Mesh32 = mesh::Mesh<f32>;
pub type Problem32 = energy::Problem<f32>;
