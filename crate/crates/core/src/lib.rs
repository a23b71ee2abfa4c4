//! Weak Galerkin finite elements for `-div(a grad u) = f` with Dirichlet data
//! on two-dimensional polygonal meshes.
//!
//! The element pairs `P_k` polynomials inside each cell with `P_{k-1}`
//! polynomials on each edge and approximates the gradient in
//! `[P_{k-1}]^2`. Interior unknowns are condensed out before the global
//! solve, so the linear system only carries `k` unknowns per edge.
//!
//! Typical use:
//!
//! ```
//! use wgfem::{mesh, problems, solver::{self, SolveParams}};
//!
//! let mesh = mesh::gen_triangular(16).unwrap();
//! let problem = problems::lookup("ex2-poisson").unwrap();
//! let solution = solver::solve(&mesh, &problem, &SolveParams::new(1)).unwrap();
//! let report = wgfem::postprocess::error_norms(&solution.discretization, &solution.u, &problem).unwrap();
//! println!("{:.4e}", report.l2_cell);
//! ```

pub mod assembly;
pub mod basis;
pub mod error;
pub mod local_ops;
pub mod mesh;
pub mod postprocess;
pub mod problems;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod study;

pub use error::{Result, WgError};

/// Planar point type used throughout the crate.
pub type Point = nalgebra::Point2<f64>;
/// Planar vector type.
pub type Vec2 = nalgebra::Vector2<f64>;
