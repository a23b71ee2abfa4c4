//! End-to-end solve: assemble, eliminate boundary values, condense, run
//! conjugate gradients and rebuild the full weak function.

use nalgebra::DVector;

use crate::assembly::{apply_dirichlet, assemble, boundary_values, condense_interior, Discretization, SparseSystem, WeakFunction};
use crate::error::{Result, WgError};
use crate::local_ops::QuadDegrees;
use crate::mesh::PolyMesh2;
use crate::problems::ProblemSpec;
use crate::sparse::{pcg, PcgOptions, PcgOutcome};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveParams {
    pub order: usize,
    pub rho: f64,
    pub quad: QuadDegrees,
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Eliminate interior unknowns before the iterative solve.
    pub condense: bool,
}

impl SolveParams {
    pub fn new(order: usize) -> Self {
        Self {
            order,
            rho: 1.0,
            quad: QuadDegrees::for_order(order),
            rel_tol: 1e-12,
            max_iter: 50_000,
            condense: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    /// Size of the system handed to conjugate gradients.
    pub unknowns: usize,
    pub iterations: usize,
    /// `||b - A x|| / ||b||` on the boundary-reduced, uncondensed system.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct Solution<'m> {
    pub discretization: Discretization<'m>,
    pub u: WeakFunction,
    pub stats: SolveStats,
}

/// Conjugate gradients on `system` with a Jacobi preconditioner.
pub fn solve_spd(system: &SparseSystem, rel_tol: f64, max_iter: usize) -> Result<PcgOutcome> {
    pcg(&system.matrix, &system.rhs, PcgOptions { rel_tol, max_iter })
}

/// Dense Cholesky solve, used as a reference for small systems.
pub fn solve_dense(system: &SparseSystem) -> Result<Vec<f64>> {
    let chol = system
        .matrix
        .to_dense()
        .cholesky()
        .ok_or(WgError::NotPositiveDefinite { iteration: 0, curvature: f64::NAN })?;
    Ok(chol.solve(&DVector::from_column_slice(&system.rhs)).iter().copied().collect())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Relative residual `||b - A x|| / ||b||` (absolute when `b = 0`).
pub fn relative_residual(system: &SparseSystem, x: &[f64]) -> f64 {
    let ax = system.matrix.mul(x);
    let r: Vec<f64> = system.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let b = norm(&system.rhs);
    if b == 0.0 {
        norm(&r)
    } else {
        norm(&r) / b
    }
}

/// Solves the assembled discrete problem on an existing discretization.
pub fn solve_discretization(disc: &Discretization, problem: &ProblemSpec, params: &SolveParams) -> Result<(WeakFunction, SolveStats)> {
    let full = assemble(disc);
    let fixed = boundary_values(disc.mesh, &disc.dofs, &|p| problem.g(p), disc.quad.edge);
    let reduced = apply_dirichlet(&full, &fixed);
    let (x, unknowns, iterations) = if params.condense {
        let (cond, rec) = condense_interior(&reduced, &disc.dofs)?;
        // Ask for the residual target of the uncondensed system.
        let (bc, br) = (norm(&cond.rhs), norm(&reduced.rhs));
        let tol = if bc > 0.0 { params.rel_tol * (br / bc).min(1.0) } else { params.rel_tol };
        let out = solve_spd(&cond, tol, params.max_iter)?;
        (rec.recover(&out.x), cond.len(), out.iterations)
    } else {
        let out = solve_spd(&reduced, params.rel_tol, params.max_iter)?;
        (out.x, reduced.len(), out.iterations)
    };
    let residual = relative_residual(&reduced, &x);
    let u = WeakFunction::from_coeffs(&disc.dofs, reduced.expand(&x))?;
    Ok((u, SolveStats { unknowns, iterations, residual }))
}

/// Builds the discretization and solves.
pub fn solve<'m>(mesh: &'m PolyMesh2, problem: &ProblemSpec, params: &SolveParams) -> Result<Solution<'m>> {
    let discretization = Discretization::new(mesh, problem, params.order, params.rho, params.quad)?;
    let (u, stats) = solve_discretization(&discretization, problem, params)?;
    Ok(Solution { discretization, u, stats })
}
