//! Error norms, the numerical flux and its conservation diagnostics, and
//! convergence rates.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::assembly::{Discretization, WeakFunction};
use crate::error::{Result, WgError};
use crate::local_ops::LocalOperator;
use crate::problems::ProblemSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct JumpMoments {
    pub edge: usize,
    /// `int_e (q_h|T1 . n1 + q_h|T2 . n2) L_m` for `m < k`.
    pub moments: Vec<f64>,
    /// Largest one-sided moment magnitude, for relative comparisons.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// Nominal mesh size.
    pub h: f64,
    pub triple_bar: f64,
    pub l2_cell: f64,
    pub l2_edge: f64,
    pub h1_discrete: f64,
    /// `|int_dT q_h . n - int_T f|` per cell.
    pub conservation: Vec<f64>,
    /// Per interior edge.
    pub jumps: Vec<JumpMoments>,
}

/// Numerical flux on one cell: `-Q_h(a grad_w u)` plus a normal correction
/// `rho h_T^{-1} (Q_b u0 - ub)` on each edge.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxPiece {
    /// Vector-basis coefficients of the volumetric part (x block, then y).
    pub volumetric: DVector<f64>,
    /// Edge-basis coefficients of the scalar correction, per local edge.
    pub corrections: Vec<DVector<f64>>,
}

impl FluxPiece {
    /// `int_e q_h . n L_m` on local edge `l`, for `m < k`.
    pub fn normal_moments(&self, op: &LocalOperator, l: usize) -> DVector<f64> {
        let vol = &op.normal_moments[l] * &self.volumetric;
        let corr = DVector::from_iterator(
            op.order,
            self.corrections[l].iter().zip(&op.edge_mass[l]).map(|(c, m)| c * m),
        );
        vol + corr
    }

    /// `int_dT q_h . n`.
    pub fn boundary_integral(&self, op: &LocalOperator) -> f64 {
        (0..op.edges.len()).map(|l| self.normal_moments(op, l)[0]).sum()
    }
}

pub fn flux(disc: &Discretization, u: &WeakFunction, cell: usize) -> Result<FluxPiece> {
    let op = &disc.operators[cell];
    let v = u.local(disc.mesh, cell);
    let volumetric = -op.projected_flux(&v)?;
    let s = op.rho / op.diameter;
    let corrections = (0..op.edges.len()).map(|l| op.trace_jump(&v, l) * s).collect();
    Ok(FluxPiece { volumetric, corrections })
}

/// `|int_dT q_h . n - int_T f|`, with `int_T f` taken from the load vector.
pub fn conservation_residual(disc: &Discretization, u: &WeakFunction, cell: usize) -> Result<f64> {
    let op = &disc.operators[cell];
    Ok((flux(disc, u, cell)?.boundary_integral(op) - op.load[0]).abs())
}

pub fn flux_jump_moments(disc: &Discretization, u: &WeakFunction, edge: usize) -> Result<JumpMoments> {
    let e = &disc.mesh.edges()[edge];
    let right = e
        .right
        .ok_or_else(|| WgError::Input(format!("edge {edge} is on the boundary; flux jumps need an interior edge")))?;
    let mut moments = vec![0.0; disc.order];
    let mut scale: f64 = 0.0;
    for cell in [e.left, right] {
        let op = &disc.operators[cell];
        let l = op.edges.iter().position(|&x| x == edge).expect("edge belongs to its cells");
        let m = flux(disc, u, cell)?.normal_moments(op, l);
        for (acc, v) in moments.iter_mut().zip(m.iter()) {
            *acc += v;
            scale = scale.max(v.abs());
        }
    }
    Ok(JumpMoments { edge, moments, scale })
}

/// `|||v|||` with the scheme's coefficient and stabilisation parameter.
pub fn triple_bar(disc: &Discretization, v: &WeakFunction) -> f64 {
    (0..disc.mesh.num_cells())
        .map(|c| {
            let x = v.local(disc.mesh, c);
            x.dot(&(&disc.operators[c].stiffness * &x))
        })
        .sum::<f64>()
        .sqrt()
}

/// `(sum_T ||grad v0||^2 + h_T^{-1} ||Q_b v0 - vb||^2_dT)^{1/2}`.
pub fn discrete_h1(disc: &Discretization, v: &WeakFunction) -> f64 {
    (0..disc.mesh.num_cells()).map(|c| h1_cell(&disc.operators[c], &v.local(disc.mesh, c))).sum::<f64>().sqrt()
}

fn h1_cell(op: &LocalOperator, x: &DVector<f64>) -> f64 {
    let x0 = x.rows(0, op.n_cell());
    let grad = x0.dot(&(&op.cell_gradient_mass * x0));
    grad + x.dot(&(&op.stabilizer * x)) / op.rho
}

/// Errors of `u_h` against `Q_h u`, plus conservation diagnostics.
pub fn error_norms(disc: &Discretization, u: &WeakFunction, problem: &ProblemSpec) -> Result<ErrorReport> {
    let mesh = disc.mesh;
    let exact = |p| problem.u(p);
    let per_cell = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let op = &disc.operators[c];
            let el = disc.element(c)?;
            let e = u.local(mesh, c) - el.project_qh(&exact)?;
            let e0 = e.rows(0, op.n_cell());
            let tb = e.dot(&(&op.stiffness * &e));
            let l2 = e0.dot(&(&op.cell_mass * e0));
            let h1 = h1_cell(op, &e);
            // Each edge is counted once, by its left cell.
            let mut edge = 0.0;
            for (l, &g) in op.edges.iter().enumerate() {
                if mesh.edges()[g].left == c {
                    let len = mesh.edges()[g].length;
                    let eb = e.rows(op.edge_offset(l), op.order);
                    edge += len * eb.iter().zip(&op.edge_mass[l]).map(|(x, m)| m * x * x).sum::<f64>();
                }
            }
            let cons = conservation_residual(disc, u, c)?;
            Ok((tb, l2, h1, edge, cons))
        })
        .collect::<Result<Vec<_>>>()?;
    let jumps = (0..mesh.num_edges())
        .into_par_iter()
        .filter(|&e| !mesh.edges()[e].is_boundary())
        .map(|e| flux_jump_moments(disc, u, e))
        .collect::<Result<Vec<_>>>()?;
    let sum = |f: fn(&(f64, f64, f64, f64, f64)) -> f64| per_cell.iter().map(f).sum::<f64>().max(0.0).sqrt();
    Ok(ErrorReport {
        h: mesh.nominal_h(),
        triple_bar: sum(|t| t.0),
        l2_cell: sum(|t| t.1),
        l2_edge: sum(|t| t.3),
        h1_discrete: sum(|t| t.2),
        conservation: per_cell.iter().map(|t| t.4).collect(),
        jumps,
    })
}

/// Pairwise and least-squares convergence orders.
#[derive(Debug, Clone, PartialEq)]
pub struct Rates {
    pub pairwise: Vec<f64>,
    pub fitted: f64,
}

/// `levels` are `(h, error)` pairs with strictly decreasing `h`.
pub fn convergence_rates(levels: &[(f64, f64)]) -> Result<Rates> {
    if levels.len() < 2 {
        return Err(WgError::Input("convergence rates need at least two levels".into()));
    }
    for w in levels.windows(2) {
        if !(w[1].0 < w[0].0) {
            return Err(WgError::Input(format!("mesh sizes must decrease strictly: {} then {}", w[0].0, w[1].0)));
        }
    }
    if let Some(&(h, e)) = levels.iter().find(|(h, e)| !(*h > 0.0 && *e > 0.0)) {
        return Err(WgError::Input(format!("rates need positive sizes and errors, got ({h}, {e})")));
    }
    let pairwise = levels.windows(2).map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln()).collect();
    let n = levels.len() as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = levels.iter().map(|(h, e)| (h.ln(), e.ln())).unzip();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(Rates { pairwise, fitted: sxy / sxx })
}
