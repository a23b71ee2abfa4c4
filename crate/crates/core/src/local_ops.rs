//! Per-element discrete operators.
//!
//! Local unknowns of a cell with `m` edges are ordered as the `dim P_k`
//! interior coefficients followed by `k` Legendre coefficients per edge, in
//! the cell's loop order. Edge coefficients always refer to the global edge
//! parameterisation (lower to higher vertex index), so the two cells sharing
//! an edge see the same polynomial.
//!
//! The weak gradient of a local weak function `v = {v0, vb}` is the
//! `[P_{k-1}]^2` polynomial `g` with
//!
//! ```text
//! (g, q)_T = (grad v0, q)_T + <vb - v0, q.n>_dT     for all q in [P_{k-1}]^2
//! ```
//!
//! which after integrating by parts equals `-(v0, div q)_T + <vb, q.n>_dT`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Matrix2};

use crate::basis::{poly_dim, CellBasis, EdgeBasis, VecBasis};
use crate::error::{Result, WgError};
use crate::mesh::{CellGeometry, PolyMesh2};
use crate::quadrature::{polygon_rule, segment_rule, QuadRule};
use crate::{Point, Vec2};

/// Quadrature degrees for volume and edge integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadDegrees {
    pub volume: usize,
    pub edge: usize,
}

impl QuadDegrees {
    /// `max(2k+2, 8)` on cells and `max(2k+1, 8)` on edges.
    pub fn for_order(k: usize) -> Self {
        Self {
            volume: (2 * k + 2).max(8),
            edge: (2 * k + 1).max(8),
        }
    }
}

/// Edge of a cell with its quadrature and cached basis values.
#[derive(Debug, Clone)]
pub struct LocalEdge {
    pub edge: usize,
    /// Outward unit normal for the owning cell.
    pub normal: Vec2,
    pub basis: EdgeBasis,
    pub rule: QuadRule,
    /// `modes[q * k + m]`
    modes: Vec<f64>,
    /// Cell basis values at the edge points, `cell_vals[q * n_cell + i]`.
    cell_vals: Vec<f64>,
}

/// A cell prepared for evaluating local operators at order `k`.
#[derive(Debug, Clone)]
pub struct Element {
    pub cell: usize,
    pub order: usize,
    pub geometry: CellGeometry,
    pub basis: CellBasis,
    pub rule: QuadRule,
    pub edges: Vec<LocalEdge>,
    vals: Vec<f64>,
    grads: Vec<Vec2>,
}

fn chol(m: DMatrix<f64>, cell: usize, what: &'static str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m).ok_or(WgError::Singular { cell, what })
}

impl Element {
    pub fn new(mesh: &PolyMesh2, cell: usize, order: usize, quad: QuadDegrees) -> Result<Self> {
        if order == 0 {
            return Err(WgError::Input("polynomial order k must be at least 1".into()));
        }
        let geometry = *mesh.geometry(cell);
        let basis = CellBasis::new(order, geometry.centroid, geometry.diameter);
        let rule = polygon_rule(&mesh.cell_points(cell), quad.volume)
            .map_err(|e| WgError::Geometry(format!("cell {cell}: {e}")))?;
        let n = basis.dim();
        let mut vals = vec![0.0; rule.len() * n];
        let mut grads = vec![Vec2::zeros(); rule.len() * n];
        for (q, &p) in rule.points.iter().enumerate() {
            basis.eval_into(p, &mut vals[q * n..(q + 1) * n], Some(&mut grads[q * n..(q + 1) * n]));
        }
        let edges = mesh
            .cell_edges(cell)
            .iter()
            .map(|ce| {
                let (a, b) = mesh.edge_points(ce.edge);
                let ebasis = EdgeBasis::new(order, a, b);
                let erule = segment_rule(a, b, quad.edge);
                let mut modes = vec![0.0; erule.len() * order];
                let mut cell_vals = vec![0.0; erule.len() * n];
                for (q, &p) in erule.points.iter().enumerate() {
                    ebasis.eval_into(ebasis.param(p), &mut modes[q * order..(q + 1) * order]);
                    basis.eval_into(p, &mut cell_vals[q * n..(q + 1) * n], None);
                }
                LocalEdge {
                    edge: ce.edge,
                    normal: mesh.edges()[ce.edge].normal * ce.sign,
                    basis: ebasis,
                    rule: erule,
                    modes,
                    cell_vals,
                }
            })
            .collect();
        Ok(Self { cell, order, geometry, basis, rule, edges, vals, grads })
    }

    /// `dim P_k(T)`.
    pub fn n_cell(&self) -> usize {
        self.basis.dim()
    }

    /// `dim P_{k-1}(T)`.
    pub fn n_grad(&self) -> usize {
        poly_dim(self.order - 1)
    }

    /// `dim [P_{k-1}(T)]^2`.
    pub fn n_vec(&self) -> usize {
        2 * self.n_grad()
    }

    pub fn n_local(&self) -> usize {
        self.n_cell() + self.edges.len() * self.order
    }

    /// Local index of the first coefficient of edge `l`.
    pub fn edge_offset(&self, l: usize) -> usize {
        self.n_cell() + l * self.order
    }

    pub fn vec_basis(&self) -> VecBasis {
        VecBasis::new(CellBasis::new(self.order - 1, self.geometry.centroid, self.geometry.diameter))
    }

    fn val(&self, q: usize, i: usize) -> f64 {
        self.vals[q * self.n_cell() + i]
    }

    fn grad(&self, q: usize, i: usize) -> Vec2 {
        self.grads[q * self.n_cell() + i]
    }

    /// Mass matrix of the `P_k` basis.
    pub fn cell_mass(&self) -> DMatrix<f64> {
        let n = self.n_cell();
        let mut m = DMatrix::zeros(n, n);
        for (q, &w) in self.rule.weights.iter().enumerate() {
            for i in 0..n {
                let wi = w * self.val(q, i);
                for j in i..n {
                    m[(i, j)] += wi * self.val(q, j);
                }
            }
        }
        m.fill_lower_triangle_with_upper_triangle();
        m
    }

    /// `(grad phi_i, grad phi_j)_T` for the `P_k` basis.
    pub fn cell_gradient_mass(&self) -> DMatrix<f64> {
        let n = self.n_cell();
        let mut m = DMatrix::zeros(n, n);
        for (q, &w) in self.rule.weights.iter().enumerate() {
            for i in 0..n {
                for j in i..n {
                    m[(i, j)] += w * self.grad(q, i).dot(&self.grad(q, j));
                }
            }
        }
        m.fill_lower_triangle_with_upper_triangle();
        m
    }

    /// Mass matrix of the scalar `P_{k-1}` basis (one block of the vector mass).
    pub fn grad_mass(&self) -> DMatrix<f64> {
        let n = self.n_grad();
        self.cell_mass().view((0, 0), (n, n)).clone_owned()
    }

    fn grad_mass_chol(&self) -> Result<Cholesky<f64, Dyn>> {
        chol(self.grad_mass(), self.cell, "vector mass matrix")
    }

    /// Right-hand sides `(grad v0, q) + <vb - v0, q.n>` for every local
    /// unit weak function (columns) and vector basis function (rows).
    pub fn weak_gradient_rhs(&self) -> DMatrix<f64> {
        let (nc, ng, k) = (self.n_cell(), self.n_grad(), self.order);
        let mut r = DMatrix::zeros(2 * ng, self.n_local());
        for (q, &w) in self.rule.weights.iter().enumerate() {
            for i in 0..nc {
                let g = self.grad(q, i) * w;
                for j in 0..ng {
                    let phi = self.val(q, j);
                    r[(j, i)] += g.x * phi;
                    r[(ng + j, i)] += g.y * phi;
                }
            }
        }
        for (l, e) in self.edges.iter().enumerate() {
            let off = self.edge_offset(l);
            for (q, &w) in e.rule.weights.iter().enumerate() {
                let cv = &e.cell_vals[q * nc..(q + 1) * nc];
                let md = &e.modes[q * k..(q + 1) * k];
                for j in 0..ng {
                    let wn = e.normal * (w * cv[j]);
                    for i in 0..nc {
                        r[(j, i)] -= wn.x * cv[i];
                        r[(ng + j, i)] -= wn.y * cv[i];
                    }
                    for m in 0..k {
                        r[(j, off + m)] += wn.x * md[m];
                        r[(ng + j, off + m)] += wn.y * md[m];
                    }
                }
            }
        }
        r
    }

    /// Right-hand sides `-(v0, div q) + <vb, q.n>`, the form before
    /// integration by parts.
    pub fn weak_gradient_rhs_divergence(&self) -> DMatrix<f64> {
        let (nc, ng, k) = (self.n_cell(), self.n_grad(), self.order);
        let mut r = DMatrix::zeros(2 * ng, self.n_local());
        for (q, &w) in self.rule.weights.iter().enumerate() {
            for j in 0..ng {
                let dq = self.grad(q, j) * w;
                for i in 0..nc {
                    let v = self.val(q, i);
                    r[(j, i)] -= v * dq.x;
                    r[(ng + j, i)] -= v * dq.y;
                }
            }
        }
        for (l, e) in self.edges.iter().enumerate() {
            let off = self.edge_offset(l);
            for (q, &w) in e.rule.weights.iter().enumerate() {
                let cv = &e.cell_vals[q * nc..(q + 1) * nc];
                let md = &e.modes[q * k..(q + 1) * k];
                for j in 0..ng {
                    let wn = e.normal * (w * cv[j]);
                    for m in 0..k {
                        r[(j, off + m)] += wn.x * md[m];
                        r[(ng + j, off + m)] += wn.y * md[m];
                    }
                }
            }
        }
        r
    }

    fn solve_vec_mass(&self, mut r: DMatrix<f64>) -> Result<DMatrix<f64>> {
        let ng = self.n_grad();
        let ch = self.grad_mass_chol()?;
        let cols = r.ncols();
        let mut top = r.view((0, 0), (ng, cols)).clone_owned();
        let mut bot = r.view((ng, 0), (ng, cols)).clone_owned();
        ch.solve_mut(&mut top);
        ch.solve_mut(&mut bot);
        r.view_mut((0, 0), (ng, cols)).copy_from(&top);
        r.view_mut((ng, 0), (ng, cols)).copy_from(&bot);
        Ok(r)
    }

    /// Discrete weak gradient matrix `G` (`n_vec x n_local`).
    pub fn weak_gradient_matrix(&self) -> Result<DMatrix<f64>> {
        self.solve_vec_mass(self.weak_gradient_rhs())
    }

    /// `G` assembled from the divergence form; equal to
    /// [`weak_gradient_matrix`](Self::weak_gradient_matrix) up to round-off.
    pub fn weak_gradient_matrix_divergence_form(&self) -> Result<DMatrix<f64>> {
        self.solve_vec_mass(self.weak_gradient_rhs_divergence())
    }

    /// `Q_b` of every cell basis function on edge `l`: a `k x n_cell` matrix.
    pub fn trace_projection(&self, l: usize) -> DMatrix<f64> {
        let (nc, k) = (self.n_cell(), self.order);
        let e = &self.edges[l];
        let mut t = DMatrix::zeros(k, nc);
        for (q, &w) in e.rule.weights.iter().enumerate() {
            let cv = &e.cell_vals[q * nc..(q + 1) * nc];
            let md = &e.modes[q * k..(q + 1) * k];
            for m in 0..k {
                for i in 0..nc {
                    t[(m, i)] += w * md[m] * cv[i];
                }
            }
        }
        let d = e.basis.mass_diagonal();
        for m in 0..k {
            for i in 0..nc {
                t[(m, i)] /= d[m];
            }
        }
        t
    }

    /// `int_e (q.n) L_m` for each edge mode `m` (rows) and vector basis
    /// function `q` (columns) on edge `l`.
    pub fn normal_moments(&self, l: usize) -> DMatrix<f64> {
        let (nc, ng, k) = (self.n_cell(), self.n_grad(), self.order);
        let e = &self.edges[l];
        let mut f = DMatrix::zeros(k, 2 * ng);
        for (q, &w) in e.rule.weights.iter().enumerate() {
            let cv = &e.cell_vals[q * nc..(q + 1) * nc];
            let md = &e.modes[q * k..(q + 1) * k];
            for m in 0..k {
                for j in 0..ng {
                    let s = w * md[m] * cv[j];
                    f[(m, j)] += s * e.normal.x;
                    f[(m, ng + j)] += s * e.normal.y;
                }
            }
        }
        f
    }

    /// Stabiliser `rho h_T^{-1} sum_e J_e^T M_e J_e`, where `J_e v` are the
    /// coefficients of `Q_b v0 - vb` on edge `e`.
    pub fn stabilizer_matrix(&self, rho: f64) -> DMatrix<f64> {
        let (nc, k, n) = (self.n_cell(), self.order, self.n_local());
        let mut s = DMatrix::zeros(n, n);
        for l in 0..self.edges.len() {
            let mut j = DMatrix::zeros(k, n);
            j.view_mut((0, 0), (k, nc)).copy_from(&self.trace_projection(l));
            let off = self.edge_offset(l);
            for m in 0..k {
                j[(m, off + m)] = -1.0;
            }
            let d = DMatrix::from_diagonal(&DVector::from_vec(self.edges[l].basis.mass_diagonal()));
            s += j.transpose() * d * j;
        }
        s *= rho / self.geometry.diameter;
        symmetrize(&mut s);
        s
    }

    /// `(a q_i, q_j)_T` over the vector basis.
    pub fn weighted_vec_mass(&self, a: &(dyn Fn(Point) -> Matrix2<f64> + Sync)) -> Result<DMatrix<f64>> {
        let ng = self.n_grad();
        let mut m = DMatrix::zeros(2 * ng, 2 * ng);
        for (q, (&p, &w)) in self.rule.points.iter().zip(&self.rule.weights).enumerate() {
            let t = a(p);
            let scale = t.abs().max();
            if (t[(0, 1)] - t[(1, 0)]).abs() > 1e-12 * scale.max(1.0) {
                return Err(WgError::Input(format!(
                    "coefficient tensor is not symmetric at ({}, {}) in cell {}",
                    p.x, p.y, self.cell
                )));
            }
            for i in 0..ng {
                let wi = w * self.val(q, i);
                for j in 0..ng {
                    let v = wi * self.val(q, j);
                    m[(i, j)] += t[(0, 0)] * v;
                    m[(i, ng + j)] += t[(0, 1)] * v;
                    m[(ng + i, j)] += t[(1, 0)] * v;
                    m[(ng + i, ng + j)] += t[(1, 1)] * v;
                }
            }
        }
        symmetrize(&mut m);
        Ok(m)
    }

    /// `(f, phi_i)_T` on interior slots, zero on edge slots.
    pub fn local_load(&self, f: &(dyn Fn(Point) -> f64 + Sync)) -> DVector<f64> {
        let nc = self.n_cell();
        let mut b = DVector::zeros(self.n_local());
        for (q, (&p, &w)) in self.rule.points.iter().zip(&self.rule.weights).enumerate() {
            let fw = f(p) * w;
            for i in 0..nc {
                b[i] += fw * self.val(q, i);
            }
        }
        b
    }

    /// `L^2(T)` projection onto `P_k(T)`.
    pub fn project_q0(&self, f: &(dyn Fn(Point) -> f64 + Sync)) -> Result<DVector<f64>> {
        let nc = self.n_cell();
        let rhs = self.local_load(f).rows(0, nc).clone_owned();
        let ch = chol(self.cell_mass(), self.cell, "cell mass matrix")?;
        Ok(ch.solve(&rhs))
    }

    /// `L^2(T)` projection of a vector field onto `[P_{k-1}(T)]^2`.
    pub fn project_qh_vec(&self, w: &(dyn Fn(Point) -> Vec2 + Sync)) -> Result<DVector<f64>> {
        let ng = self.n_grad();
        let mut rhs = DMatrix::zeros(2 * ng, 1);
        for (q, (&p, &wq)) in self.rule.points.iter().zip(&self.rule.weights).enumerate() {
            let v = w(p) * wq;
            for j in 0..ng {
                rhs[(j, 0)] += v.x * self.val(q, j);
                rhs[(ng + j, 0)] += v.y * self.val(q, j);
            }
        }
        Ok(self.solve_vec_mass(rhs)?.column(0).clone_owned())
    }

    /// Local weak function `Q_h phi = {Q_0 phi, Q_b phi}`.
    pub fn project_qh(&self, phi: &(dyn Fn(Point) -> f64 + Sync)) -> Result<DVector<f64>> {
        let mut v = DVector::zeros(self.n_local());
        let q0 = self.project_q0(phi)?;
        v.rows_mut(0, self.n_cell()).copy_from(&q0);
        for (l, e) in self.edges.iter().enumerate() {
            let qb = project_qb_with(&e.basis, &e.rule, phi);
            v.rows_mut(self.edge_offset(l), self.order).copy_from(&qb);
        }
        Ok(v)
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
}

fn project_qb_with(basis: &EdgeBasis, rule: &QuadRule, f: &(dyn Fn(Point) -> f64 + Sync)) -> DVector<f64> {
    let k = basis.dim();
    let mut c = DVector::zeros(k);
    let mut md = vec![0.0; k];
    for (p, w) in rule.iter() {
        basis.eval_into(basis.param(p), &mut md);
        let fw = f(p) * w;
        for m in 0..k {
            c[m] += fw * md[m];
        }
    }
    for (m, d) in basis.mass_diagonal().into_iter().enumerate() {
        c[m] /= d;
    }
    c
}

/// `L^2(e)` projection onto `P_{k-1}(e)` in Legendre coefficients.
pub fn project_qb(basis: &EdgeBasis, degree: usize, f: &(dyn Fn(Point) -> f64 + Sync)) -> DVector<f64> {
    let (a, b) = (basis.point(-1.0), basis.point(1.0));
    project_qb_with(basis, &segment_rule(a, b, degree), f)
}

/// Assembled local matrices of one cell.
#[derive(Debug, Clone)]
pub struct LocalOperator {
    pub cell: usize,
    pub order: usize,
    pub diameter: f64,
    pub rho: f64,
    /// Global edge ids in local order.
    pub edges: Vec<usize>,
    /// Weak gradient matrix `G`.
    pub grad: DMatrix<f64>,
    /// Stabiliser `S`.
    pub stabilizer: DMatrix<f64>,
    /// `G^T M_a G + S`.
    pub stiffness: DMatrix<f64>,
    /// Load vector, zero on edge slots.
    pub load: DVector<f64>,
    /// Scalar `P_{k-1}` mass block.
    pub grad_mass: DMatrix<f64>,
    /// Coefficient-weighted vector mass `M_a`.
    pub weighted_mass: DMatrix<f64>,
    pub cell_mass: DMatrix<f64>,
    pub cell_gradient_mass: DMatrix<f64>,
    /// Per edge: `Q_b` of the cell basis (`k x n_cell`).
    pub traces: Vec<DMatrix<f64>>,
    /// Per edge: `int_e (q.n) L_m` (`k x n_vec`).
    pub normal_moments: Vec<DMatrix<f64>>,
    /// Per edge: diagonal of the Legendre mass matrix.
    pub edge_mass: Vec<Vec<f64>>,
}

impl LocalOperator {
    pub fn build(
        el: &Element,
        a: &(dyn Fn(Point) -> Matrix2<f64> + Sync),
        f: &(dyn Fn(Point) -> f64 + Sync),
        rho: f64,
    ) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(WgError::Input(format!("stabilisation parameter must be positive, got {rho}")));
        }
        let grad = el.weak_gradient_matrix()?;
        let weighted_mass = el.weighted_vec_mass(a)?;
        let stabilizer = el.stabilizer_matrix(rho);
        let mut stiffness = grad.transpose() * &weighted_mass * &grad + &stabilizer;
        symmetrize(&mut stiffness);
        let n_edges = el.edges.len();
        Ok(Self {
            cell: el.cell,
            order: el.order,
            diameter: el.geometry.diameter,
            rho,
            edges: el.edges.iter().map(|e| e.edge).collect(),
            grad,
            stabilizer,
            stiffness,
            load: el.local_load(f),
            grad_mass: el.grad_mass(),
            weighted_mass,
            cell_mass: el.cell_mass(),
            cell_gradient_mass: el.cell_gradient_mass(),
            traces: (0..n_edges).map(|l| el.trace_projection(l)).collect(),
            normal_moments: (0..n_edges).map(|l| el.normal_moments(l)).collect(),
            edge_mass: el.edges.iter().map(|e| e.basis.mass_diagonal()).collect(),
        })
    }

    pub fn n_cell(&self) -> usize {
        poly_dim(self.order)
    }

    pub fn n_grad(&self) -> usize {
        poly_dim(self.order - 1)
    }

    pub fn n_local(&self) -> usize {
        self.stiffness.nrows()
    }

    pub fn edge_offset(&self, l: usize) -> usize {
        self.n_cell() + l * self.order
    }

    /// `Q_h` of `a grad_w v` in vector-basis coefficients.
    pub fn projected_flux(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let ng = self.n_grad();
        let g = &self.grad * v;
        let mut r = &self.weighted_mass * g;
        let ch = chol(self.grad_mass.clone(), self.cell, "vector mass matrix")?;
        let mut top = r.rows(0, ng).clone_owned();
        let mut bot = r.rows(ng, ng).clone_owned();
        ch.solve_mut(&mut top);
        ch.solve_mut(&mut bot);
        r.rows_mut(0, ng).copy_from(&top);
        r.rows_mut(ng, ng).copy_from(&bot);
        Ok(r)
    }

    /// Coefficients of `Q_b v0 - vb` on local edge `l`.
    pub fn trace_jump(&self, v: &DVector<f64>, l: usize) -> DVector<f64> {
        let k = self.order;
        &self.traces[l] * v.rows(0, self.n_cell()) - v.rows(self.edge_offset(l), k)
    }
}

#[cfg(test)]
mod tests {
    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    use super::*;
    use crate::mesh::{gen_quadrilateral, gen_triangular};

    fn unit_square_mesh() -> PolyMesh2 {
        PolyMesh2::new(
            vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0), Point::new(0.0, 1.0)],
            vec![vec![0, 1, 2, 3]],
        )
        .unwrap()
    }

    /// Single convex quadrilateral with random corner perturbations.
    fn random_quad(seed: u64) -> PolyMesh2 {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let mut j = |x: f64, y: f64| Point::new(x + rng.gen_range(-0.2..0.2), y + rng.gen_range(-0.2..0.2));
        let v = vec![j(0.0, 0.0), j(1.0, 0.0), j(1.0, 1.0), j(0.0, 1.0)];
        PolyMesh2::new(v, vec![vec![0, 1, 2, 3]]).unwrap()
    }

    fn identity(_: Point) -> Matrix2<f64> {
        Matrix2::identity()
    }

    fn ex1_tensor(p: Point) -> Matrix2<f64> {
        let d = p.x * p.x + p.y * p.y + 1.0;
        Matrix2::new(d, p.x * p.y, p.x * p.y, d)
    }

    fn constant_weak(el: &Element) -> DVector<f64> {
        let mut v = DVector::zeros(el.n_local());
        v[0] = 1.0;
        for l in 0..el.edges.len() {
            v[el.edge_offset(l)] = 1.0;
        }
        v
    }

    // Straight-line oracle for one weak basis function: brute-force moments of
    // (dwd) with the vector basis re-evaluated at every point, then a dense LU
    // solve against a freshly integrated mass matrix.
    fn oracle_weak_gradient(mesh: &PolyMesh2, cell: usize, k: usize, v: &DVector<f64>) -> DVector<f64> {
        let g = mesh.geometry(cell);
        let pb = CellBasis::new(k, g.centroid, g.diameter);
        let qb = CellBasis::new(k - 1, g.centroid, g.diameter);
        let ng = qb.dim();
        let vol = polygon_rule(&mesh.cell_points(cell), 12).unwrap();
        let mut mass = DMatrix::<f64>::zeros(2 * ng, 2 * ng);
        let mut rhs = DVector::<f64>::zeros(2 * ng);
        let nc = pb.dim();
        for (p, w) in vol.iter() {
            let (qv, qg) = qb.eval(p);
            let v0: f64 = pb.values(p).iter().zip(v.iter()).map(|(a, b)| a * b).sum();
            for c in 0..2 {
                for i in 0..ng {
                    for j in 0..ng {
                        mass[(c * ng + i, c * ng + j)] += w * qv[i] * qv[j];
                    }
                    // -(v0, div q)
                    rhs[c * ng + i] -= w * v0 * qg[i][c];
                }
            }
        }
        for (l, ce) in mesh.cell_edges(cell).iter().enumerate() {
            let (a, b) = mesh.edge_points(ce.edge);
            let eb = EdgeBasis::new(k, a, b);
            let n = mesh.outward_normal(cell, ce.edge);
            for (p, w) in segment_rule(a, b, 12).iter() {
                let vb: f64 = eb
                    .values(eb.param(p))
                    .iter()
                    .zip(v.rows(nc + l * k, k).iter())
                    .map(|(x, y)| x * y)
                    .sum();
                let qv = qb.values(p);
                for c in 0..2 {
                    for i in 0..ng {
                        rhs[c * ng + i] += w * vb * qv[i] * n[c];
                    }
                }
            }
        }
        mass.lu().solve(&rhs).unwrap()
    }

    #[test]
    fn constant_weak_function_has_zero_gradient() {
        let mesh = gen_quadrilateral(1).unwrap();
        for k in 1..=3 {
            for c in 0..mesh.num_cells() {
                let el = Element::new(&mesh, c, k, QuadDegrees::for_order(k)).unwrap();
                let g = el.weak_gradient_matrix().unwrap() * constant_weak(&el);
                assert!(g.amax() < 1e-12, "k={k} cell={c}: {}", g.amax());
            }
        }
    }

    #[test]
    fn weak_gradient_of_projected_x_is_unit_vector() {
        let mesh = gen_triangular(3).unwrap();
        for c in 0..mesh.num_cells() {
            let el = Element::new(&mesh, c, 1, QuadDegrees::for_order(1)).unwrap();
            let v = el.project_qh(&|p: Point| p.x).unwrap();
            let g = el.weak_gradient_matrix().unwrap() * v;
            assert!((g[0] - 1.0).abs() < 1e-12 && g[1].abs() < 1e-12, "{g}");
        }
    }

    #[test]
    fn weak_gradient_matches_oracle_on_random_quads() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for seed in 0..10 {
            let mesh = random_quad(seed);
            for k in 1..=2 {
                let el = Element::new(&mesh, 0, k, QuadDegrees::for_order(k)).unwrap();
                let g = el.weak_gradient_matrix().unwrap();
                let v = DVector::from_fn(el.n_local(), |_, _| rng.gen_range(-1.0..1.0));
                let got = &g * &v;
                let want = oracle_weak_gradient(&mesh, 0, k, &v);
                assert!((got - want).amax() < 1e-12, "seed {seed} k {k}");
            }
        }
    }

    #[test]
    fn both_weak_gradient_forms_agree() {
        for mesh in [gen_quadrilateral(1).unwrap(), crate::mesh::gen_honeycomb(3).unwrap()] {
            for k in 1..=3 {
                for c in 0..mesh.num_cells() {
                    let el = Element::new(&mesh, c, k, QuadDegrees::for_order(k)).unwrap();
                    let a = el.weak_gradient_matrix().unwrap();
                    let b = el.weak_gradient_matrix_divergence_form().unwrap();
                    assert!((&a - &b).amax() < 1e-12 * a.amax().max(1.0), "k={k} c={c}");
                }
            }
        }
    }

    #[test]
    fn q0_projection_examples() {
        let mesh = unit_square_mesh();
        let el = Element::new(&mesh, 0, 2, QuadDegrees::for_order(2)).unwrap();
        // Polynomials are reproduced.
        let poly = |p: Point| 1.0 - 2.0 * p.x + 0.5 * p.x * p.y + 3.0 * p.y * p.y;
        let c = el.project_q0(&poly).unwrap();
        for p in [Point::new(0.1, 0.7), Point::new(0.9, 0.2), Point::new(0.5, 0.5)] {
            assert!((el.basis.evaluate(c.as_slice(), p) - poly(p)).abs() < 1e-12);
        }
        // Constants map to the first coefficient.
        let c = el.project_q0(&|_| 2.5).unwrap();
        assert!((c[0] - 2.5).abs() < 1e-13 && c.rows(1, 5).amax() < 1e-13);

        // Mean of sin(pi x) cos(pi y) over the unit square is zero; the
        // projection preserves the mean.
        let el = Element::new(&mesh, 0, 1, QuadDegrees::for_order(1)).unwrap();
        let f = |p: Point| (std::f64::consts::PI * p.x).sin() * (std::f64::consts::PI * p.y).cos();
        let c = el.project_q0(&f).unwrap();
        let mean = el.rule.integrate(|p| el.basis.evaluate(c.as_slice(), p));
        assert!(mean.abs() < 1e-12, "{mean}");
    }

    #[test]
    fn qb_projection_examples() {
        use std::f64::consts::PI;
        let (a, b) = (Point::new(0.0, 0.0), Point::new(0.25, 0.0));
        let e = EdgeBasis::new(1, a, b);
        let c = project_qb(&e, 11, &|p: Point| (PI * p.x).sin());
        let exact = 4.0 * (1.0 - (PI / 4.0).cos()) / PI;
        assert!((c[0] - exact).abs() < 1e-12);

        // Polynomials in P_{k-1}(e) reproduced.
        let e = EdgeBasis::new(3, Point::new(0.2, 0.1), Point::new(0.6, 0.9));
        let poly = |p: Point| 1.0 + p.x - 2.0 * p.y * p.y;
        let c = project_qb(&e, 8, &poly);
        for s in [-0.7, 0.0, 0.4] {
            let p = e.point(s);
            assert!((e.evaluate(c.as_slice(), p) - poly(p)).abs() < 1e-13);
        }

        // Odd about the midpoint -> zero mean.
        let e = EdgeBasis::new(1, Point::new(0.0, 0.0), Point::new(1.0, 0.0));
        let c = project_qb(&e, 8, &|p: Point| (p.x - 0.5).powi(3));
        assert!(c[0].abs() < 1e-15);
    }

    #[test]
    fn qh_vec_projection_examples() {
        let mesh = unit_square_mesh();
        let el = Element::new(&mesh, 0, 1, QuadDegrees::for_order(1)).unwrap();
        let c = el.project_qh_vec(&|p: Point| Vec2::new(p.y * p.y, 0.0)).unwrap();
        assert!((c[0] - 1.0 / 3.0).abs() < 1e-14 && c[1].abs() < 1e-14);

        let el = Element::new(&mesh, 0, 2, QuadDegrees::for_order(2)).unwrap();
        let c = el.project_qh_vec(&|p: Point| Vec2::new(1.0 - p.x, 2.0 * p.y)).unwrap();
        let vb = el.vec_basis();
        let p = Point::new(0.3, 0.8);
        assert!((vb.evaluate(c.as_slice(), p) - Vec2::new(0.7, 1.6)).norm() < 1e-13);
    }

    #[test]
    fn stabilizer_kills_projected_polynomials() {
        let mesh = random_quad(3);
        for k in 1..=3 {
            let el = Element::new(&mesh, 0, k, QuadDegrees::for_order(k)).unwrap();
            let s = el.stabilizer_matrix(1.0);
            let v = el.project_qh(&|p: Point| 0.3 - 0.7 * p.y + p.x.powi(k as i32) - p.y.powi(k as i32)).unwrap();
            assert!((&s * v).amax() < 1e-12, "k={k}");
            assert!((&s * constant_weak(&el)).amax() < 1e-13);
        }
    }

    #[test]
    fn stabilizer_quadratic_form_matches_oracle() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        for seed in 0..5 {
            let mesh = random_quad(100 + seed);
            let k = 2;
            let el = Element::new(&mesh, 0, k, QuadDegrees::for_order(k)).unwrap();
            let rho = 1.7;
            let s = el.stabilizer_matrix(rho);
            let v = DVector::from_fn(el.n_local(), |_, _| rng.gen_range(-1.0..1.0));
            let got = v.dot(&(&s * &v));
            // Oracle: project v0 on each edge by brute-force least squares, then integrate.
            let g = mesh.geometry(0);
            let pb = CellBasis::new(k, g.centroid, g.diameter);
            let mut want = 0.0;
            for (l, ce) in mesh.cell_edges(0).iter().enumerate() {
                let (a, b) = mesh.edge_points(ce.edge);
                let eb = EdgeBasis::new(k, a, b);
                let v0 = |p: Point| pb.evaluate(&v.as_slice()[..pb.dim()], p);
                let qb = project_qb(&eb, 14, &v0);
                let off = pb.dim() + l * k;
                let rule = segment_rule(a, b, 14);
                want += rule.integrate(|p| {
                    let d = eb.evaluate(qb.as_slice(), p) - eb.evaluate(&v.as_slice()[off..off + k], p);
                    d * d
                });
            }
            want *= rho / g.diameter;
            assert!((got - want).abs() < 1e-12 * want.max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn stiffness_on_unit_square() {
        let mesh = unit_square_mesh();
        let el = Element::new(&mesh, 0, 1, QuadDegrees::for_order(1)).unwrap();
        let op = LocalOperator::build(&el, &identity, &|_| 0.0, 1.0).unwrap();
        let v = el.project_qh(&|p: Point| p.x).unwrap();
        assert!((v.dot(&(&op.stiffness * &v)) - 1.0).abs() < 1e-13);
        assert!((&op.stiffness * constant_weak(&el)).amax() < 1e-12);
    }

    #[test]
    fn stiffness_with_variable_tensor_matches_oracle() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        let mesh = random_quad(42);
        for k in 1..=2 {
            let el = Element::new(&mesh, 0, k, QuadDegrees::for_order(k)).unwrap();
            let op = LocalOperator::build(&el, &ex1_tensor, &|_| 0.0, 1.0).unwrap();
            let v = DVector::from_fn(el.n_local(), |_, _| rng.gen_range(-1.0..1.0));
            let got = v.dot(&(&op.stiffness * &v));
            // Oracle: weak gradient by the independent routine, then integrate a g.g directly.
            let gcoef = oracle_weak_gradient(&mesh, 0, k, &v);
            let vb = el.vec_basis();
            let rule = polygon_rule(&mesh.cell_points(0), 14).unwrap();
            let energy = rule.integrate(|p| {
                let g = vb.evaluate(gcoef.as_slice(), p);
                g.dot(&(ex1_tensor(p) * g))
            });
            let s = el.stabilizer_matrix(1.0);
            let want = energy + v.dot(&(&s * &v));
            assert!((got - want).abs() < 1e-11 * want.max(1.0), "k={k}: {got} vs {want}");
        }
    }

    #[test]
    fn nonsymmetric_tensor_rejected() {
        let mesh = unit_square_mesh();
        let el = Element::new(&mesh, 0, 1, QuadDegrees::for_order(1)).unwrap();
        let bad = |_: Point| Matrix2::new(1.0, 0.5, 0.0, 1.0);
        assert!(matches!(LocalOperator::build(&el, &bad, &|_| 0.0, 1.0), Err(WgError::Input(_))));
        assert!(matches!(LocalOperator::build(&el, &identity, &|_| 0.0, 0.0), Err(WgError::Input(_))));
    }

    #[test]
    fn load_vector_examples() {
        let mesh = gen_quadrilateral(0).unwrap();
        let el = Element::new(&mesh, 2, 1, QuadDegrees::for_order(1)).unwrap();
        let b = el.local_load(&|_| 1.0);
        assert!((b[0] - el.geometry.area).abs() < 1e-15);
        // Centered basis: first moments vanish about the centroid.
        assert!(b[1].abs() < 1e-15 && b[2].abs() < 1e-15);
        assert!(b.rows(3, el.n_local() - 3).iter().all(|&x| x == 0.0));
        assert!(el.local_load(&|_| 0.0).iter().all(|&x| x == 0.0));

        use std::f64::consts::PI;
        let small = PolyMesh2::new(
            vec![Point::new(0.3, 0.3), Point::new(0.35, 0.31), Point::new(0.33, 0.36)],
            vec![vec![0, 1, 2]],
        )
        .unwrap();
        let f = |p: Point| 2.0 * PI * PI * (PI * p.x).sin() * (PI * p.y).cos();
        let el = Element::new(&small, 0, 2, QuadDegrees::for_order(2)).unwrap();
        let b = el.local_load(&f);
        let fine = crate::quadrature::triangle_rule(
            [Point::new(0.3, 0.3), Point::new(0.35, 0.31), Point::new(0.33, 0.36)],
            30,
        )
        .unwrap();
        for i in 0..el.n_cell() {
            let want = fine.integrate(|p| f(p) * el.basis.values(p)[i]);
            assert!((b[i] - want).abs() < 1e-11, "i={i}");
        }
    }

    fn eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
        let mut e: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        e
    }

    #[test]
    fn stiffness_kernel_is_constants() {
        for mesh in [gen_quadrilateral(1).unwrap(), crate::mesh::gen_honeycomb(3).unwrap(), gen_triangular(2).unwrap()] {
            for k in 1..=2 {
                for c in 0..mesh.num_cells() {
                    let el = Element::new(&mesh, c, k, QuadDegrees::for_order(k)).unwrap();
                    let op = LocalOperator::build(&el, &ex1_tensor, &|_| 0.0, 1.0).unwrap();
                    let a = &op.stiffness;
                    assert!((a - a.transpose()).amax() <= 1e-12 * a.amax());
                    let s = &op.stabilizer;
                    assert!((s - s.transpose()).amax() <= 1e-12 * s.amax());
                    let e = eigenvalues(a);
                    assert!(e[0].abs() < 1e-10 * e[e.len() - 1], "k={k} c={c}: {e:?}");
                    assert!(e[1] > 1e-8 * e[e.len() - 1], "k={k} c={c}: {e:?}");
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn commutativity_on_random_quads(seed in 0u64..10_000, k in 1usize..=2, cx in -1.0f64..1.0, cy in -1.0f64..1.0) {
            let mesh = random_quad(seed);
            let el = Element::new(&mesh, 0, k, QuadDegrees::for_order(k)).unwrap();
            let g = el.weak_gradient_matrix().unwrap();
            let kk = k as i32;
            let phi = move |p: Point| cx * p.x.powi(kk) + cy * p.x * p.y.powi(kk - 1) + p.y;
            let dphi = move |p: Point| Vec2::new(
                cx * kk as f64 * p.x.powi(kk - 1) + cy * p.y.powi(kk - 1),
                cy * p.x * (kk - 1) as f64 * p.y.powi((kk - 2).max(0)) + 1.0,
            );
            let lhs = &g * el.project_qh(&phi).unwrap();
            let rhs = el.project_qh_vec(&dphi).unwrap();
            prop_assert!((lhs - rhs).amax() < 1e-11);
        }
    }
}
