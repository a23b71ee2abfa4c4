//! Global degrees of freedom, assembly, boundary elimination and static
//! condensation.
//!
//! Global numbering puts all interior (cell) coefficients first, cell by
//! cell, followed by `k` coefficients per edge in edge order.

use std::ops::Range;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use crate::basis::{poly_dim, EdgeBasis};
use crate::error::{Result, WgError};
use crate::local_ops::{project_qb, Element, LocalOperator, QuadDegrees};
use crate::mesh::PolyMesh2;
use crate::problems::ProblemSpec;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    order: usize,
    n_cells: usize,
    n_edges: usize,
    boundary: Vec<bool>,
}

impl DofMap {
    pub fn new(mesh: &PolyMesh2, order: usize) -> Self {
        Self {
            order,
            n_cells: mesh.num_cells(),
            n_edges: mesh.num_edges(),
            boundary: mesh.edges().iter().map(|e| e.is_boundary()).collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Interior dofs per cell.
    pub fn cell_dofs(&self) -> usize {
        poly_dim(self.order)
    }

    pub fn n_interior(&self) -> usize {
        self.n_cells * self.cell_dofs()
    }

    pub fn n_edge(&self) -> usize {
        self.n_edges * self.order
    }

    pub fn n_total(&self) -> usize {
        self.n_interior() + self.n_edge()
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn cell_range(&self, cell: usize) -> Range<usize> {
        let n = self.cell_dofs();
        cell * n..(cell + 1) * n
    }

    pub fn edge_range(&self, edge: usize) -> Range<usize> {
        let s = self.n_interior() + edge * self.order;
        s..s + self.order
    }

    pub fn is_boundary(&self, edge: usize) -> bool {
        self.boundary[edge]
    }

    pub fn is_interior_dof(&self, dof: usize) -> bool {
        dof < self.n_interior()
    }

    /// Global ids of a cell's local unknowns, in local order.
    pub fn local_dofs(&self, mesh: &PolyMesh2, cell: usize) -> Vec<usize> {
        let mut ids: Vec<usize> = self.cell_range(cell).collect();
        for ce in mesh.cell_edges(cell) {
            ids.extend(self.edge_range(ce.edge));
        }
        ids
    }
}

/// Coefficient vector of a discrete weak function.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakFunction {
    dofs: DofMap,
    pub coeffs: Vec<f64>,
}

impl WeakFunction {
    pub fn zeros(dofs: &DofMap) -> Self {
        Self { dofs: dofs.clone(), coeffs: vec![0.0; dofs.n_total()] }
    }

    pub fn from_coeffs(dofs: &DofMap, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != dofs.n_total() {
            return Err(WgError::Input(format!(
                "weak function needs {} coefficients, got {}",
                dofs.n_total(),
                coeffs.len()
            )));
        }
        Ok(Self { dofs: dofs.clone(), coeffs })
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    /// `v0` coefficients on `cell`.
    pub fn cell(&self, cell: usize) -> &[f64] {
        &self.coeffs[self.dofs.cell_range(cell)]
    }

    /// `vb` coefficients on `edge`.
    pub fn edge(&self, edge: usize) -> &[f64] {
        &self.coeffs[self.dofs.edge_range(edge)]
    }

    pub fn local(&self, mesh: &PolyMesh2, cell: usize) -> DVector<f64> {
        DVector::from_iterator(
            self.dofs.cell_dofs() + mesh.cell_edges(cell).len() * self.dofs.order(),
            self.dofs.local_dofs(mesh, cell).into_iter().map(|i| self.coeffs[i]),
        )
    }
}

/// Mesh plus every cell's local operators for one problem and order.
#[derive(Debug, Clone)]
pub struct Discretization<'m> {
    pub mesh: &'m PolyMesh2,
    pub dofs: DofMap,
    pub order: usize,
    pub rho: f64,
    pub quad: QuadDegrees,
    pub operators: Vec<LocalOperator>,
}

impl<'m> Discretization<'m> {
    /// Builds all local operators; cells are processed in parallel and
    /// collected in cell order.
    pub fn new(mesh: &'m PolyMesh2, problem: &ProblemSpec, order: usize, rho: f64, quad: QuadDegrees) -> Result<Self> {
        if !(1..=3).contains(&order) {
            return Err(WgError::Input(format!("polynomial order must be 1, 2 or 3, got {order}")));
        }
        let a = |p| problem.a(p);
        let f = |p| problem.f(p);
        let operators = (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| {
                let el = Element::new(mesh, c, order, quad)?;
                LocalOperator::build(&el, &a, &f, rho)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { mesh, dofs: DofMap::new(mesh, order), order, rho, quad, operators })
    }

    pub fn element(&self, cell: usize) -> Result<Element> {
        Element::new(self.mesh, cell, self.order, self.quad)
    }
}

/// Linear system over a subset of the global dofs.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Global dof of each row.
    pub dof_ids: Vec<usize>,
    /// Eliminated dofs and their prescribed values.
    pub fixed: Vec<(usize, f64)>,
    pub n_total: usize,
}

impl SparseSystem {
    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }

    /// Writes `x` (indexed like the rows) and the fixed values into a full
    /// global coefficient vector.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.n_total];
        for (&d, &v) in self.dof_ids.iter().zip(x) {
            full[d] = v;
        }
        for &(d, v) in &self.fixed {
            full[d] = v;
        }
        full
    }
}

/// Scatters every local matrix and load vector into a global system.
pub fn assemble(disc: &Discretization) -> SparseSystem {
    let mesh = disc.mesh;
    let n = disc.dofs.n_total();
    let pieces: Vec<(Vec<(usize, usize, f64)>, Vec<(usize, f64)>)> = disc
        .operators
        .par_iter()
        .enumerate()
        .map(|(c, op)| {
            let ids = disc.dofs.local_dofs(mesh, c);
            let mut t = Vec::with_capacity(ids.len() * ids.len());
            for (i, &gi) in ids.iter().enumerate() {
                for (j, &gj) in ids.iter().enumerate() {
                    t.push((gi, gj, op.stiffness[(i, j)]));
                }
            }
            let b = ids.iter().zip(op.load.iter()).map(|(&g, &v)| (g, v)).collect();
            (t, b)
        })
        .collect();
    let mut rhs = vec![0.0; n];
    let mut triplets = Vec::with_capacity(pieces.iter().map(|p| p.0.len()).sum());
    for (t, b) in pieces {
        triplets.extend(t);
        for (g, v) in b {
            rhs[g] += v;
        }
    }
    SparseSystem {
        matrix: CsrMatrix::from_triplets(n, n, triplets),
        rhs,
        dof_ids: (0..n).collect(),
        fixed: Vec::new(),
        n_total: n,
    }
}

/// `Q_b g` on every boundary edge, as `(global dof, value)` pairs.
pub fn boundary_values(
    mesh: &PolyMesh2,
    dofs: &DofMap,
    g: &(dyn Fn(crate::Point) -> f64 + Sync),
    edge_degree: usize,
) -> Vec<(usize, f64)> {
    let mut fixed = Vec::new();
    for (e, edge) in mesh.edges().iter().enumerate() {
        if !edge.is_boundary() {
            continue;
        }
        let (a, b) = mesh.edge_points(e);
        let coef = project_qb(&EdgeBasis::new(dofs.order(), a, b), edge_degree, g);
        fixed.extend(dofs.edge_range(e).zip(coef.iter().copied()));
    }
    fixed
}

/// Removes the `fixed` dofs, moving their columns to the right-hand side.
pub fn apply_dirichlet(system: &SparseSystem, fixed: &[(usize, f64)]) -> SparseSystem {
    let mut value = vec![None; system.n_total];
    for &(d, v) in fixed {
        value[d] = Some(v);
    }
    let mut new_index = vec![usize::MAX; system.len()];
    let mut dof_ids = Vec::new();
    for (row, &d) in system.dof_ids.iter().enumerate() {
        if value[d].is_none() {
            new_index[row] = dof_ids.len();
            dof_ids.push(d);
        }
    }
    let mut rhs = Vec::with_capacity(dof_ids.len());
    let mut triplets = Vec::new();
    for row in 0..system.len() {
        let r = new_index[row];
        if r == usize::MAX {
            continue;
        }
        let mut b = system.rhs[row];
        let (cols, vals) = system.matrix.row(row);
        for (&c, &v) in cols.iter().zip(vals) {
            match value[system.dof_ids[c]] {
                Some(g) => b -= v * g,
                None => triplets.push((r, new_index[c], v)),
            }
        }
        rhs.push(b);
    }
    let n = dof_ids.len();
    let mut all_fixed = system.fixed.clone();
    all_fixed.extend(
        system
            .dof_ids
            .iter()
            .filter_map(|&d| value[d].map(|v| (d, v))),
    );
    all_fixed.sort_by_key(|f| f.0);
    SparseSystem {
        matrix: CsrMatrix::from_triplets(n, n, triplets),
        rhs,
        dof_ids,
        fixed: all_fixed,
        n_total: system.n_total,
    }
}

/// Per-cell data to reconstruct interior unknowns after a condensed solve.
#[derive(Debug, Clone)]
struct CellRecovery {
    /// Rows of the interior unknowns in the uncondensed system.
    interior_rows: Vec<usize>,
    /// Rows of the coupled edge unknowns in the condensed system.
    edge_rows: Vec<usize>,
    chol: Cholesky<f64, Dyn>,
    a_ie: DMatrix<f64>,
    b_i: DVector<f64>,
}

/// Recovery data returned by [`condense_interior`].
#[derive(Debug, Clone)]
pub struct Recovery {
    cells: Vec<CellRecovery>,
    /// Row in the uncondensed system of each condensed row.
    edge_rows: Vec<usize>,
    n_rows: usize,
}

impl Recovery {
    /// Solution of the uncondensed system from the condensed one.
    pub fn recover(&self, x_edge: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n_rows];
        for (&row, &v) in self.edge_rows.iter().zip(x_edge) {
            x[row] = v;
        }
        let interior: Vec<(usize, f64)> = self
            .cells
            .par_iter()
            .flat_map_iter(|c| {
                let xe = DVector::from_iterator(c.edge_rows.len(), c.edge_rows.iter().map(|&r| x_edge[r]));
                let xi = c.chol.solve(&(&c.b_i - &c.a_ie * xe));
                c.interior_rows.iter().copied().zip(xi.iter().copied()).collect::<Vec<_>>()
            })
            .collect();
        for (row, v) in interior {
            x[row] = v;
        }
        x
    }
}

/// Eliminates all interior unknowns cell by cell, leaving a system on the
/// free edge unknowns with matrix `A_ee - A_ei A_ii^{-1} A_ie`.
pub fn condense_interior(system: &SparseSystem, dofs: &DofMap) -> Result<(SparseSystem, Recovery)> {
    let n_rows = system.len();
    let mut cell_rows: Vec<Vec<usize>> = vec![Vec::new(); dofs.n_cells()];
    let mut edge_index = vec![usize::MAX; n_rows];
    let mut edge_rows = Vec::new();
    for (row, &d) in system.dof_ids.iter().enumerate() {
        if dofs.is_interior_dof(d) {
            cell_rows[d / dofs.cell_dofs()].push(row);
        } else {
            edge_index[row] = edge_rows.len();
            edge_rows.push(row);
        }
    }
    let a = &system.matrix;

    let per_cell: Vec<(CellRecovery, Vec<(usize, usize, f64)>, Vec<(usize, f64)>)> = cell_rows
        .into_par_iter()
        .enumerate()
        .map(|(cell, interior_rows)| {
            let ni = interior_rows.len();
            // Condensed rows coupled to this cell, ascending.
            let mut coupled: Vec<usize> = Vec::new();
            for &r in &interior_rows {
                for &c in a.row(r).0 {
                    if edge_index[c] != usize::MAX && !coupled.contains(&edge_index[c]) {
                        coupled.push(edge_index[c]);
                    }
                }
            }
            coupled.sort_unstable();
            let ne = coupled.len();
            let mut a_ii = DMatrix::zeros(ni, ni);
            let mut a_ie = DMatrix::zeros(ni, ne);
            for (i, &r) in interior_rows.iter().enumerate() {
                let (cols, vals) = a.row(r);
                for (&c, &v) in cols.iter().zip(vals) {
                    if let Some(j) = interior_rows.iter().position(|&x| x == c) {
                        a_ii[(i, j)] = v;
                    } else if edge_index[c] != usize::MAX {
                        let j = coupled.binary_search(&edge_index[c]).unwrap();
                        a_ie[(i, j)] = v;
                    } else {
                        return Err(WgError::Input(format!(
                            "interior unknown of cell {cell} couples to another cell's interior"
                        )));
                    }
                }
            }
            let b_i = DVector::from_iterator(ni, interior_rows.iter().map(|&r| system.rhs[r]));
            let chol = Cholesky::new(a_ii).ok_or(WgError::Singular { cell, what: "interior block" })?;
            let x = chol.solve(&a_ie);
            let s = a_ie.transpose() * &x;
            let y = chol.solve(&b_i);
            let g = a_ie.transpose() * &y;
            let mut t = Vec::with_capacity(ne * ne);
            for i in 0..ne {
                for j in 0..ne {
                    t.push((coupled[i], coupled[j], -s[(i, j)]));
                }
            }
            let r: Vec<(usize, f64)> = coupled.iter().zip(g.iter()).map(|(&i, &v)| (i, -v)).collect();
            Ok((CellRecovery { interior_rows, edge_rows: coupled, chol, a_ie, b_i }, t, r))
        })
        .collect::<Result<Vec<_>>>()?;

    let ne = edge_rows.len();
    let mut rhs: Vec<f64> = edge_rows.iter().map(|&r| system.rhs[r]).collect();
    let mut triplets = Vec::new();
    for (i, &r) in edge_rows.iter().enumerate() {
        let (cols, vals) = a.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            if edge_index[c] != usize::MAX {
                triplets.push((i, edge_index[c], v));
            }
        }
    }
    let mut cells = Vec::with_capacity(per_cell.len());
    for (rec, t, r) in per_cell {
        triplets.extend(t);
        for (i, v) in r {
            rhs[i] += v;
        }
        cells.push(rec);
    }
    let condensed = SparseSystem {
        matrix: CsrMatrix::from_triplets(ne, ne, triplets),
        rhs,
        dof_ids: edge_rows.iter().map(|&r| system.dof_ids[r]).collect(),
        fixed: system.fixed.clone(),
        n_total: system.n_total,
    };
    Ok((condensed, Recovery { cells, edge_rows, n_rows }))
}
