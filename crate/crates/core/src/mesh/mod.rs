//! Planar polygonal meshes.
//!
//! A [`PolyMesh2`] stores vertex coordinates and counter-clockwise vertex
//! loops. Edges are derived from the loops by [`build_topology`]: every
//! segment `(v_i, v_{i+1})` of a loop becomes an edge keyed by its sorted
//! vertex pair. Edges are ordered by `(v_lo, v_hi)` so identical input always
//! yields identical numbering.

mod generate;
mod honeycomb;
mod io;

pub use generate::{gen_quadrilateral, gen_triangular, INITIAL_QUAD_INTERIOR_VERTEX};
pub use honeycomb::{gen_honeycomb, merge_small_cells};
pub use io::{read_mesh, read_mesh_str, write_mesh, write_mesh_string};

use crate::error::{Result, WgError};
use crate::{Point, Vec2};

/// Mesh edge with adjacency.
///
/// `left` is the lower-indexed incident cell; `normal` is the unit normal
/// pointing out of `left`.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub left: usize,
    pub right: Option<usize>,
    pub normal: Vec2,
    pub length: f64,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }
}

/// One entry of a cell's boundary, in loop order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellEdge {
    pub edge: usize,
    /// `+1.0` if the edge's stored normal is outward for this cell, `-1.0` otherwise.
    pub sign: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    pub area: f64,
    pub centroid: Point,
    /// Maximum pairwise vertex distance.
    pub diameter: f64,
}

/// Derived edge structure of a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub edges: Vec<Edge>,
    pub cell_edges: Vec<Vec<CellEdge>>,
}

/// Planar polygonal mesh with derived edge topology.
#[derive(Debug, Clone)]
pub struct PolyMesh2 {
    vertices: Vec<Point>,
    cells: Vec<Vec<usize>>,
    edges: Vec<Edge>,
    cell_edges: Vec<Vec<CellEdge>>,
    geometry: Vec<CellGeometry>,
    mesh_size: f64,
    nominal_h: f64,
}

impl PolyMesh2 {
    /// Validates the loops and derives edges and cell geometry.
    pub fn new(vertices: Vec<Point>, cells: Vec<Vec<usize>>) -> Result<Self> {
        if cells.is_empty() {
            return Err(WgError::Topology("mesh has no cells".into()));
        }
        for (c, cell) in cells.iter().enumerate() {
            validate_loop(&vertices, c, cell)?;
        }
        let geometry = cells
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                cell_geometry(&vertices, cell)
                    .map_err(|e| WgError::Geometry(format!("cell {c}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let Topology { edges, cell_edges } = build_topology(&vertices, &cells)?;
        let mesh_size = geometry.iter().map(|g| g.diameter).fold(0.0, f64::max);
        Ok(Self {
            vertices,
            cells,
            edges,
            cell_edges,
            geometry,
            mesh_size,
            nominal_h: mesh_size,
        })
    }

    /// Overrides the mesh size reported in convergence tables.
    pub fn with_nominal_h(mut self, h: f64) -> Self {
        self.nominal_h = h;
        self
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn cell_edges(&self, cell: usize) -> &[CellEdge] {
        &self.cell_edges[cell]
    }

    pub fn geometry(&self, cell: usize) -> &CellGeometry {
        &self.geometry[cell]
    }

    /// Polygon vertices of `cell` in counter-clockwise order.
    pub fn cell_points(&self, cell: usize) -> Vec<Point> {
        self.cells[cell].iter().map(|&v| self.vertices[v]).collect()
    }

    /// `max_T h_T`.
    pub fn mesh_size(&self) -> f64 {
        self.mesh_size
    }

    /// Mesh size following the generating family's convention (`1/n` for the
    /// triangular family, the row pitch for honeycombs). Equals
    /// [`mesh_size`](Self::mesh_size) for meshes built from raw loops.
    pub fn nominal_h(&self) -> f64 {
        self.nominal_h
    }

    pub fn edge_points(&self, edge: usize) -> (Point, Point) {
        let [a, b] = self.edges[edge].vertices;
        (self.vertices[a], self.vertices[b])
    }

    /// Unit outward normal of `edge` as seen from `cell`.
    pub fn outward_normal(&self, cell: usize, edge: usize) -> Vec2 {
        let e = &self.edges[edge];
        if e.left == cell {
            e.normal
        } else {
            debug_assert_eq!(e.right, Some(cell));
            -e.normal
        }
    }

    pub fn total_area(&self) -> f64 {
        self.geometry.iter().map(|g| g.area).sum()
    }

    pub fn num_boundary_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.is_boundary()).count()
    }
}

impl PartialEq for PolyMesh2 {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.cells == other.cells
    }
}

fn validate_loop(vertices: &[Point], c: usize, cell: &[usize]) -> Result<()> {
    if cell.len() < 3 {
        return Err(WgError::Topology(format!(
            "cell {c} has {} vertices, need at least 3",
            cell.len()
        )));
    }
    for &v in cell {
        if v >= vertices.len() {
            return Err(WgError::Topology(format!(
                "cell {c} references vertex {v}, mesh has {}",
                vertices.len()
            )));
        }
    }
    let mut sorted = cell.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(WgError::Topology(format!("cell {c} repeats a vertex")));
    }
    let pts: Vec<Point> = cell.iter().map(|&v| vertices[v]).collect();
    let n = pts.len();
    for i in 0..n {
        if (pts[(i + 1) % n] - pts[i]).norm() == 0.0 {
            return Err(WgError::Geometry(format!("cell {c} has a zero-length edge")));
        }
    }
    // Non-adjacent boundary segments must not touch.
    for i in 0..n {
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_intersect(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]) {
                return Err(WgError::Geometry(format!("cell {c} is not a simple polygon")));
            }
        }
    }
    Ok(())
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b - a).perp(&(c - a))
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

/// Shoelace area, area-weighted centroid and diameter of a polygon loop.
pub fn cell_geometry(vertices: &[Point], cell: &[usize]) -> Result<CellGeometry> {
    let pts: Vec<Point> = cell.iter().map(|&v| vertices[v]).collect();
    polygon_geometry(&pts)
}

/// [`cell_geometry`] on explicit coordinates.
pub fn polygon_geometry(pts: &[Point]) -> Result<CellGeometry> {
    let n = pts.len();
    if n < 3 {
        return Err(WgError::Geometry("polygon needs at least 3 vertices".into()));
    }
    // Shift to the first vertex to limit cancellation.
    let o = pts[0];
    let mut twice_area = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..n {
        let p = pts[i] - o;
        let q = pts[(i + 1) % n] - o;
        let cross = p.x * q.y - q.x * p.y;
        twice_area += cross;
        cx += (p.x + q.x) * cross;
        cy += (p.y + q.y) * cross;
    }
    let area = 0.5 * twice_area;
    if !(area > 0.0) {
        return Err(WgError::Geometry(format!(
            "non-positive signed area {area:.3e} (loop must be counter-clockwise)"
        )));
    }
    let centroid = Point::new(o.x + cx / (3.0 * twice_area), o.y + cy / (3.0 * twice_area));
    let mut diameter: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            diameter = diameter.max((pts[i] - pts[j]).norm());
        }
    }
    Ok(CellGeometry { area, centroid, diameter })
}

/// Derives the edge list and per-cell edge references from vertex loops.
///
/// Loops are assumed individually valid (see [`PolyMesh2::new`]). An edge
/// shared by two cells must be traversed in opposite directions.
pub fn build_topology(vertices: &[Point], cells: &[Vec<usize>]) -> Result<Topology> {
    // (lo, hi, cell, local index, traversed lo -> hi)
    let mut segs: Vec<(usize, usize, usize, usize, bool)> = Vec::new();
    for (c, cell) in cells.iter().enumerate() {
        let n = cell.len();
        for i in 0..n {
            let a = cell[i];
            let b = cell[(i + 1) % n];
            if a == b {
                return Err(WgError::Geometry(format!("cell {c} has a zero-length edge")));
            }
            segs.push((a.min(b), a.max(b), c, i, a < b));
        }
    }
    segs.sort_unstable_by_key(|s| (s.0, s.1, s.2, s.3));

    let mut edges = Vec::new();
    let mut cell_edges: Vec<Vec<CellEdge>> = cells
        .iter()
        .map(|cell| vec![CellEdge { edge: usize::MAX, sign: 0.0 }; cell.len()])
        .collect();

    let mut i = 0;
    while i < segs.len() {
        let mut j = i + 1;
        while j < segs.len() && segs[j].0 == segs[i].0 && segs[j].1 == segs[i].1 {
            j += 1;
        }
        let group = &segs[i..j];
        let (lo, hi) = (group[0].0, group[0].1);
        if group.len() > 2 {
            return Err(WgError::Topology(format!(
                "non-manifold edge ({lo}, {hi}) shared by {} cells",
                group.len()
            )));
        }
        if group.len() == 2 {
            if group[0].2 == group[1].2 {
                return Err(WgError::Topology(format!(
                    "cell {} uses edge ({lo}, {hi}) twice",
                    group[0].2
                )));
            }
            if group[0].4 == group[1].4 {
                return Err(WgError::Topology(format!(
                    "cells {} and {} traverse edge ({lo}, {hi}) in the same direction",
                    group[0].2, group[1].2
                )));
            }
        }
        let (pa, pb) = (vertices[lo], vertices[hi]);
        let d = pb - pa;
        let length = d.norm();
        if length == 0.0 {
            return Err(WgError::Geometry(format!("zero-length edge ({lo}, {hi})")));
        }
        let left_seg = group[0];
        // A CCW loop traversing a -> b has its interior on the left, so the
        // outward normal is the direction rotated clockwise.
        let dir = if left_seg.4 { d } else { -d };
        let normal = Vec2::new(dir.y, -dir.x) / length;
        let id = edges.len();
        edges.push(Edge {
            vertices: [lo, hi],
            left: left_seg.2,
            right: group.get(1).map(|s| s.2),
            normal,
            length,
        });
        for (k, s) in group.iter().enumerate() {
            cell_edges[s.2][s.3] = CellEdge {
                edge: id,
                sign: if k == 0 { 1.0 } else { -1.0 },
            };
        }
        i = j;
    }
    Ok(Topology { edges, cell_edges })
}
