use std::collections::HashMap;

use super::PolyMesh2;
use crate::error::{Result, WgError};
use crate::Point;

/// Interior vertex of the level-0 quadrilateral mesh, displaced from the
/// square's center so that no cell is a parallelogram.
pub const INITIAL_QUAD_INTERIOR_VERTEX: (f64, f64) = (0.5625, 0.4375);

/// Uniform `n x n` grid of the unit square, each square cut along its
/// negative-slope diagonal. Nominal mesh size is `1/n`.
pub fn gen_triangular(n: usize) -> Result<PolyMesh2> {
    if n == 0 {
        return Err(WgError::Input("triangular mesh needs n >= 1".into()));
    }
    let np = n + 1;
    let h = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity(np * np);
    for j in 0..np {
        for i in 0..np {
            vertices.push(Point::new(i as f64 / n as f64, j as f64 / n as f64));
        }
    }
    let id = |i: usize, j: usize| j * np + i;
    let mut cells = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            cells.push(vec![v00, v10, v01]);
            cells.push(vec![v10, v11, v01]);
        }
    }
    Ok(PolyMesh2::new(vertices, cells)?.with_nominal_h(h))
}

fn initial_quadrilateral() -> (Vec<Point>, Vec<Vec<usize>>) {
    let (cx, cy) = INITIAL_QUAD_INTERIOR_VERTEX;
    let mut vertices = Vec::with_capacity(9);
    for j in 0..3 {
        for i in 0..3 {
            vertices.push(Point::new(0.5 * i as f64, 0.5 * j as f64));
        }
    }
    vertices[4] = Point::new(cx, cy);
    let id = |i: usize, j: usize| j * 3 + i;
    let mut cells = Vec::with_capacity(4);
    for j in 0..2 {
        for i in 0..2 {
            cells.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    (vertices, cells)
}

/// Refines every quadrilateral into four by joining its vertex barycenter
/// to its edge midpoints.
fn refine_quads(vertices: &mut Vec<Point>, cells: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
    let mut out = Vec::with_capacity(4 * cells.len());
    for cell in cells {
        debug_assert_eq!(cell.len(), 4);
        let mut mid = [0usize; 4];
        for i in 0..4 {
            let (a, b) = (cell[i], cell[(i + 1) % 4]);
            let key = (a.min(b), a.max(b));
            mid[i] = *midpoints.entry(key).or_insert_with(|| {
                vertices.push(nalgebra::center(&vertices[a], &vertices[b]));
                vertices.len() - 1
            });
        }
        let c = cell
            .iter()
            .fold(nalgebra::Vector2::zeros(), |acc, &v| acc + vertices[v].coords)
            / 4.0;
        vertices.push(Point::from(c));
        let center = vertices.len() - 1;
        let [v0, v1, v2, v3] = [cell[0], cell[1], cell[2], cell[3]];
        out.push(vec![v0, mid[0], center, mid[3]]);
        out.push(vec![mid[0], v1, mid[1], center]);
        out.push(vec![center, mid[1], v2, mid[2]]);
        out.push(vec![mid[3], center, mid[2], v3]);
    }
    out
}

/// Quadrilateral family: a fixed non-affine 2x2 mesh refined `level` times.
///
/// The nominal mesh size is the level-0 diameter halved per level.
pub fn gen_quadrilateral(level: usize) -> Result<PolyMesh2> {
    let (mut vertices, mut cells) = initial_quadrilateral();
    let h0 = PolyMesh2::new(vertices.clone(), cells.clone())?.mesh_size();
    for _ in 0..level {
        cells = refine_quads(&mut vertices, &cells);
    }
    let h = h0 / (1u64 << level) as f64;
    Ok(PolyMesh2::new(vertices, cells)?.with_nominal_h(h))
}
