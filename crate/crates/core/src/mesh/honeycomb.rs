//! Honeycomb meshes of the unit square.
//!
//! Flat-topped regular hexagons of height `1/n_rows` are laid out in columns
//! and clipped to the square. With circumradius `r`, every hexagon vertex
//! sits on the lattice `x = X r/2`, `y = Y/(2 n_rows)` for integers `X, Y`, so
//! vertices shared between neighbouring hexagons are identified exactly by
//! their lattice key. The left, bottom and top sides of the square are
//! lattice lines; only the right side `x = 1` produces off-lattice vertices,
//! keyed by the bit pattern of their `y` coordinate.

use std::collections::HashMap;

use super::PolyMesh2;
use crate::error::{Result, WgError};
use crate::Point;

/// Pieces with area below this are merged into a neighbour.
const SLIVER_AREA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum VKey {
    Lattice(i64, i64),
    /// Vertex on `x = 1`, keyed by `y.to_bits()`.
    Cut(u64),
}

#[derive(Debug, Clone, Copy)]
struct Lattice {
    /// Number of lattice `X` units across the square.
    x_right: f64,
    /// Number of lattice `Y` units across the square.
    y_top: i64,
}

impl Lattice {
    fn coords(&self, key: VKey) -> Point {
        match key {
            VKey::Lattice(x, y) => Point::new(x as f64 / self.x_right, y as f64 / self.y_top as f64),
            VKey::Cut(bits) => Point::new(1.0, f64::from_bits(bits)),
        }
    }
}

/// Sutherland-Hodgman clip of an integer polygon against an axis-aligned
/// integer half-plane. Crossings of these lines only happen at lattice
/// points for the hexagon layout used here.
fn clip_lattice(poly: &[(i64, i64)], inside: impl Fn((i64, i64)) -> bool, axis_x: bool, at: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    let n = poly.len();
    let cross = |a: (i64, i64), b: (i64, i64)| -> (i64, i64) {
        if axis_x {
            let num = (at - a.0) * (b.1 - a.1);
            let den = b.0 - a.0;
            debug_assert_eq!(num % den, 0, "off-lattice crossing");
            (at, a.1 + num / den)
        } else {
            let num = (at - a.1) * (b.0 - a.0);
            let den = b.1 - a.1;
            debug_assert_eq!(num % den, 0, "off-lattice crossing");
            (a.0 + num / den, at)
        }
    };
    for i in 0..n {
        let a = poly[(i + n - 1) % n];
        let b = poly[i];
        match (inside(a), inside(b)) {
            (true, true) => out.push(b),
            (false, true) => {
                out.push(cross(a, b));
                out.push(b);
            }
            (true, false) => out.push(cross(a, b)),
            (false, false) => {}
        }
    }
    dedup_cyclic(&mut out);
    out
}

fn dedup_cyclic<T: PartialEq>(v: &mut Vec<T>) {
    v.dedup();
    while v.len() > 1 && v.first() == v.last() {
        v.pop();
    }
}

/// Clip against `X <= x_right`, introducing `Cut` vertices.
fn clip_right(poly: &[(i64, i64)], lat: &Lattice) -> Vec<VKey> {
    let n = poly.len();
    let inside = |p: (i64, i64)| (p.0 as f64) <= lat.x_right;
    let cut = |a: (i64, i64), b: (i64, i64)| -> VKey {
        // Canonical endpoint order so both cells sharing the segment agree bitwise.
        let (p, q) = if a < b { (a, b) } else { (b, a) };
        let t = (lat.x_right - p.0 as f64) / (q.0 - p.0) as f64;
        let y = (p.1 as f64 + t * (q.1 - p.1) as f64) / lat.y_top as f64;
        VKey::Cut(y.to_bits())
    };
    let mut out = Vec::with_capacity(n + 2);
    for i in 0..n {
        let a = poly[(i + n - 1) % n];
        let b = poly[i];
        let kb = VKey::Lattice(b.0, b.1);
        match (inside(a), inside(b)) {
            (true, true) => out.push(kb),
            (false, true) => {
                out.push(cut(a, b));
                out.push(kb);
            }
            (true, false) => out.push(cut(a, b)),
            (false, false) => {}
        }
    }
    dedup_cyclic(&mut out);
    out
}

/// Honeycomb mesh of the unit square with `n_rows` hexagon rows.
///
/// Nominal mesh size is the row pitch `1/n_rows`.
pub fn gen_honeycomb(n_rows: usize) -> Result<PolyMesh2> {
    if n_rows < 2 {
        return Err(WgError::Input("honeycomb needs at least 2 rows".into()));
    }
    let n = n_rows as i64;
    let mut lat = Lattice {
        x_right: 2.0 * n_rows as f64 * 3f64.sqrt(),
        y_top: 2 * n,
    };
    if (lat.x_right - lat.x_right.round()).abs() < 1e-9 {
        lat.x_right = lat.x_right.round();
    }

    let mut pieces: Vec<Vec<VKey>> = Vec::new();
    let mut j = 0i64;
    while ((3 * j - 2) as f64) < lat.x_right {
        let (first, count) = if j % 2 == 0 { (0, n + 1) } else { (1, n) };
        for i in 0..count {
            let (cx, cy) = (3 * j, first + 2 * i);
            let hex = [
                (cx + 2, cy),
                (cx + 1, cy + 1),
                (cx - 1, cy + 1),
                (cx - 2, cy),
                (cx - 1, cy - 1),
                (cx + 1, cy - 1),
            ];
            let mut poly = clip_lattice(&hex, |p| p.0 >= 0, true, 0);
            poly = clip_lattice(&poly, |p| p.1 >= 0, false, 0);
            poly = clip_lattice(&poly, |p| p.1 <= 2 * n, false, 2 * n);
            let keys = clip_right(&poly, &lat);
            if keys.len() >= 3 {
                pieces.push(keys);
            }
        }
        j += 1;
    }

    let mut index: HashMap<VKey, usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut cells = Vec::with_capacity(pieces.len());
    for piece in &pieces {
        let cell = piece
            .iter()
            .map(|&k| {
                *index.entry(k).or_insert_with(|| {
                    vertices.push(lat.coords(k));
                    vertices.len() - 1
                })
            })
            .collect::<Vec<_>>();
        cells.push(cell);
    }
    let (vertices, cells) = merge_small_cells(vertices, cells, SLIVER_AREA)?;
    Ok(PolyMesh2::new(vertices, cells)?.with_nominal_h(1.0 / n_rows as f64))
}

fn signed_area(vertices: &[Point], cell: &[usize]) -> f64 {
    let n = cell.len();
    (0..n)
        .map(|i| {
            let p = vertices[cell[i]];
            let q = vertices[cell[(i + 1) % n]];
            p.x * q.y - q.x * p.y
        })
        .sum::<f64>()
        * 0.5
}

/// Merges every cell whose area is below `min_area` into the neighbour with
/// which it shares its longest edge, then drops unreferenced vertices.
///
/// Cells with non-positive area that share no edge with another cell are
/// discarded; a small cell of positive area without neighbours is an error.
pub fn merge_small_cells(
    vertices: Vec<Point>,
    cells: Vec<Vec<usize>>,
    min_area: f64,
) -> Result<(Vec<Point>, Vec<Vec<usize>>)> {
    let mut cells: Vec<Option<Vec<usize>>> = cells.into_iter().map(Some).collect();
    for small in 0..cells.len() {
        let Some(cell) = cells[small].clone() else { continue };
        let area = signed_area(&vertices, &cell);
        if area >= min_area {
            continue;
        }
        // Directed segment a->b of the small cell matches b->a of a neighbour.
        let mut best: Option<(f64, usize, usize, usize)> = None;
        let m = cell.len();
        for i in 0..m {
            let (a, b) = (cell[i], cell[(i + 1) % m]);
            let len = (vertices[b] - vertices[a]).norm();
            for (other, oc) in cells.iter().enumerate() {
                let Some(oc) = oc else { continue };
                if other == small {
                    continue;
                }
                let k = oc.len();
                if (0..k).any(|t| oc[t] == b && oc[(t + 1) % k] == a)
                    && best.map_or(true, |(l, ..)| len > l)
                {
                    best = Some((len, other, a, b));
                }
            }
        }
        match best {
            None if area <= 0.0 => cells[small] = None,
            None => {
                return Err(WgError::Geometry(format!(
                    "cell {small} has area {area:.3e} and no neighbour to merge into"
                )))
            }
            Some((_, other, a, b)) => {
                let target = cells[other].take().expect("neighbour exists");
                // target runs b -> a; splice in the small cell's path a -> ... -> b.
                let t = target.iter().position(|&v| v == a).expect("shared vertex");
                let s = cell.iter().position(|&v| v == b).expect("shared vertex");
                let mut merged: Vec<usize> = Vec::with_capacity(target.len() + m);
                let tk = target.len();
                for off in 0..tk {
                    merged.push(target[(t + off) % tk]);
                }
                // merged = [a, ..., b]; append small-cell vertices after b up to a.
                for off in 1..m - 1 {
                    merged.push(cell[(s + off) % m]);
                }
                remove_spikes(&mut merged);
                cells[other] = Some(merged);
                cells[small] = None;
            }
        }
    }

    let cells: Vec<Vec<usize>> = cells.into_iter().flatten().collect();
    let mut used = vec![false; vertices.len()];
    for &v in cells.iter().flatten() {
        used[v] = true;
    }
    let mut remap = vec![usize::MAX; vertices.len()];
    let mut kept = Vec::new();
    for (v, p) in vertices.iter().enumerate() {
        if used[v] {
            remap[v] = kept.len();
            kept.push(*p);
        }
    }
    let out = cells
        .into_iter()
        .map(|c| c.into_iter().map(|v| remap[v]).collect())
        .collect();
    Ok((kept, out))
}

/// Removes back-and-forth excursions `x, y, x` left after gluing along a
/// chain of several shared edges.
fn remove_spikes(lp: &mut Vec<usize>) {
    loop {
        let n = lp.len();
        if n < 3 {
            return;
        }
        let spike = (0..n).find(|&i| lp[(i + n - 1) % n] == lp[(i + 1) % n]);
        match spike {
            Some(i) => {
                let next = (i + 1) % n;
                let (hi, lo) = if i > next { (i, next) } else { (next, i) };
                lp.remove(hi);
                lp.remove(lo);
            }
            None => return,
        }
    }
}
