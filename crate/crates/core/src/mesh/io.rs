//! Line-oriented mesh text format:
//!
//! ```text
//! polymesh2 1
//! v <x> <y>
//! ...
//! c <i0> <i1> ... <im>
//! ...
//! ```
//!
//! Indices are 0-based; loops are counter-clockwise. Coordinates are written
//! with 17 significant digits so a write/read cycle is bit-exact.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::PolyMesh2;
use crate::error::{Result, WgError};
use crate::Point;

const HEADER: &str = "polymesh2 1";

pub fn write_mesh_string(mesh: &PolyMesh2) -> String {
    let mut s = String::with_capacity(40 * mesh.vertices().len() + 24 * mesh.num_cells());
    s.push_str(HEADER);
    s.push('\n');
    for v in mesh.vertices() {
        writeln!(s, "v {:.16e} {:.16e}", v.x, v.y).unwrap();
    }
    for cell in mesh.cells() {
        s.push('c');
        for i in cell {
            write!(s, " {i}").unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn write_mesh(mesh: &PolyMesh2, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_mesh_string(mesh))?;
    Ok(())
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<PolyMesh2> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse(&text, path)
}

/// Parses mesh text; `origin` only labels diagnostics.
pub fn read_mesh_str(text: &str) -> Result<PolyMesh2> {
    parse(text, Path::new("<string>"))
}

fn parse(text: &str, path: &Path) -> Result<PolyMesh2> {
    let err = |line: usize, message: String| WgError::Parse {
        path: PathBuf::from(path),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    match lines.next() {
        Some((_, l)) if l.split_whitespace().collect::<Vec<_>>() == ["polymesh2", "1"] => {}
        Some((n, l)) => return Err(err(n, format!("expected header `{HEADER}`, found `{l}`"))),
        None => return Err(err(0, "empty file".into())),
    }

    let mut vertices = Vec::new();
    let mut cells: Vec<Vec<usize>> = Vec::new();
    for (n, line) in lines {
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("v") => {
                if !cells.is_empty() {
                    return Err(err(n, "vertex line after cell lines".into()));
                }
                let coords = fields
                    .enumerate()
                    .map(|(f, s)| {
                        s.parse::<f64>()
                            .ok()
                            .filter(|x| x.is_finite())
                            .ok_or_else(|| err(n, format!("field {}: bad coordinate `{s}`", f + 2)))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if coords.len() != 2 {
                    return Err(err(n, format!("vertex needs 2 coordinates, got {}", coords.len())));
                }
                vertices.push(Point::new(coords[0], coords[1]));
            }
            Some("c") => {
                let c = cells.len();
                let idx = fields
                    .enumerate()
                    .map(|(f, s)| {
                        s.parse::<usize>().map_err(|_| {
                            err(n, format!("cell {c}, field {}: bad vertex index `{s}`", f + 2))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                if let Some(&bad) = idx.iter().find(|&&i| i >= vertices.len()) {
                    return Err(err(
                        n,
                        format!("cell {c}: vertex index {bad} out of range ({} vertices)", vertices.len()),
                    ));
                }
                if idx.len() < 3 {
                    return Err(err(n, format!("cell {c}: needs at least 3 vertices")));
                }
                cells.push(idx);
            }
            Some(tag) => return Err(err(n, format!("unknown record `{tag}`"))),
            None => unreachable!("blank lines are filtered"),
        }
    }
    if cells.is_empty() {
        return Err(err(0, "mesh has no cells".into()));
    }
    PolyMesh2::new(vertices, cells)
}
