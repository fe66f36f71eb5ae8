//! Structured simplicial meshes of the unit square and unit cube.
//!
//! Every grid square is cut into two triangles and every grid cube into six
//! tetrahedra (Kuhn split along the main diagonal). Vertices carry their
//! integer grid coordinates so that higher-order Lagrange nodes can be keyed
//! exactly on the refined lattice.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

/// A point or vector in physical space. Components beyond `dim` are zero.
pub type Point = [f64; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("unsupported dimension {0}, expected 2 or 3")]
    Dimension(usize),
    #[error("number of subdivisions must be at least 1")]
    ZeroSubdivisions,
    #[error("mesh dump line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid mesh: {0}")]
    Invalid(String),
}

/// A facet on the boundary of the unit box.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFacet {
    /// Facet vertices (`dim` of them).
    pub vertices: Vec<usize>,
    /// The unique cell owning the facet.
    pub cell: usize,
    /// Local index (in the owning cell) of the vertex opposite to the facet.
    pub opposite: usize,
    /// Axis `i` of the plane `x_i = 0` or `x_i = 1` containing the facet.
    pub axis: usize,
    /// `true` on `x_i = 1`, `false` on `x_i = 0`.
    pub upper: bool,
    /// Outward unit normal, `±e_axis`.
    pub normal: Point,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    subdivisions: usize,
    vertices: Vec<Point>,
    grid: Vec<[usize; 3]>,
    cells: Vec<[usize; 4]>,
    boundary: Vec<BoundaryFacet>,
    h: f64,
}

impl Mesh {
    /// Kuhn subdivision of the uniform `M^d` grid on `(0,1)^d`.
    pub fn build_structured(dim: usize, subdivisions: usize) -> Result<Mesh, MeshError> {
        if dim != 2 && dim != 3 {
            return Err(MeshError::Dimension(dim));
        }
        if subdivisions == 0 {
            return Err(MeshError::ZeroSubdivisions);
        }
        let m = subdivisions;
        let n1 = m + 1;
        let nv = n1.pow(dim as u32);
        let index = |g: [usize; 3]| -> usize {
            if dim == 2 {
                g[0] + n1 * g[1]
            } else {
                g[0] + n1 * (g[1] + n1 * g[2])
            }
        };

        let mut grid = Vec::with_capacity(nv);
        let mut vertices = Vec::with_capacity(nv);
        for v in 0..nv {
            let mut g = [0usize; 3];
            let mut rest = v;
            for gi in g.iter_mut().take(dim) {
                *gi = rest % n1;
                rest /= n1;
            }
            grid.push(g);
            let mut p = [0.0; 3];
            for i in 0..dim {
                p[i] = g[i] as f64 / m as f64;
            }
            vertices.push(p);
        }

        let perms: &[&[usize]] = if dim == 2 {
            &[&[0, 1], &[1, 0]]
        } else {
            &[
                &[0, 1, 2],
                &[0, 2, 1],
                &[1, 0, 2],
                &[1, 2, 0],
                &[2, 0, 1],
                &[2, 1, 0],
            ]
        };

        let n_boxes = m.pow(dim as u32);
        let mut cells = Vec::with_capacity(n_boxes * perms.len());
        for b in 0..n_boxes {
            let mut corner = [0usize; 3];
            let mut rest = b;
            for c in corner.iter_mut().take(dim) {
                *c = rest % m;
                rest /= m;
            }
            for perm in perms {
                let mut cell = [0usize; 4];
                let mut g = corner;
                cell[0] = index(g);
                for (k, &axis) in perm.iter().enumerate() {
                    g[axis] += 1;
                    cell[k + 1] = index(g);
                }
                if signed_measure(dim, &vertices, &cell) < 0.0 {
                    cell.swap(dim - 1, dim);
                }
                cells.push(cell);
            }
        }

        Self::from_parts(dim, m, vertices, grid, cells)
    }

    fn from_parts(
        dim: usize,
        subdivisions: usize,
        vertices: Vec<Point>,
        grid: Vec<[usize; 3]>,
        cells: Vec<[usize; 4]>,
    ) -> Result<Mesh, MeshError> {
        let mut mesh = Mesh {
            dim,
            subdivisions,
            vertices,
            grid,
            cells,
            boundary: Vec::new(),
            h: 0.0,
        };
        mesh.boundary = mesh.find_boundary_facets()?;
        mesh.h = mesh
            .cells
            .iter()
            .map(|c| diameter(dim, &mesh.vertices, c))
            .fold(0.0, f64::max);
        Ok(mesh)
    }

    /// Facets owned by exactly one cell, each tagged with its box face.
    fn find_boundary_facets(&self) -> Result<Vec<BoundaryFacet>, MeshError> {
        let d = self.dim;
        let mut owners: HashMap<Vec<usize>, (usize, usize, usize)> = HashMap::new();
        for (ci, cell) in self.cells.iter().enumerate() {
            for opp in 0..=d {
                let mut key: Vec<usize> = (0..=d).filter(|&j| j != opp).map(|j| cell[j]).collect();
                key.sort_unstable();
                let entry = owners.entry(key).or_insert((ci, opp, 0));
                entry.2 += 1;
                if entry.2 > 2 {
                    return Err(MeshError::Invalid(format!(
                        "facet of cell {ci} shared by more than two cells"
                    )));
                }
            }
        }
        let m = self.subdivisions;
        let mut boundary = Vec::new();
        for (key, (cell, opposite, count)) in owners {
            if count != 1 {
                continue;
            }
            let face = (0..d).find_map(|axis| {
                let first = self.grid[key[0]][axis];
                let flat = key.iter().all(|&v| self.grid[v][axis] == first);
                (flat && (first == 0 || first == m)).then_some((axis, first == m))
            });
            let Some((axis, upper)) = face else {
                return Err(MeshError::Invalid(format!(
                    "unshared facet {key:?} does not lie on the unit box boundary"
                )));
            };
            let mut normal = [0.0; 3];
            normal[axis] = if upper { 1.0 } else { -1.0 };
            let vertices = (0..=d)
                .filter(|&j| j != opposite)
                .map(|j| self.cells[cell][j])
                .collect();
            boundary.push(BoundaryFacet {
                vertices,
                cell,
                opposite,
                axis,
                upper,
                normal,
            });
        }
        boundary.sort_by_key(|f| (f.cell, f.opposite));
        Ok(boundary)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn subdivisions(&self) -> usize {
        self.subdivisions
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn vertex(&self, v: usize) -> &Point {
        &self.vertices[v]
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Integer grid coordinates of a vertex; the vertex sits at `grid / M`.
    pub fn grid_coords(&self, v: usize) -> &[usize; 3] {
        &self.grid[v]
    }

    /// The `dim + 1` vertices of a cell, positively oriented.
    pub fn cell(&self, c: usize) -> &[usize] {
        &self.cells[c][..=self.dim]
    }

    pub fn cell_points(&self, c: usize) -> [Point; 4] {
        let mut out = [[0.0; 3]; 4];
        for (k, &v) in self.cell(c).iter().enumerate() {
            out[k] = self.vertices[v];
        }
        out
    }

    pub fn cell_volume(&self, c: usize) -> f64 {
        signed_measure(self.dim, &self.vertices, &self.cells[c])
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary
    }

    /// Largest cell diameter.
    pub fn mesh_size(&self) -> f64 {
        self.h
    }

    /// Plain-text dump: header `dim M nv nc`, one vertex per line, then one
    /// cell per line with 0-based vertex indices.
    pub fn to_dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} {} {} {}",
            self.dim,
            self.subdivisions,
            self.n_vertices(),
            self.n_cells()
        );
        for p in &self.vertices {
            let coords: Vec<String> = p[..self.dim].iter().map(|x| format!("{x:.17e}")).collect();
            let _ = writeln!(out, "{}", coords.join(" "));
        }
        for c in 0..self.n_cells() {
            let ids: Vec<String> = self.cell(c).iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", ids.join(" "));
        }
        out
    }

    /// Reads a dump written by [`Mesh::to_dump`]. Vertices must lie on the
    /// `i/M` grid of the unit box, cells must be positively oriented and tile
    /// the box.
    pub fn from_dump(text: &str) -> Result<Mesh, MeshError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let perr = |line: usize, msg: &str| MeshError::Parse {
            line,
            msg: msg.to_string(),
        };

        let (hline, header) = lines.next().ok_or_else(|| perr(1, "missing header"))?;
        let head: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| perr(hline, "header must be four non-negative integers"))?;
        let [dim, m, nv, nc] = head[..] else {
            return Err(perr(hline, "header must be `dim M nv nc`"));
        };
        if dim != 2 && dim != 3 {
            return Err(MeshError::Dimension(dim));
        }
        if m == 0 {
            return Err(MeshError::ZeroSubdivisions);
        }
        // Rejects absurd headers before allocating anything.
        let max_nv = (m as u128 + 1).saturating_pow(dim as u32);
        let max_nc = (m as u128).saturating_pow(dim as u32).saturating_mul(6);
        if nv as u128 > max_nv || nc == 0 || nc as u128 > max_nc {
            return Err(perr(hline, "vertex or cell count inconsistent with M"));
        }

        let mut vertices = Vec::with_capacity(nv);
        let mut grid = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| perr(0, "truncated vertex list"))?;
            let xs: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| perr(ln, "bad vertex coordinate"))?;
            if xs.len() != dim {
                return Err(perr(ln, "wrong number of vertex coordinates"));
            }
            let mut p = [0.0; 3];
            let mut g = [0usize; 3];
            for i in 0..dim {
                let s = xs[i] * m as f64;
                if !s.is_finite()
                    || s < -1e-9
                    || s > m as f64 + 1e-9
                    || (s - s.round()).abs() > 1e-9
                {
                    return Err(perr(ln, "vertex not on the unit-box grid"));
                }
                g[i] = s.round() as usize;
                p[i] = g[i] as f64 / m as f64;
            }
            vertices.push(p);
            grid.push(g);
        }

        let mut cells = Vec::with_capacity(nc);
        for _ in 0..nc {
            let (ln, l) = lines.next().ok_or_else(|| perr(0, "truncated cell list"))?;
            let ids: Vec<usize> = l
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|_| perr(ln, "bad cell index"))?;
            if ids.len() != dim + 1 {
                return Err(perr(ln, "wrong number of cell vertices"));
            }
            let mut cell = [0usize; 4];
            for (k, &v) in ids.iter().enumerate() {
                if v >= nv {
                    return Err(perr(ln, "cell vertex index out of range"));
                }
                cell[k] = v;
            }
            if signed_measure(dim, &vertices, &cell) <= 0.0 {
                return Err(perr(ln, "cell is degenerate or negatively oriented"));
            }
            cells.push(cell);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(perr(ln, "trailing content"));
        }

        let total: f64 = cells
            .iter()
            .map(|c| signed_measure(dim, &vertices, c))
            .sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(MeshError::Invalid(format!(
                "cells cover measure {total}, expected 1"
            )));
        }
        Self::from_parts(dim, m, vertices, grid, cells)
    }
}

/// Signed measure of a simplex given by the first `dim + 1` entries of `cell`.
pub(crate) fn signed_measure(dim: usize, vertices: &[Point], cell: &[usize; 4]) -> f64 {
    let p0 = vertices[cell[0]];
    let e = |k: usize, i: usize| vertices[cell[k]][i] - p0[i];
    if dim == 2 {
        0.5 * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0))
    } else {
        let det = e(1, 0) * (e(2, 1) * e(3, 2) - e(2, 2) * e(3, 1))
            - e(1, 1) * (e(2, 0) * e(3, 2) - e(2, 2) * e(3, 0))
            + e(1, 2) * (e(2, 0) * e(3, 1) - e(2, 1) * e(3, 0));
        det / 6.0
    }
}

fn diameter(dim: usize, vertices: &[Point], cell: &[usize; 4]) -> f64 {
    let mut best: f64 = 0.0;
    for a in 0..=dim {
        for b in a + 1..=dim {
            let pa = vertices[cell[a]];
            let pb = vertices[cell[b]];
            let d2: f64 = (0..dim).map(|i| (pa[i] - pb[i]).powi(2)).sum();
            best = best.max(d2.sqrt());
        }
    }
    best
}
