//! Planar triangulated meshes: box grids, polar disks and annuli, and
//! explicit triangulations. Edge weights are the cotangent coefficients of
//! piecewise-linear finite elements, so edge-based quadratic energies
//! reproduce the classical Dirichlet energy exactly on linear fields.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a mesh was constructed; enough to rebuild it bit-identically.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub enum MeshKind {
    BoxGrid { x0: f64, x1: f64, y0: f64, y1: f64, nx: usize, ny: usize },
    DiskPolar { radius: f64, rings: usize, sectors: usize },
    AnnulusPolar { r_inner: f64, r_outer: f64, rings: usize, sectors: usize },
    Explicit,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    /// Cotangent stiffness coefficient (dimensionless in the plane).
    pub weight: f64,
    pub len: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cell {
    pub v: [usize; 3],
    pub area: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mesh {
    pub kind: MeshKind,
    pub vertices: Vec<[f64; 2]>,
    pub cells: Vec<Cell>,
    pub edges: Vec<Edge>,
    /// Vertex ids on the topological boundary, sorted.
    pub boundary: Vec<usize>,
    /// Per-vertex lumped area (one third of incident cell areas).
    pub vertex_area: Vec<f64>,
}

impl Mesh {
    pub fn from_triangles(
        kind: MeshKind,
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
    ) -> Result<Self> {
        let mut cells = Vec::with_capacity(triangles.len());
        let mut edge_weights: HashMap<(usize, usize), f64> = HashMap::new();
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        let mut vertex_area = vec![0.0; vertices.len()];

        for t in &triangles {
            let [i, j, k] = *t;
            let (p, q, r) = (vertices[i], vertices[j], vertices[k]);
            let area = 0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]));
            if area <= 0.0 {
                return Err(Error::Geometry(format!(
                    "triangle {t:?} has nonpositive area {area}"
                )));
            }
            cells.push(Cell { v: *t, area });
            for v in *t {
                vertex_area[v] += area / 3.0;
            }
            // Cotangent weight of each edge from the opposite angle.
            for (a, b, c) in [(i, j, k), (j, k, i), (k, i, j)] {
                let (pa, pb, pc) = (vertices[a], vertices[b], vertices[c]);
                let u = [pa[0] - pc[0], pa[1] - pc[1]];
                let v = [pb[0] - pc[0], pb[1] - pc[1]];
                let cross = (u[0] * v[1] - u[1] * v[0]).abs();
                let cot = (u[0] * v[0] + u[1] * v[1]) / cross.max(1e-300);
                let key = (a.min(b), a.max(b));
                *edge_weights.entry(key).or_insert(0.0) += 0.5 * cot;
                *edge_count.entry(key).or_insert(0) += 1;
            }
        }

        let mut boundary_set: Vec<usize> = edge_count
            .iter()
            .filter(|(_, &c)| c == 1)
            .flat_map(|(&(a, b), _)| [a, b])
            .collect();
        boundary_set.sort_unstable();
        boundary_set.dedup();

        let mut edges: Vec<Edge> = edge_weights
            .into_iter()
            .map(|((a, b), weight)| {
                let (pa, pb) = (vertices[a], vertices[b]);
                let len = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
                Edge { a, b, weight, len }
            })
            .collect();
        edges.sort_by_key(|e| (e.a, e.b));

        Ok(Self { kind, vertices, cells, edges, boundary: boundary_set, vertex_area })
    }

    /// Uniform grid on a box, each square split along one diagonal.
    pub fn box_grid(x0: f64, x1: f64, y0: f64, y1: f64, nx: usize, ny: usize) -> Result<Self> {
        let kind = MeshKind::BoxGrid { x0, x1, y0, y1, nx, ny };
        let (hx, hy) = ((x1 - x0) / nx as f64, (y1 - y0) / ny as f64);
        let idx = |i: usize, j: usize| j * (nx + 1) + i;
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([x0 + hx * i as f64, y0 + hy * j as f64]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        Self::from_triangles(kind, vertices, triangles)
    }

    pub fn unit_square(n: usize) -> Result<Self> {
        Self::box_grid(0.0, 1.0, 0.0, 1.0, n, n)
    }

    /// Polar mesh of the disk `B_radius(0)`: a center vertex, `rings` radial
    /// intervals, `sectors` angular intervals.
    pub fn disk_polar(radius: f64, rings: usize, sectors: usize) -> Result<Self> {
        if rings < 1 || sectors < 3 {
            return Err(Error::InvalidInput("disk mesh needs rings >= 1, sectors >= 3".into()));
        }
        let kind = MeshKind::DiskPolar { radius, rings, sectors };
        let mut vertices = vec![[0.0, 0.0]];
        let idx = |ring: usize, s: usize| 1 + (ring - 1) * sectors + (s % sectors);
        for ring in 1..=rings {
            let r = radius * ring as f64 / rings as f64;
            for s in 0..sectors {
                let th = 2.0 * std::f64::consts::PI * s as f64 / sectors as f64;
                vertices.push([r * th.cos(), r * th.sin()]);
            }
        }
        let mut triangles = Vec::new();
        for s in 0..sectors {
            triangles.push([0, idx(1, s), idx(1, s + 1)]);
        }
        for ring in 1..rings {
            for s in 0..sectors {
                let (a, b) = (idx(ring, s), idx(ring, s + 1));
                let (c, d) = (idx(ring + 1, s), idx(ring + 1, s + 1));
                triangles.push([a, c, d]);
                triangles.push([a, d, b]);
            }
        }
        Self::from_triangles(kind, vertices, triangles)
    }

    /// Polar mesh of the annulus between two radii.
    pub fn annulus_polar(r_inner: f64, r_outer: f64, rings: usize, sectors: usize) -> Result<Self> {
        if !(r_inner > 0.0 && r_outer > r_inner) || rings < 1 || sectors < 3 {
            return Err(Error::InvalidInput("bad annulus parameters".into()));
        }
        let kind = MeshKind::AnnulusPolar { r_inner, r_outer, rings, sectors };
        let mut vertices = Vec::with_capacity((rings + 1) * sectors);
        let idx = |ring: usize, s: usize| ring * sectors + (s % sectors);
        for ring in 0..=rings {
            let r = r_inner + (r_outer - r_inner) * ring as f64 / rings as f64;
            for s in 0..sectors {
                let th = 2.0 * std::f64::consts::PI * s as f64 / sectors as f64;
                vertices.push([r * th.cos(), r * th.sin()]);
            }
        }
        let mut triangles = Vec::new();
        for ring in 0..rings {
            for s in 0..sectors {
                let (a, b) = (idx(ring, s), idx(ring, s + 1));
                let (c, d) = (idx(ring + 1, s), idx(ring + 1, s + 1));
                triangles.push([a, c, d]);
                triangles.push([a, d, b]);
            }
        }
        Self::from_triangles(kind, vertices, triangles)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.area).sum()
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary.binary_search(&v).is_ok()
    }

    /// Edges incident to each vertex (edge indices).
    pub fn vertex_edges(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for (i, e) in self.edges.iter().enumerate() {
            out[e.a].push(i);
            out[e.b].push(i);
        }
        out
    }

    /// Mesh spacing: maximum edge length.
    pub fn spacing(&self) -> f64 {
        self.edges.iter().map(|e| e.len).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn box_grid_measures() {
        let m = Mesh::unit_square(8).unwrap();
        assert_abs_diff_eq!(m.total_area(), 1.0, epsilon = 1e-12);
        assert_eq!(m.num_vertices(), 81);
        // Boundary of an 8x8 grid: 4*8 vertices.
        assert_eq!(m.boundary.len(), 32);
        let va: f64 = m.vertex_area.iter().sum();
        assert_abs_diff_eq!(va, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn disk_polar_measures() {
        let m = Mesh::disk_polar(1.0, 16, 32).unwrap();
        // Inscribed polygon area tends to pi.
        let poly = 0.5 * 32.0 * (2.0 * std::f64::consts::PI / 32.0).sin();
        assert_abs_diff_eq!(m.total_area(), poly, epsilon = 1e-9);
        assert_eq!(m.boundary.len(), 32);
        assert!(!m.is_boundary(0));
    }

    #[test]
    fn annulus_boundary_has_two_rings() {
        let m = Mesh::annulus_polar(0.25, 1.0, 6, 24).unwrap();
        assert_eq!(m.boundary.len(), 48);
    }

    #[test]
    fn cotan_weights_match_five_point_stencil() {
        // On a right-angle split of a uniform grid, diagonal edges get zero
        // weight, axis edges get weight 1 in the interior.
        let m = Mesh::unit_square(4).unwrap();
        for e in &m.edges {
            let (pa, pb) = (m.vertices[e.a], m.vertices[e.b]);
            let diag = (pa[0] - pb[0]).abs() > 1e-12 && (pa[1] - pb[1]).abs() > 1e-12;
            if diag {
                assert_abs_diff_eq!(e.weight, 0.0, epsilon = 1e-12);
            } else if !m.is_boundary(e.a) || !m.is_boundary(e.b) {
                assert_abs_diff_eq!(e.weight, 1.0, epsilon = 1e-12);
            }
        }
    }
}
