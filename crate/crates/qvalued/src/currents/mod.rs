//! Integer-multiplicity simplicial currents in R^{m+n} over a planar base:
//! graph currents of Q-valued fields, masses and restrictions, boundaries and
//! boundary-pairing residuals, slices, and the excess machinery built on
//! them.

pub mod excess;
pub mod fixtures;
pub mod forms;
pub mod geometry2d;
pub mod lipschitz;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dirichlet::QField;
use crate::error::{Error, Result};
use crate::qspace::{self, QPoint};

use forms::Form1;
use geometry2d::{clip_rect, polygon_area, polygon_disk_area};

/// One oriented simplex with integer multiplicity. Orientation is the vertex
/// order; negative multiplicity flips it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimplexCell {
    pub vertices: Vec<Vec<f64>>,
    pub multiplicity: i64,
}

impl SimplexCell {
    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }

    /// Rows are edge vectors v_i - v_0.
    pub fn edge_matrix(&self) -> Vec<Vec<f64>> {
        let v0 = &self.vertices[0];
        self.vertices[1..]
            .iter()
            .map(|v| v.iter().zip(v0).map(|(a, b)| a - b).collect())
            .collect()
    }

    /// Unoriented dim-volume.
    pub fn volume(&self) -> f64 {
        let m = self.edge_matrix();
        let k = m.len();
        // Gram determinant.
        let mut g = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in 0..k {
                g[i][j] = m[i].iter().zip(&m[j]).map(|(a, b)| a * b).sum();
            }
        }
        let det = det_small(&g);
        let factorial: f64 = (1..=k).map(|x| x as f64).product();
        det.max(0.0).sqrt() / factorial
    }

    /// Base triangle (first two coordinates) for 2-cells.
    pub fn base_triangle(&self) -> [[f64; 2]; 3] {
        [
            [self.vertices[0][0], self.vertices[0][1]],
            [self.vertices[1][0], self.vertices[1][1]],
            [self.vertices[2][0], self.vertices[2][1]],
        ]
    }

    pub fn base_signed_area(&self) -> f64 {
        let t = self.base_triangle();
        polygon_area(&t)
    }

    /// Component of the unit orienting 2-vector on the horizontal plane,
    /// including the multiplicity sign: for 2-cells this is
    /// sign(theta) * signed base area / volume.
    pub fn orientation_component(&self) -> f64 {
        debug_assert_eq!(self.dim(), 2);
        let vol = self.volume();
        if vol <= 0.0 {
            return 0.0;
        }
        (self.multiplicity.signum() as f64) * self.base_signed_area() / vol
    }
}

fn det_small(g: &[Vec<f64>]) -> f64 {
    match g.len() {
        0 => 1.0,
        1 => g[0][0],
        2 => g[0][0] * g[1][1] - g[0][1] * g[1][0],
        3 => {
            g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1])
                - g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0])
                + g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0])
        }
        _ => {
            // LU with partial pivoting for larger blocks.
            let n = g.len();
            let mut a: Vec<Vec<f64>> = g.to_vec();
            let mut det = 1.0;
            for c in 0..n {
                let (p, _) = a[c..]
                    .iter()
                    .enumerate()
                    .map(|(i, row)| (i + c, row[c].abs()))
                    .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
                    .unwrap();
                if a[p][c].abs() < 1e-300 {
                    return 0.0;
                }
                if p != c {
                    a.swap(p, c);
                    det = -det;
                }
                det *= a[c][c];
                for r in (c + 1)..n {
                    let f = a[r][c] / a[c][c];
                    for k in c..n {
                        a[r][k] -= f * a[c][k];
                    }
                }
            }
            det
        }
    }
}

/// An integer-multiplicity simplicial chain. `base_dim` is the dimension of
/// the horizontal plane the cylinder projection maps onto (2 throughout).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimplicialCurrent {
    pub ambient: usize,
    pub dim: usize,
    pub base_dim: usize,
    pub cells: Vec<SimplexCell>,
}

/// A region of the horizontal plane used to restrict currents.
#[derive(Debug, Clone)]
pub enum BaseRegion {
    Disk { center: [f64; 2], r: f64 },
    Rect { x0: f64, x1: f64, y0: f64, y1: f64 },
    /// Grid cell intersected with a disk (the cylinder base).
    RectInDisk { x0: f64, x1: f64, y0: f64, y1: f64, center: [f64; 2], r: f64 },
}

impl BaseRegion {
    /// Fraction of the triangle's area inside the region. Exact clipping.
    pub fn triangle_fraction(&self, tri: &[[f64; 2]; 3]) -> f64 {
        let mut poly: Vec<[f64; 2]> = tri.to_vec();
        let area = polygon_area(&poly).abs();
        if area < 1e-300 {
            // Degenerate base projection: fall back to centroid membership.
            let c = [
                (tri[0][0] + tri[1][0] + tri[2][0]) / 3.0,
                (tri[0][1] + tri[1][1] + tri[2][1]) / 3.0,
            ];
            return if self.contains(&c) { 1.0 } else { 0.0 };
        }
        if polygon_area(&poly) < 0.0 {
            poly.reverse();
        }
        let clipped_area = match self {
            BaseRegion::Disk { center, r } => polygon_disk_area(&poly, *center, *r),
            BaseRegion::Rect { x0, x1, y0, y1 } => {
                polygon_area(&clip_rect(&poly, *x0, *x1, *y0, *y1))
            }
            BaseRegion::RectInDisk { x0, x1, y0, y1, center, r } => {
                let p = clip_rect(&poly, *x0, *x1, *y0, *y1);
                if p.len() < 3 {
                    0.0
                } else {
                    polygon_disk_area(&p, *center, *r)
                }
            }
        };
        (clipped_area / area).clamp(0.0, 1.0)
    }

    pub fn contains(&self, p: &[f64; 2]) -> bool {
        match self {
            BaseRegion::Disk { center, r } => {
                (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2) <= r * r
            }
            BaseRegion::Rect { x0, x1, y0, y1 } => {
                p[0] >= *x0 && p[0] <= *x1 && p[1] >= *y0 && p[1] <= *y1
            }
            BaseRegion::RectInDisk { x0, x1, y0, y1, center, r } => {
                p[0] >= *x0
                    && p[0] <= *x1
                    && p[1] >= *y0
                    && p[1] <= *y1
                    && (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2) <= r * r
            }
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            BaseRegion::Disk { r, .. } => std::f64::consts::PI * r * r,
            BaseRegion::Rect { x0, x1, y0, y1 } => (x1 - x0) * (y1 - y0),
            BaseRegion::RectInDisk { x0, x1, y0, y1, center, r } => {
                let sq = [[*x0, *y0], [*x1, *y0], [*x1, *y1], [*x0, *y1]];
                polygon_disk_area(&sq, *center, *r)
            }
        }
    }
}

/// Total variation mass, optionally restricted to a cylinder over a region.
pub fn mass(t: &SimplicialCurrent, region: Option<&BaseRegion>) -> f64 {
    t.cells
        .iter()
        .map(|cell| {
            let m = cell.multiplicity.unsigned_abs() as f64 * cell.volume();
            match region {
                None => m,
                Some(reg) => m * reg.triangle_fraction(&cell.base_triangle()),
            }
        })
        .sum()
}

/// Boundary by facet cancellation with orientation signs.
pub fn boundary(t: &SimplicialCurrent) -> SimplicialCurrent {
    let mut acc: HashMap<Vec<u64>, (Vec<Vec<f64>>, i64)> = HashMap::new();
    for cell in &t.cells {
        let k = cell.dim();
        for drop in 0..=k {
            let facet: Vec<Vec<f64>> = cell
                .vertices
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != drop)
                .map(|(_, v)| v.clone())
                .collect();
            let sign = if drop % 2 == 0 { 1 } else { -1 };
            // Canonical vertex order for matching; parity of the sort.
            let (canon, parity) = canonical_simplex(&facet);
            let key = simplex_key(&canon);
            let entry = acc.entry(key).or_insert((canon, 0));
            entry.1 += cell.multiplicity * sign as i64 * parity as i64;
        }
    }
    let mut cells: Vec<SimplexCell> = acc
        .into_values()
        .filter(|(_, m)| *m != 0)
        .map(|(vertices, multiplicity)| SimplexCell { vertices, multiplicity })
        .collect();
    cells.sort_by(|a, b| simplex_key(&a.vertices).cmp(&simplex_key(&b.vertices)));
    SimplicialCurrent { ambient: t.ambient, dim: t.dim - 1, base_dim: t.base_dim, cells }
}

fn canonical_simplex(vertices: &[Vec<f64>]) -> (Vec<Vec<f64>>, i32) {
    let mut idx: Vec<usize> = (0..vertices.len()).collect();
    idx.sort_by(|&a, &b| {
        vertices[a].partial_cmp(&vertices[b]).unwrap_or(std::cmp::Ordering::Equal)
    });
    // Permutation parity by counting transpositions.
    let mut perm = idx.clone();
    let mut parity = 1;
    for i in 0..perm.len() {
        while perm[i] != i {
            let j = perm[i];
            perm.swap(i, j);
            parity = -parity;
        }
    }
    (idx.into_iter().map(|i| vertices[i].clone()).collect(), parity)
}

fn simplex_key(vertices: &[Vec<f64>]) -> Vec<u64> {
    vertices.iter().flat_map(|v| v.iter().map(|x| x.to_bits())).collect()
}

/// |<t, dω> - <∂t, ω>| via per-cell quadrature.
pub fn stokes_check(t: &SimplicialCurrent, omega: &Form1) -> Result<f64> {
    if t.dim != 2 {
        return Err(Error::InvalidInput("boundary pairing implemented for 2-currents".into()));
    }
    if omega.dim() != t.ambient {
        return Err(Error::DimensionMismatch { expected: t.ambient, got: omega.dim() });
    }
    let d = omega.d();
    let mut lhs = 0.0;
    for cell in &t.cells {
        lhs += d.integrate_simplex(
            &cell.vertices[0],
            &cell.vertices[1],
            &cell.vertices[2],
            cell.multiplicity as f64,
        );
    }
    let bd = boundary(t);
    let mut rhs = 0.0;
    for cell in &bd.cells {
        rhs += omega.integrate_segment(&cell.vertices[0], &cell.vertices[1], cell.multiplicity as f64);
    }
    Ok((lhs - rhs).abs())
}

/// Bucket index of cells by base-projection bounding box, for slice-heavy
/// loops.
#[derive(Debug, Clone)]
pub struct BaseIndex {
    x0: f64,
    y0: f64,
    h: f64,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<usize>>,
}

impl BaseIndex {
    pub fn build(t: &SimplicialCurrent, target_cell: f64) -> Self {
        let mut xmin = f64::INFINITY;
        let mut xmax = f64::NEG_INFINITY;
        let mut ymin = f64::INFINITY;
        let mut ymax = f64::NEG_INFINITY;
        for cell in &t.cells {
            for v in &cell.vertices {
                xmin = xmin.min(v[0]);
                xmax = xmax.max(v[0]);
                ymin = ymin.min(v[1]);
                ymax = ymax.max(v[1]);
            }
        }
        let h = target_cell.max(1e-9);
        let cols = (((xmax - xmin) / h).ceil() as usize).max(1);
        let rows = (((ymax - ymin) / h).ceil() as usize).max(1);
        let mut buckets = vec![Vec::new(); cols * rows];
        for (i, cell) in t.cells.iter().enumerate() {
            let tri = cell.base_triangle();
            let (bx0, bx1) = tri.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
                (a.min(p[0]), b.max(p[0]))
            });
            let (by0, by1) = tri.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
                (a.min(p[1]), b.max(p[1]))
            });
            let c0 = (((bx0 - xmin) / h).floor().max(0.0)) as usize;
            let c1 = ((((bx1 - xmin) / h).floor()) as usize).min(cols - 1);
            let r0 = (((by0 - ymin) / h).floor().max(0.0)) as usize;
            let r1 = ((((by1 - ymin) / h).floor()) as usize).min(rows - 1);
            for r in r0..=r1 {
                for c in c0..=c1 {
                    buckets[r * cols + c].push(i);
                }
            }
        }
        Self { x0: xmin, y0: ymin, h, cols, rows, buckets }
    }

    pub fn candidates(&self, x: [f64; 2]) -> &[usize] {
        let c = ((x[0] - self.x0) / self.h).floor();
        let r = ((x[1] - self.y0) / self.h).floor();
        if c < 0.0 || r < 0.0 || c as usize >= self.cols || r as usize >= self.rows {
            return &[];
        }
        &self.buckets[r as usize * self.cols + c as usize]
    }
}

/// A slice of a current over a base point: signed vertical atoms.
#[derive(Debug, Clone)]
pub struct Slice {
    pub base: [f64; 2],
    /// (point of R^n, signed multiplicity)
    pub atoms: Vec<(Vec<f64>, i64)>,
}

impl Slice {
    pub fn total_sign(&self) -> i64 {
        self.atoms.iter().map(|(_, s)| s).sum()
    }

    /// Expand into a QPoint when all signs are positive and the count is q.
    pub fn as_qpoint(&self, q: usize, n: usize) -> Result<QPoint> {
        let mut pts = Vec::new();
        for (p, s) in &self.atoms {
            if *s <= 0 {
                return Err(Error::InvalidInput("slice has nonpositive atoms".into()));
            }
            for _ in 0..*s {
                pts.push(p.clone());
            }
        }
        if pts.len() != q {
            return Err(Error::InvalidInput(format!(
                "slice carries {} points, expected {q}",
                pts.len()
            )));
        }
        let mut t = QPoint::new(n, pts)?;
        t.canonicalize();
        Ok(t)
    }

    /// Pair with a test function on the vertical fiber.
    pub fn pair(&self, psi: &impl Fn(&[f64]) -> f64) -> f64 {
        self.atoms.iter().map(|(p, s)| *s as f64 * psi(p)).sum()
    }
}

/// Slice the current over base point `x`: intersect cells with the vertical
/// fiber, push to the last n coordinates, sign by projected orientation.
/// Deterministic jitter moves `x` off projected cell boundaries.
pub fn slice(t: &SimplicialCurrent, x: [f64; 2]) -> Result<Slice> {
    slice_indexed(t, None, x)
}

/// `slice` with an optional bucket index for repeated queries.
pub fn slice_indexed(t: &SimplicialCurrent, index: Option<&BaseIndex>, x: [f64; 2]) -> Result<Slice> {
    let jitter_dir = [1.0, 0.618_033_988_749_894_9];
    let scale = t
        .cells
        .first()
        .map(|c| c.base_signed_area().abs().sqrt().max(1e-9))
        .unwrap_or(1e-9);
    let all: Vec<usize> =
        if index.is_none() { (0..t.cells.len()).collect() } else { Vec::new() };
    'attempt: for attempt in 0..6 {
        let eps = 1e-9 * scale * attempt as f64;
        let p = [x[0] + eps * jitter_dir[0], x[1] + eps * jitter_dir[1]];
        let candidates: &[usize] = match index {
            Some(idx) => idx.candidates(p),
            None => &all,
        };
        let mut atoms: Vec<(Vec<f64>, i64)> = Vec::new();
        for &ci in candidates {
            let cell = &t.cells[ci];
            let tri = cell.base_triangle();
            let area2 = 2.0 * polygon_area(&tri);
            if area2.abs() < 1e-14 * scale * scale {
                continue;
            }
            // Barycentric coordinates of p in the base triangle.
            let l0 = ((tri[1][0] - p[0]) * (tri[2][1] - p[1])
                - (tri[2][0] - p[0]) * (tri[1][1] - p[1]))
                / area2;
            let l1 = ((tri[2][0] - p[0]) * (tri[0][1] - p[1])
                - (tri[0][0] - p[0]) * (tri[2][1] - p[1]))
                / area2;
            let l2 = 1.0 - l0 - l1;
            let margin = 1e-12;
            let inside = l0 > margin && l1 > margin && l2 > margin;
            let near_edge = !inside
                && l0 > -margin
                && l1 > -margin
                && l2 > -margin;
            if near_edge {
                // On a projected cell boundary: jitter and retry.
                continue 'attempt;
            }
            if !inside {
                continue;
            }
            let vertical: Vec<f64> = (t.base_dim..t.ambient)
                .map(|d| {
                    l0 * cell.vertices[0][d] + l1 * cell.vertices[1][d] + l2 * cell.vertices[2][d]
                })
                .collect();
            let sign = if area2 > 0.0 { 1 } else { -1 };
            atoms.push((vertical, cell.multiplicity * sign));
        }
        // Merge coincident atoms.
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        let mut merged: Vec<(Vec<f64>, i64)> = Vec::new();
        for (p, s) in atoms {
            match merged.last_mut() {
                Some((lp, ls)) if crate::embedding::dist(lp, &p) < 1e-12 => *ls += s,
                _ => merged.push((p, s)),
            }
        }
        merged.retain(|(_, s)| *s != 0);
        return Ok(Slice { base: p, atoms: merged });
    }
    Err(Error::Domain("slice position degenerate after jitter budget".into()))
}

/// Signed multiplicity of the projection over a base point; equals Q for
/// currents satisfying the cylinder hypothesis.
pub fn projection_multiplicity(t: &SimplicialCurrent, x: [f64; 2]) -> Result<i64> {
    Ok(slice(t, x)?.total_sign())
}

/// Graph current of a Lipschitz Q-valued field on a triangulated mesh.
///
/// Sheets are tracked per cell by propagating optimal edge matchings; a cell
/// whose cyclic matchings are inconsistent (a branch point inside the cell)
/// is reported by index so the caller can refine.
pub fn graph_current(f: &QField) -> Result<SimplicialCurrent> {
    let mesh = &f.mesh;
    let (q, n) = (f.q(), f.n());
    let ambient = 2 + n;
    let mut cells: Vec<SimplexCell> = Vec::new();
    for (ci, cell) in mesh.cells.iter().enumerate() {
        let [a, b, c] = cell.v;
        let (fa, fb, fc) = (&f.values[a], &f.values[b], &f.values[c]);
        let m_ab = qspace::optimal_matching(fa, fb)?;
        let m_ac = qspace::optimal_matching(fa, fc)?;
        let m_bc = qspace::optimal_matching(fb, fc)?;
        // Cyclic consistency: b->c of a->b must equal a->c, up to ties.
        for i in 0..q {
            if m_bc[m_ab[i]] != m_ac[i] {
                let direct = dist_pair(fa, fc, &m_ac);
                let composed: Vec<usize> = (0..q).map(|i| m_bc[m_ab[i]]).collect();
                let via = dist_pair(fa, fc, &composed);
                if (direct - via).abs() > 1e-9 {
                    return Err(Error::Geometry(format!(
                        "sheet tracking inconsistent in cell {ci}; refine the mesh"
                    )));
                }
            }
        }
        let composed: Vec<usize> = (0..q).map(|i| m_bc[m_ab[i]]).collect();
        let lift = |vid: usize, val: &QPoint, sheet: usize| -> Vec<f64> {
            let mut v = Vec::with_capacity(ambient);
            v.extend_from_slice(&mesh.vertices[vid]);
            v.extend_from_slice(&val.points[sheet]);
            v
        };
        let mut local: Vec<SimplexCell> = Vec::new();
        for i in 0..q {
            let vertices =
                vec![lift(a, fa, i), lift(b, fb, m_ab[i]), lift(c, fc, composed[i])];
            // Merge identical lifted simplices into one multiplicity.
            if let Some(existing) = local.iter_mut().find(|s| {
                simplex_key(&s.vertices) == simplex_key(&vertices)
            }) {
                existing.multiplicity += 1;
            } else {
                local.push(SimplexCell { vertices, multiplicity: 1 });
            }
        }
        cells.extend(local);
    }
    Ok(SimplicialCurrent { ambient, dim: 2, base_dim: 2, cells })
}

fn dist_pair(a: &QPoint, b: &QPoint, m: &[usize]) -> f64 {
    (0..a.q)
        .map(|i| {
            a.points[i]
                .iter()
                .zip(&b.points[m[i]])
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}

/// Evaluate a Q-valued field at an arbitrary base point by matched
/// barycentric interpolation within the containing mesh cell.
pub fn evaluate_field(f: &QField, x: [f64; 2]) -> Result<QPoint> {
    let mesh = &f.mesh;
    let (q, n) = (f.q(), f.n());
    for cell in &mesh.cells {
        let [a, b, c] = cell.v;
        let tri = [mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]];
        let area2 = 2.0 * polygon_area(&tri);
        let l0 = ((tri[1][0] - x[0]) * (tri[2][1] - x[1])
            - (tri[2][0] - x[0]) * (tri[1][1] - x[1]))
            / area2;
        let l1 = ((tri[2][0] - x[0]) * (tri[0][1] - x[1])
            - (tri[0][0] - x[0]) * (tri[2][1] - x[1]))
            / area2;
        let l2 = 1.0 - l0 - l1;
        let m = -1e-10;
        if l0 >= m && l1 >= m && l2 >= m {
            let (fa, fb, fc) = (&f.values[a], &f.values[b], &f.values[c]);
            let m_ab = qspace::optimal_matching(fa, fb)?;
            let m_ac = qspace::optimal_matching(fa, fc)?;
            let pts = (0..q)
                .map(|i| {
                    (0..n)
                        .map(|d| {
                            l0 * fa.points[i][d]
                                + l1 * fb.points[m_ab[i]][d]
                                + l2 * fc.points[m_ac[i]][d]
                        })
                        .collect()
                })
                .collect();
            return QPoint::new(n, pts);
        }
    }
    Err(Error::Domain(format!("point ({}, {}) outside the mesh", x[0], x[1])))
}

/// Mass of the push-forward of a k-current by a Q-valued field: restricted
/// Jacobians per cell. For k = 2 and the full mesh this agrees with the
/// graph-current mass.
pub fn pushforward_mass(f: &QField, r: &SimplicialCurrent) -> Result<f64> {
    if r.ambient != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: r.ambient });
    }
    let q = f.q();
    let mut total = 0.0;
    match r.dim {
        1 => {
            for cell in &r.cells {
                let a = [cell.vertices[0][0], cell.vertices[0][1]];
                let b = [cell.vertices[1][0], cell.vertices[1][1]];
                let fa = evaluate_field(f, a)?;
                let fb = evaluate_field(f, b)?;
                let m = qspace::optimal_matching(&fa, &fb)?;
                for i in 0..q {
                    let mut len2 =
                        (b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2);
                    for d in 0..f.n() {
                        len2 += (fb.points[m[i]][d] - fa.points[i][d]).powi(2);
                    }
                    total += cell.multiplicity.unsigned_abs() as f64 * len2.sqrt();
                }
            }
        }
        2 => {
            for cell in &r.cells {
                let vs: Vec<[f64; 2]> =
                    cell.vertices.iter().map(|v| [v[0], v[1]]).collect();
                let vals: Vec<QPoint> =
                    vs.iter().map(|p| evaluate_field(f, *p)).collect::<Result<_>>()?;
                let m01 = qspace::optimal_matching(&vals[0], &vals[1])?;
                let m02 = qspace::optimal_matching(&vals[0], &vals[2])?;
                for i in 0..q {
                    let lifted = SimplexCell {
                        vertices: vec![
                            lift_point(&vs[0], &vals[0].points[i]),
                            lift_point(&vs[1], &vals[1].points[m01[i]]),
                            lift_point(&vs[2], &vals[2].points[m02[i]]),
                        ],
                        multiplicity: cell.multiplicity,
                    };
                    total += cell.multiplicity.unsigned_abs() as f64 * lifted.volume();
                }
            }
        }
        d => {
            return Err(Error::InvalidInput(format!("push-forward over {d}-cells unsupported")))
        }
    }
    Ok(total)
}

fn lift_point(x: &[f64; 2], y: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(2 + y.len());
    v.extend_from_slice(x);
    v.extend_from_slice(y);
    v
}
