//! Excess analysis over a cylinder: the excess measure on a dyadic grid, its
//! Lebesgue-density proxy and maximal function, the varifold excess, the
//! modified BV estimate, the graph-mass Taylor envelope, the measure maximal
//! function bound, and the empirical higher-integrability / strong-estimate
//! scans.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dirichlet::QField;
use crate::error::{Error, Result};
use crate::qspace;

use super::geometry2d::{clip_rect, polygon_area, polygon_disk_area};
use super::{slice, BaseRegion, SimplicialCurrent};

const PI: f64 = std::f64::consts::PI;

/// A dyadic square grid covering the cylinder base B_r(center).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaseGrid {
    pub center: [f64; 2],
    pub radius: f64,
    pub level: u32,
}

impl BaseGrid {
    pub fn cells_per_side(&self) -> usize {
        1usize << self.level
    }

    pub fn cell_size(&self) -> f64 {
        2.0 * self.radius / self.cells_per_side() as f64
    }

    pub fn num_cells(&self) -> usize {
        self.cells_per_side() * self.cells_per_side()
    }

    pub fn cell_rect(&self, id: usize) -> (f64, f64, f64, f64) {
        let k = self.cells_per_side();
        let (ix, iy) = (id % k, id / k);
        let h = self.cell_size();
        let x0 = self.center[0] - self.radius + ix as f64 * h;
        let y0 = self.center[1] - self.radius + iy as f64 * h;
        (x0, x0 + h, y0, y0 + h)
    }

    pub fn cell_center(&self, id: usize) -> [f64; 2] {
        let (x0, x1, y0, y1) = self.cell_rect(id);
        [0.5 * (x0 + x1), 0.5 * (y0 + y1)]
    }

    /// Cell ids whose bounding boxes can meet B_s(x).
    pub fn cells_near(&self, x: [f64; 2], s: f64) -> impl Iterator<Item = usize> + '_ {
        let k = self.cells_per_side();
        let h = self.cell_size();
        let ox = self.center[0] - self.radius;
        let oy = self.center[1] - self.radius;
        let ix0 = (((x[0] - s - ox) / h).floor().max(0.0) as usize).min(k.saturating_sub(1));
        let ix1 = ((((x[0] + s - ox) / h).ceil()).max(0.0) as usize).min(k);
        let iy0 = (((x[1] - s - oy) / h).floor().max(0.0) as usize).min(k.saturating_sub(1));
        let iy1 = ((((x[1] + s - oy) / h).ceil()).max(0.0) as usize).min(k);
        (iy0..iy1).flat_map(move |iy| (ix0..ix1).map(move |ix| iy * k + ix))
    }

    /// All aligned dyadic squares (as cell-id sets) of side 2^j cells.
    pub fn dyadic_squares(&self, j: u32) -> Vec<Vec<usize>> {
        let k = self.cells_per_side();
        let side = 1usize << j;
        if side > k {
            return Vec::new();
        }
        let mut out = Vec::new();
        for by in (0..k).step_by(side) {
            for bx in (0..k).step_by(side) {
                let mut ids = Vec::with_capacity(side * side);
                for dy in 0..side {
                    for dx in 0..side {
                        ids.push((by + dy) * k + (bx + dx));
                    }
                }
                out.push(ids);
            }
        }
        out
    }
}

/// Per-cell excess data over a cylinder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExcessField {
    pub grid: BaseGrid,
    pub q: i64,
    /// Mass of the current over (cell ∩ disk) x R^n.
    pub mass_cells: Vec<f64>,
    /// |cell ∩ disk|.
    pub area_cells: Vec<f64>,
    /// Excess measure per cell: mass - Q area.
    pub e_cells: Vec<f64>,
    /// Density proxy: finest-scale excess ratio.
    pub delta: Vec<f64>,
    /// Scale diagnostic: ratio of the coarser-scale density to the finest.
    pub delta_stability: Vec<f64>,
    /// Maximal function at cell centers.
    pub m_t: Vec<f64>,
    /// Global cylindrical excess E.
    pub excess: f64,
}

impl ExcessField {
    pub fn e_over(&self, cells: &[usize]) -> f64 {
        cells.iter().map(|&c| self.e_cells[c]).sum()
    }

    pub fn mass_over(&self, cells: &[usize]) -> f64 {
        cells.iter().map(|&c| self.mass_cells[c]).sum()
    }

    /// Quantized excess of a ball: cells whose center lies inside.
    pub fn e_ball(&self, x: [f64; 2], s: f64) -> f64 {
        self.grid
            .cells_near(x, s)
            .filter(|&c| dist2(self.grid.cell_center(c), x) <= s * s)
            .map(|c| self.e_cells[c])
            .sum()
    }

    /// Cell ids whose centers lie in B_s(x).
    pub fn cells_in_ball(&self, x: [f64; 2], s: f64) -> Vec<usize> {
        self.grid
            .cells_near(x, s)
            .filter(|&c| dist2(self.grid.cell_center(c), x) <= s * s)
            .collect()
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Verify the cylinder hypothesis (projection multiplicity constant = Q) on
/// a sample of interior points and return Q.
pub fn verify_cylinder_hypothesis(t: &SimplicialCurrent, center: [f64; 2], r: f64) -> Result<i64> {
    let mut q: Option<i64> = None;
    for (dx, dy) in [
        (0.011, 0.017),
        (-0.41, 0.23),
        (0.33, -0.37),
        (0.51, 0.49),
        (-0.13, -0.57),
        (0.0, 0.61),
    ] {
        let x = [center[0] + dx * r, center[1] + dy * r];
        let s = slice(t, x)?.total_sign();
        match q {
            None => q = Some(s),
            Some(prev) if prev != s => {
                return Err(Error::Hypothesis(format!(
                    "projection multiplicity is not constant: {prev} vs {s}"
                )))
            }
            _ => {}
        }
    }
    let q = q.unwrap();
    if q <= 0 {
        return Err(Error::Hypothesis(format!("projection multiplicity {q} must be positive")));
    }
    Ok(q)
}

/// Distribute current mass over (grid cell ∩ disk) pieces by exact clipping.
pub fn rasterize_mass(t: &SimplicialCurrent, grid: &BaseGrid) -> Vec<f64> {
    let k = grid.cells_per_side();
    let h = grid.cell_size();
    let center = grid.center;
    let r = grid.radius;
    let mut mass_cells = vec![0.0; grid.num_cells()];
    for cell in &t.cells {
        let tri = cell.base_triangle();
        let tri_area = polygon_area(&tri).abs();
        if tri_area < 1e-300 {
            continue;
        }
        let cell_mass = cell.multiplicity.unsigned_abs() as f64 * cell.volume();
        let mut poly = tri.to_vec();
        if polygon_area(&poly) < 0.0 {
            poly.reverse();
        }
        let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in &tri {
            xmin = xmin.min(p[0]);
            xmax = xmax.max(p[0]);
            ymin = ymin.min(p[1]);
            ymax = ymax.max(p[1]);
        }
        let ix0 = (((xmin - (center[0] - r)) / h).floor().max(0.0)) as usize;
        let iy0 = (((ymin - (center[1] - r)) / h).floor().max(0.0)) as usize;
        let ix1 = ((((xmax - (center[0] - r)) / h).ceil()).max(0.0) as usize).min(k);
        let iy1 = ((((ymax - (center[1] - r)) / h).ceil()).max(0.0) as usize).min(k);
        for iy in iy0..iy1 {
            for ix in ix0..ix1 {
                let id = iy * k + ix;
                let (x0, x1, y0, y1) = grid.cell_rect(id);
                let piece = clip_rect(&poly, x0, x1, y0, y1);
                if piece.len() < 3 {
                    continue;
                }
                let a = polygon_disk_area(&piece, center, r);
                if a > 0.0 {
                    mass_cells[id] += cell_mass * a / tri_area;
                }
            }
        }
    }
    mass_cells
}

/// Build the excess field of a current over the cylinder B_r(center) x R^n
/// on a dyadic grid with 2^level cells per side. Masses are distributed by
/// exact triangle/cell/disk clipping, so the excess measure is additive.
pub fn excess_field(
    t: &SimplicialCurrent,
    center: [f64; 2],
    r: f64,
    level: u32,
) -> Result<ExcessField> {
    let q = verify_cylinder_hypothesis(t, center, r)?;
    let grid = BaseGrid { center, radius: r, level };
    let k = grid.cells_per_side();
    let h = grid.cell_size();
    let mass_cells = rasterize_mass(t, &grid);

    let mut area_cells = vec![0.0; grid.num_cells()];
    for id in 0..grid.num_cells() {
        let (x0, x1, y0, y1) = grid.cell_rect(id);
        let sq = [[x0, y0], [x1, y0], [x1, y1], [x0, y1]];
        area_cells[id] = polygon_disk_area(&sq, center, r).max(0.0);
    }

    let e_cells: Vec<f64> =
        mass_cells.iter().zip(&area_cells).map(|(m, a)| m - q as f64 * a).collect();
    let excess = e_cells.iter().sum::<f64>() / (PI * r * r);

    // Density proxy at the finest scale, with a coarse-scale diagnostic.
    let mut delta = vec![0.0; grid.num_cells()];
    for id in 0..grid.num_cells() {
        if area_cells[id] > 1e-12 * h * h {
            delta[id] = (e_cells[id] / area_cells[id]).max(0.0);
        }
    }
    let mut delta_stability = vec![1.0; grid.num_cells()];
    if level >= 1 {
        for id in 0..grid.num_cells() {
            let (ix, iy) = (id % k, id / k);
            let (bx, by) = (ix / 2 * 2, iy / 2 * 2);
            let mut e2 = 0.0;
            let mut a2 = 0.0;
            for dy in 0..2 {
                for dx in 0..2 {
                    let j = (by + dy) * k + (bx + dx);
                    e2 += e_cells[j];
                    a2 += area_cells[j];
                }
            }
            let coarse = if a2 > 1e-12 * h * h { (e2 / a2).max(0.0) } else { 0.0 };
            delta_stability[id] = if delta[id] > 1e-14 { coarse / delta[id] } else { 1.0 };
        }
    }

    // Maximal function over grid-concentric dyadic balls inside the domain;
    // the finest cell-scale density participates so M_T >= delta cellwise.
    let mut m_t = delta.clone();
    for id in 0..grid.num_cells() {
        let x = grid.cell_center(id);
        let dx = (dist2(x, center)).sqrt();
        if dx >= r {
            continue;
        }
        let mut s = h;
        while s <= r - dx {
            let e = e_ball_from(&e_cells, &grid, x, s);
            m_t[id] = m_t[id].max(e / (PI * s * s));
            s *= 2.0;
        }
    }

    Ok(ExcessField {
        grid,
        q,
        mass_cells,
        area_cells,
        e_cells,
        delta,
        delta_stability,
        m_t,
        excess: excess.max(0.0),
    })
}

fn e_ball_from(e_cells: &[f64], grid: &BaseGrid, x: [f64; 2], s: f64) -> f64 {
    let mut acc = 0.0;
    for c in grid.cells_near(x, s) {
        if dist2(grid.cell_center(c), x) <= s * s {
            acc += e_cells[c];
        }
    }
    acc.max(0.0)
}

/// Varifold excess and the integral-form cylindrical excess of a current in
/// a cylinder. The varifold form uses the operator norm of the difference of
/// tangent projectors and is insensitive to orientation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarifoldReport {
    pub varifold_excess: f64,
    /// (2 w_m r^m)^{-1} \int |T - e|^2 d||T||; equals the mass-form excess
    /// under the cylinder hypothesis.
    pub integral_excess: f64,
}

pub fn varifold_excess(t: &SimplicialCurrent, center: [f64; 2], r: f64) -> Result<VarifoldReport> {
    let reg = BaseRegion::Disk { center, r };
    let d = t.ambient;
    let norm_factor = 2.0 * PI * r * r;
    let mut ve = 0.0;
    let mut ie = 0.0;
    for cell in &t.cells {
        let frac = reg.triangle_fraction(&cell.base_triangle());
        if frac <= 0.0 {
            continue;
        }
        let w = cell.multiplicity.unsigned_abs() as f64 * cell.volume() * frac;
        // Orthonormal tangent basis.
        let rows = cell.edge_matrix();
        let b = gram_schmidt(&rows);
        if b.len() != 2 {
            continue;
        }
        let mut diff: DMatrix<f64> = DMatrix::zeros(d, d);
        for bi in &b {
            for a in 0..d {
                for c in 0..d {
                    diff[(a, c)] += bi[a] * bi[c];
                }
            }
        }
        diff[(0, 0)] -= 1.0;
        diff[(1, 1)] -= 1.0;
        let op = diff
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .map(|e: &f64| e.abs())
            .fold(0.0f64, f64::max);
        ve += w * op * op / norm_factor;
        ie += w * 2.0 * (1.0 - cell.orientation_component()) / norm_factor;
    }
    Ok(VarifoldReport { varifold_excess: ve, integral_excess: ie })
}

fn gram_schmidt(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for row in rows {
        let mut v = row.clone();
        for b in &basis {
            let c: f64 = b.iter().zip(&v).map(|(x, y)| x * y).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= c * bi;
            }
        }
        let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            for vi in v.iter_mut() {
                *vi /= n;
            }
            basis.push(v);
        }
    }
    basis
}

/// A radial polynomial bump on the vertical fiber with max gradient exactly 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BumpPsi {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl BumpPsi {
    /// psi(y) = s (1 - |y-c|^2/R^2)^2 with s chosen so sup|grad psi| = 1.
    pub fn eval(&self, y: &[f64]) -> f64 {
        let t2: f64 =
            y.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                / (self.radius * self.radius);
        if t2 >= 1.0 {
            0.0
        } else {
            let s = 3.0 * 3.0f64.sqrt() * self.radius / 8.0;
            s * (1.0 - t2) * (1.0 - t2)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BvRow {
    pub level: u32,
    pub square: usize,
    /// Isotropic discrete total variation (the asserted left side).
    pub tv: f64,
    /// Anisotropic edge-sum variation (diagnostic).
    pub tv_edges: f64,
    /// Coarea route of the edge-sum variation (diagnostic).
    pub tv_coarea: f64,
    pub rhs: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BvReport {
    pub rows: Vec<BvRow>,
    pub all_ok: bool,
    pub max_coarea_gap: f64,
}

/// Modified BV estimate: (|D Phi_psi|(A))^2 <= 2 e_T(A) M(T over A), checked
/// on every dyadic square of the excess grid, with a discretization margin.
pub fn bv_estimate_check(
    t: &SimplicialCurrent,
    ef: &ExcessField,
    psi: &BumpPsi,
    margin: f64,
) -> Result<BvReport> {
    let grid = &ef.grid;
    let k = grid.cells_per_side();
    let h = grid.cell_size();
    let r = grid.radius;
    // Phi at cell centers (0 outside the disk, where slices are empty).
    let index = super::BaseIndex::build(t, 4.0 * h);
    let mut phi = vec![0.0; grid.num_cells()];
    let mut in_disk = vec![false; grid.num_cells()];
    for id in 0..grid.num_cells() {
        let x = grid.cell_center(id);
        if dist2(x, grid.center) < r * r {
            in_disk[id] = true;
            phi[id] = super::slice_indexed(t, Some(&index), x)?.pair(&|y| psi.eval(y));
        }
    }

    let mut rows = Vec::new();
    let mut all_ok = true;
    let mut max_gap = 0.0f64;
    for level in 1..=grid.level {
        for (si, ids) in grid.dyadic_squares(level).into_iter().enumerate() {
            let cells: Vec<usize> = ids.iter().copied().filter(|&c| in_disk[c]).collect();
            if cells.len() < 2 {
                continue;
            }
            let member = |c: usize| cells.binary_search(&c).is_ok();
            // Isotropic total variation from forward differences (this is
            // the discrete |D Phi|(A)) and the anisotropic edge sum kept as
            // a diagnostic.
            let mut tv = 0.0;
            let mut tv_edges = 0.0;
            for &c in &cells {
                let (ix, iy) = (c % k, c / k);
                let dx = if ix + 1 < k && member(c + 1) {
                    let j = (phi[c + 1] - phi[c]).abs();
                    tv_edges += j * h;
                    j
                } else {
                    0.0
                };
                let dy = if iy + 1 < k && member(c + k) {
                    let j = (phi[c + k] - phi[c]).abs();
                    tv_edges += j * h;
                    j
                } else {
                    0.0
                };
                tv += (dx * dx + dy * dy).sqrt() * h;
            }
            // Coarea route: integrate perimeter of superlevel sets.
            let mut tv_coarea = 0.0;
            let mut vals: Vec<f64> = cells.iter().map(|&c| phi[c]).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
            for w in vals.windows(2) {
                let thr = 0.5 * (w[0] + w[1]);
                let mut per = 0.0;
                for &c in &cells {
                    let (ix, iy) = (c % k, c / k);
                    if ix + 1 < k && member(c + 1) && (phi[c] > thr) != (phi[c + 1] > thr) {
                        per += h;
                    }
                    if iy + 1 < k && member(c + k) && (phi[c] > thr) != (phi[c + k] > thr) {
                        per += h;
                    }
                }
                tv_coarea += per * (w[1] - w[0]);
            }
            if tv_edges > 1e-13 {
                max_gap = max_gap.max((tv_edges - tv_coarea).abs() / tv_edges);
            }

            let e = ef.e_over(&cells).max(0.0);
            let m = ef.mass_over(&cells);
            let rhs = 2.0 * e * m;
            let ok = tv * tv <= rhs * (1.0 + margin) + 1e-12;
            all_ok &= ok;
            rows.push(BvRow { level, square: si, tv, tv_edges, tv_coarea, rhs, ok });
        }
    }
    Ok(BvReport { rows, all_ok, max_coarea_gap: max_gap })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaylorReport {
    pub lip: f64,
    /// Total graph excess over the domain.
    pub total_excess: f64,
    /// Total squared-gradient integral.
    pub total_dirichlet: f64,
    /// The admissible window for the envelope constant: the upper envelope
    /// forces C >= lower_c, the lower envelope forces C <= upper_c.
    pub lower_c: f64,
    pub upper_c: f64,
    /// Relative error |e - dg2/2| / dg2 over the whole domain.
    pub relative_error: f64,
}

impl TaylorReport {
    /// Does the two-sided envelope hold cellwise with the given constant?
    pub fn holds_with(&self, c: f64) -> bool {
        self.lower_c <= c && c <= self.upper_c
    }
}

/// Per-cell Taylor envelope of the graph mass: for Lip(g) <= 1,
/// (1 - C^{-1} L^2)/2 int|Dg|^2 <= e_gr(A) <= (1 + C L^2)/2 int|Dg|^2.
pub fn taylor_check(g: &QField) -> Result<TaylorReport> {
    if g.measured_lip() > 1.0 + 1e-9 {
        return Err(Error::InvalidInput(format!(
            "Taylor envelope requires Lip <= 1, measured {}",
            g.measured_lip()
        )));
    }
    let mesh = &g.mesh;
    let (q, n) = (g.q(), g.n());
    let lip = g.measured_lip();
    let mut total_e = 0.0;
    let mut total_d = 0.0;
    let mut lower_c = 0.0f64;
    let mut upper_c = f64::INFINITY;
    for cell in &mesh.cells {
        let [a, b, c] = cell.v;
        let (fa, fb, fc) = (&g.values[a], &g.values[b], &g.values[c]);
        let m_ab = qspace::optimal_matching(fa, fb)?;
        let m_ac = qspace::optimal_matching(fa, fc)?;
        let (pa, pb, pc) = (mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
        let base = [[pb[0] - pa[0], pc[0] - pa[0]], [pb[1] - pa[1], pc[1] - pa[1]]];
        let det = base[0][0] * base[1][1] - base[0][1] * base[1][0];
        let inv = [
            [base[1][1] / det, -base[0][1] / det],
            [-base[1][0] / det, base[0][0] / det],
        ];
        let mut cell_e = 0.0;
        let mut cell_d = 0.0;
        for i in 0..q {
            // Sheet gradient A_i (n x 2) from the two edge differences.
            let mut grad = vec![[0.0f64; 2]; n];
            for d in 0..n {
                let d1 = fb.points[m_ab[i]][d] - fa.points[i][d];
                let d2 = fc.points[m_ac[i]][d] - fa.points[i][d];
                grad[d][0] = d1 * inv[0][0] + d2 * inv[1][0];
                grad[d][1] = d1 * inv[0][1] + d2 * inv[1][1];
            }
            let fro2: f64 = grad.iter().flat_map(|r| r.iter()).map(|x| x * x).sum();
            // Graph area via det(I2 + A^T A).
            let mut gmat = [[1.0, 0.0], [0.0, 1.0]];
            for r in 0..2 {
                for cc in 0..2 {
                    for gd in grad.iter() {
                        gmat[r][cc] += gd[r] * gd[cc];
                    }
                }
            }
            let jac = (gmat[0][0] * gmat[1][1] - gmat[0][1] * gmat[1][0]).sqrt();
            cell_e += (jac - 1.0) * cell.area;
            cell_d += fro2 * cell.area;
        }
        total_e += cell_e;
        total_d += cell_d;
        if cell_d > 1e-300 && lip > 1e-12 {
            let ratio = 2.0 * cell_e / cell_d;
            if ratio < 1.0 {
                upper_c = upper_c.min(lip * lip / (1.0 - ratio).max(1e-300));
            } else if ratio > 1.0 {
                lower_c = lower_c.max((ratio - 1.0) / (lip * lip));
            }
        }
    }
    let relative_error = if total_d > 1e-300 {
        (total_e - 0.5 * total_d).abs() / total_d
    } else {
        0.0
    };
    Ok(TaylorReport {
        lip,
        total_excess: total_e,
        total_dirichlet: total_d,
        lower_c,
        upper_c,
        relative_error,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaximalRow {
    pub r: f64,
    pub lhs_area: f64,
    pub rhs: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaximalReport {
    pub theta: f64,
    pub r0: f64,
    pub j_theta_cells: Vec<usize>,
    pub rows: Vec<MaximalRow>,
    pub all_ok: bool,
}

/// Local maximal function bound for a nonnegative cell measure on B_{4s}:
/// |J_theta ∩ B_r| <= (5^m/theta) mu({M mu >= 2^{-m} theta} ∩ B_{r+r0 s}).
pub fn maximal_measure(
    grid: &BaseGrid,
    mu: &[f64],
    theta: f64,
    margin: f64,
) -> Result<MaximalReport> {
    let m = 2u32;
    let four_s = grid.radius;
    let s = four_s / 4.0;
    let total: f64 = mu.iter().sum();
    let r0 = (total / (PI * theta)).powf(1.0 / m as f64) / s;
    if r0 >= 0.2 {
        return Err(Error::Hypothesis(format!(
            "r0 = {r0:.3} >= 1/5; theta too small for this measure"
        )));
    }
    let h = grid.cell_size();
    let cell_area = h * h;
    // Local maximal function at cell centers.
    let mut mmu = vec![0.0; grid.num_cells()];
    for id in 0..grid.num_cells() {
        let x = grid.cell_center(id);
        let dx = dist2(x, grid.center).sqrt();
        if dx >= four_s {
            continue;
        }
        mmu[id] = mu[id] / cell_area;
        let mut radius = h;
        while radius <= four_s - dx {
            let ball: f64 = grid
                .cells_near(x, radius)
                .filter(|&c| dist2(grid.cell_center(c), x) <= radius * radius)
                .map(|c| mu[c])
                .sum();
            mmu[id] = mmu[id].max(ball / (PI * radius * radius));
            radius *= 2.0;
        }
    }
    let j_theta: Vec<usize> = (0..grid.num_cells())
        .filter(|&c| {
            mmu[c] >= theta && dist2(grid.cell_center(c), grid.center) <= (3.0 * s) * (3.0 * s)
        })
        .collect();
    let thr = theta / (1 << m) as f64;
    let mut rows = Vec::new();
    let mut all_ok = true;
    for rr in [s, 1.5 * s, 2.0 * s, 2.5 * s, 3.0 * s] {
        let lhs = j_theta
            .iter()
            .filter(|&&c| dist2(grid.cell_center(c), grid.center) <= rr * rr)
            .count() as f64
            * cell_area;
        let enlarged = rr + r0 * s;
        let rhs_mass: f64 = (0..grid.num_cells())
            .filter(|&c| {
                mmu[c] >= thr && dist2(grid.cell_center(c), grid.center) <= enlarged * enlarged
            })
            .map(|c| mu[c])
            .sum();
        let rhs = 25.0 / theta * rhs_mass;
        let ok = lhs <= rhs * (1.0 + margin) + 1e-12;
        all_ok &= ok;
        rows.push(MaximalRow { r: rr, lhs_area: lhs, rhs, ok });
    }
    Ok(MaximalReport { theta, r0, j_theta_cells: j_theta, rows, all_ok })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanRow {
    pub parameter: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// Empirical higher-integrability scan: int_{delta<=1 ∩ B_inner} delta^p
/// against E^p across the exponent sweep. Reports only; asserts
/// monotonicity of the left side in p.
pub fn higher_integrability_scan(
    ef: &ExcessField,
    inner_fraction: f64,
    ps: &[f64],
) -> Result<Vec<ScanRow>> {
    let inner = ef.grid.radius * inner_fraction;
    let mut rows = Vec::new();
    let mut prev = f64::INFINITY;
    for &p in ps {
        let mut lhs = 0.0;
        for c in 0..ef.grid.num_cells() {
            let d = ef.delta[c];
            if d <= 1.0 && dist2(ef.grid.cell_center(c), ef.grid.center) <= inner * inner {
                lhs += d.powf(p) * ef.area_cells[c];
            }
        }
        if lhs > prev + 1e-12 {
            return Err(Error::InvalidInput(
                "density <= 1 yet the p-integral increased with p".into(),
            ));
        }
        prev = lhs;
        let rhs = ef.excess.powf(p);
        rows.push(ScanRow { parameter: p, lhs, rhs, ratio: if rhs > 0.0 { lhs / rhs } else { 0.0 } });
    }
    Ok(rows)
}

/// Empirical strong-estimate scan: sup over dyadic squares of
/// e_T(A) / (E (E^sigma + |A|^sigma)).
pub fn strong_estimate_scan(ef: &ExcessField, sigmas: &[f64]) -> Vec<ScanRow> {
    let mut rows = Vec::new();
    for &sigma in sigmas {
        let mut sup = 0.0f64;
        let mut arg_area = 0.0;
        for level in 0..=ef.grid.level {
            for ids in ef.grid.dyadic_squares(level) {
                let e: f64 = ids.iter().map(|&c| ef.e_cells[c]).sum();
                let a: f64 = ids.iter().map(|&c| ef.area_cells[c]).sum();
                if a <= 0.0 || ef.excess <= 0.0 {
                    continue;
                }
                let denom = ef.excess * (ef.excess.powf(sigma) + a.powf(sigma));
                let ratio = e.max(0.0) / denom;
                if ratio > sup {
                    sup = ratio;
                    arg_area = a;
                }
            }
        }
        rows.push(ScanRow { parameter: sigma, lhs: sup, rhs: arg_area, ratio: sup });
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::currents::fixtures;
    use crate::mesh::Mesh;
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn square2() -> Arc<Mesh> {
        Arc::new(Mesh::box_grid(-1.0, 1.0, -1.0, 1.0, 16, 16).unwrap())
    }

    #[test]
    fn flat_sheet_zero_excess() {
        let mesh = square2();
        let t = fixtures::flat_sheets(&mesh, &[vec![0.2], vec![-0.4]]).unwrap();
        let ef = excess_field(&t, [0.0, 0.0], 0.9, 4).unwrap();
        assert_eq!(ef.q, 2);
        assert!(ef.excess.abs() < 1e-10, "E = {}", ef.excess);
        assert!(ef.e_cells.iter().all(|e| e.abs() < 1e-10));
        assert!(ef.m_t.iter().all(|m| m.abs() < 1e-8));
    }

    #[test]
    fn tilted_sheet_exact_excess() {
        let mesh = square2();
        let a = vec![vec![0.4, -0.3]];
        let t = fixtures::tilted_sheet(&mesh, &a).unwrap();
        let ef = excess_field(&t, [0.0, 0.0], 0.9, 4).unwrap();
        let expected = fixtures::tilt_excess_density(&a);
        assert_abs_diff_eq!(ef.excess, expected, epsilon = 1e-9);
        // Dyadic additivity: cells sum to the total.
        let total: f64 = ef.e_cells.iter().sum();
        assert_abs_diff_eq!(total, expected * PI * 0.81, epsilon = 1e-9);
        // M_T >= delta cellwise.
        for (m, d) in ef.m_t.iter().zip(&ef.delta) {
            assert!(m + 1e-12 >= *d);
        }
    }

    #[test]
    fn varifold_vs_cylindrical() {
        let mesh = square2();
        // Tilted sheet: VE <= E, both positive, ratio stable under tilt.
        let mut ratios = Vec::new();
        for ang in [0.05f64, 0.1, 0.15] {
            let a = vec![vec![ang, 0.0]];
            let t = fixtures::tilted_sheet(&mesh, &a).unwrap();
            let rep = varifold_excess(&t, [0.0, 0.0], 0.9).unwrap();
            assert!(rep.varifold_excess <= 2.0 * rep.integral_excess + 1e-12);
            assert!(rep.varifold_excess > 0.0);
            ratios.push(rep.varifold_excess / rep.integral_excess);
        }
        let spread = ratios.iter().cloned().fold(0.0, f64::max)
            / ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread < 1.01, "tilt ratio drifts: {ratios:?}");

        // Orientation-reversed pair: VE = 0, integral excess = 2.
        let t = fixtures::orientation_reversed_pair(&mesh, 1).unwrap();
        let rep = varifold_excess(&t, [0.0, 0.0], 0.9).unwrap();
        assert!(rep.varifold_excess.abs() < 1e-12);
        assert_abs_diff_eq!(rep.integral_excess, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn taylor_envelope_linear_sheet() {
        let mesh = square2();
        for eps in [0.2f64, 0.1, 0.05] {
            let a = vec![vec![eps, 0.0]];
            let f = fixtures::tilted_field(&mesh, &a);
            let rep = taylor_check(&f).unwrap();
            // Single linear sheet: e = (sqrt(1+eps^2)-1)|A|, dg2 = eps^2 |A|.
            let exact = ((1.0 + eps * eps).sqrt() - 1.0) / (eps * eps);
            assert_abs_diff_eq!(rep.total_excess / rep.total_dirichlet, exact, epsilon = 1e-9);
            assert!(rep.relative_error <= 0.3 * eps * eps);
        }
    }

    #[test]
    fn bv_estimate_on_tilted_sheet() {
        let mesh = square2();
        let a = vec![vec![0.3, 0.1]];
        let t = fixtures::tilted_sheet(&mesh, &a).unwrap();
        let ef = excess_field(&t, [0.0, 0.0], 0.8, 4).unwrap();
        let psi = BumpPsi { center: vec![0.0], radius: 1.0 };
        let rep = bv_estimate_check(&t, &ef, &psi, 0.10).unwrap();
        assert!(rep.all_ok, "failing rows: {:?}", rep.rows.iter().filter(|r| !r.ok).count());
        assert!(rep.max_coarea_gap < 0.01);
    }

    #[test]
    fn maximal_measure_dirac_and_zero() {
        let grid = BaseGrid { center: [0.0, 0.0], radius: 2.0, level: 5 };
        let zero = vec![0.0; grid.num_cells()];
        let rep = maximal_measure(&grid, &zero, 0.4, 0.10).unwrap();
        assert!(rep.j_theta_cells.is_empty());
        assert!(rep.all_ok);

        // A single-cell point mass.
        let mut mu = vec![0.0; grid.num_cells()];
        let mid = grid.num_cells() / 2 + grid.cells_per_side() / 2;
        mu[mid] = 0.008;
        let rep = maximal_measure(&grid, &mu, 0.4, 0.10).unwrap();
        assert!(!rep.j_theta_cells.is_empty());
        assert!(rep.all_ok, "rows: {:?}", rep.rows);
    }

    #[test]
    fn scans_are_internally_consistent() {
        let mesh = square2();
        let a = vec![vec![0.2, 0.1]];
        let t = fixtures::tilted_sheet(&mesh, &a).unwrap();
        let ef = excess_field(&t, [0.0, 0.0], 0.8, 4).unwrap();
        let rows = higher_integrability_scan(&ef, 0.5, &[1.0, 1.25, 1.5, 2.0]).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].lhs <= w[0].lhs + 1e-12);
        }
        let srows = strong_estimate_scan(&ef, &[0.25, 0.5]);
        assert_eq!(srows.len(), 2);
        assert!(srows.iter().all(|r| r.lhs.is_finite()));
    }
}
