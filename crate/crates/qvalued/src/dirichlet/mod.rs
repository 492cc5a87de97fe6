//! Discrete Q-valued Sobolev maps on triangulated meshes: the assignment-
//! coupled Dirichlet energy, block-coordinate minimization with matching
//! re-assignment, and the supporting smoothing/interpolation machinery.

pub mod smoothing;

use std::sync::Arc;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::qspace::{self, QPoint};

/// A Q-valued function sampled at mesh vertices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QField {
    #[serde(skip, default = "empty_mesh")]
    pub mesh: Arc<Mesh>,
    /// Serialized form keeps the mesh descriptor next to the values.
    pub mesh_kind: crate::mesh::MeshKind,
    pub values: Vec<QPoint>,
}

fn empty_mesh() -> Arc<Mesh> {
    Arc::new(Mesh {
        kind: crate::mesh::MeshKind::Explicit,
        vertices: Vec::new(),
        cells: Vec::new(),
        edges: Vec::new(),
        boundary: Vec::new(),
        vertex_area: Vec::new(),
    })
}

impl QField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<QPoint>) -> Result<Self> {
        if values.len() != mesh.num_vertices() {
            return Err(Error::InvalidInput(format!(
                "field has {} values for {} vertices",
                values.len(),
                mesh.num_vertices()
            )));
        }
        let (q, n) = (values[0].q, values[0].n);
        if values.iter().any(|v| v.q != q || v.n != n) {
            return Err(Error::InvalidInput("field values must share q and n".into()));
        }
        let mesh_kind = mesh.kind.clone();
        Ok(Self { mesh, mesh_kind, values })
    }

    pub fn constant(mesh: Arc<Mesh>, value: QPoint) -> Self {
        let values = vec![value; mesh.num_vertices()];
        let mesh_kind = mesh.kind.clone();
        Self { mesh, mesh_kind, values }
    }

    /// Sample a vertex-indexed function.
    pub fn from_fn(mesh: Arc<Mesh>, mut f: impl FnMut(&[f64; 2]) -> QPoint) -> Self {
        let values = mesh.vertices.iter().map(|v| f(v)).collect();
        let mesh_kind = mesh.kind.clone();
        Self { mesh, mesh_kind, values }
    }

    pub fn q(&self) -> usize {
        self.values[0].q
    }

    pub fn n(&self) -> usize {
        self.values[0].n
    }

    /// Values on the boundary vertex set.
    pub fn trace(&self) -> Vec<(usize, QPoint)> {
        self.mesh.boundary.iter().map(|&v| (v, self.values[v].clone())).collect()
    }

    /// Measured Lipschitz constant over mesh edges.
    pub fn measured_lip(&self) -> f64 {
        self.mesh
            .edges
            .iter()
            .map(|e| {
                qspace::metric_g(&self.values[e.a], &self.values[e.b]).unwrap() / e.len
            })
            .fold(0.0, f64::max)
    }

    /// L2 distance between two fields on the same mesh.
    pub fn l2_distance(&self, other: &QField) -> Result<f64> {
        if self.values.len() != other.values.len() {
            return Err(Error::InvalidInput("fields live on different meshes".into()));
        }
        let mut acc = 0.0;
        for (i, (a, b)) in self.values.iter().zip(&other.values).enumerate() {
            acc += self.mesh.vertex_area[i] * qspace::metric_g(a, b)?.powi(2);
        }
        Ok(acc.sqrt())
    }
}

/// Dirichlet energy of a field, with per-cell densities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyReport {
    pub total: f64,
    /// Per-cell energy (integral of |Du|^2 over the cell).
    pub per_cell: Vec<f64>,
    /// (sweep, energy, max subgradient) trace from minimization.
    pub trace: Vec<(usize, f64, f64)>,
    pub converged: bool,
}

/// Assignment-coupled edge energy: sum over edges of w_e * G(u_a, u_b)^2.
///
/// With cotangent weights this equals the piecewise-linear Dirichlet integral
/// whenever the per-cell sheet matchings are consistent; per-cell entries
/// split each edge term between its incident cells in proportion to the
/// cell's cotangent contribution.
pub fn dirichlet_energy(u: &QField) -> Result<EnergyReport> {
    let mesh = &u.mesh;
    if mesh.cells.is_empty() {
        return Err(Error::Geometry("degenerate mesh".into()));
    }
    let mut per_cell = vec![0.0; mesh.cells.len()];
    let mut total = 0.0;
    // Recompute per-cell cotangent shares (the mesh stores only sums).
    for (ci, cell) in mesh.cells.iter().enumerate() {
        let [i, j, k] = cell.v;
        for (a, b, c) in [(i, j, k), (j, k, i), (k, i, j)] {
            let (pa, pb, pc) = (mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
            let uu = [pa[0] - pc[0], pa[1] - pc[1]];
            let vv = [pb[0] - pc[0], pb[1] - pc[1]];
            let cross = (uu[0] * vv[1] - uu[1] * vv[0]).abs();
            let cot = (uu[0] * vv[0] + uu[1] * vv[1]) / cross.max(1e-300);
            let g = qspace::metric_g(&u.values[a], &u.values[b])?;
            per_cell[ci] += 0.5 * cot * g * g;
        }
        total += per_cell[ci];
    }
    Ok(EnergyReport { total, per_cell, trace: Vec::new(), converged: true })
}

#[derive(Debug, Clone)]
pub struct MinimizeOpts {
    pub max_sweeps: usize,
    pub restarts: usize,
    /// Stationarity tolerance factor; the threshold is tol * (E0 + 1).
    pub tol: f64,
    pub seed: u64,
}

impl Default for MinimizeOpts {
    fn default() -> Self {
        Self { max_sweeps: 10_000, restarts: 5, tol: 1e-8, seed: 7 }
    }
}

/// Minimize the Dirichlet energy with the given boundary values fixed.
///
/// Initialization embeds the boundary data, extends each embedded component
/// harmonically, and retracts back; descent alternates exact per-vertex
/// minimization for frozen matchings with matching re-assignment, plus
/// sheet-perturbation restarts.
pub fn minimize_dirichlet(
    emb: &Embedding,
    mesh: &Arc<Mesh>,
    boundary: &[(usize, QPoint)],
    opts: &MinimizeOpts,
) -> Result<(QField, EnergyReport)> {
    let spec = emb.spec();
    let boundary_ids: Vec<usize> = boundary.iter().map(|(v, _)| *v).collect();
    {
        let mut sorted = boundary_ids.clone();
        sorted.sort_unstable();
        if sorted != mesh.boundary {
            return Err(Error::InvalidInput(
                "boundary data must cover exactly the boundary vertex set".into(),
            ));
        }
    }

    // Harmonic initialization in the embedded coordinates.
    let nn = spec.big_n();
    let mut comp = vec![vec![0.0; mesh.num_vertices()]; nn];
    let mut fixed = vec![false; mesh.num_vertices()];
    for (v, t) in boundary {
        let w = emb.xi(t)?;
        for (c, val) in w.iter().enumerate() {
            comp[c][*v] = *val;
        }
        fixed[*v] = true;
    }
    for c in comp.iter_mut() {
        harmonic_extend(mesh, c, &fixed);
    }
    let mut values: Vec<QPoint> = Vec::with_capacity(mesh.num_vertices());
    for v in 0..mesh.num_vertices() {
        if fixed[v] {
            values.push(boundary.iter().find(|(b, _)| *b == v).unwrap().1.clone());
        } else {
            let w: Vec<f64> = (0..nn).map(|c| comp[c][v]).collect();
            values.push(emb.retract(&w)?.tuple);
        }
    }
    let mut field = QField::new(Arc::clone(mesh), values)?;

    let e0 = dirichlet_energy(&field)?.total;
    let threshold = opts.tol * (e0 + 1.0);
    let mut trace = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut best_field = field.clone();
    let mut best_energy = e0;
    let mut converged = false;

    for restart in 0..=opts.restarts {
        if restart > 0 {
            // Perturb sheets on a random interior subset of the best iterate.
            field = best_field.clone();
            let interior: Vec<usize> =
                (0..mesh.num_vertices()).filter(|&v| !mesh.is_boundary(v)).collect();
            for &v in &interior {
                if rng.random_range(0.0..1.0) < 0.2 {
                    let q = field.values[v].q;
                    let scale = 0.1 * qspace::diameter(&field.values[v]).max(1e-3);
                    let mut pts = field.values[v].points.clone();
                    pts.rotate_left(rng.random_range(0..q));
                    for p in pts.iter_mut() {
                        for x in p.iter_mut() {
                            *x += rng.random_range(-1.0..1.0) * scale;
                        }
                    }
                    field.values[v] = QPoint::new(field.values[v].n, pts)?;
                }
            }
        }
        let (energy, sub, sweeps_used) =
            descend(&mut field, mesh, threshold, opts.max_sweeps, &mut trace)?;
        if energy < best_energy || restart == 0 {
            best_energy = energy;
            best_field = field.clone();
            if sub <= threshold {
                converged = true;
            }
        }
        let _ = sweeps_used;
    }

    let mut report = dirichlet_energy(&best_field)?;
    report.trace = trace;
    report.converged = converged;
    Ok((best_field, report))
}

/// Gauss-Seidel sweeps of exact per-vertex minimization.
fn descend(
    field: &mut QField,
    mesh: &Arc<Mesh>,
    threshold: f64,
    max_sweeps: usize,
    trace: &mut Vec<(usize, f64, f64)>,
) -> Result<(f64, f64, usize)> {
    let vertex_edges = mesh.vertex_edges();
    let q = field.q();
    let n = field.n();
    let mut last_energy = f64::INFINITY;
    let mut max_sub = f64::INFINITY;
    for sweep in 0..max_sweeps {
        for v in 0..mesh.num_vertices() {
            if mesh.is_boundary(v) {
                continue;
            }
            // Match-then-average rounds; each round is monotone.
            for _ in 0..2 {
                let mut acc = vec![vec![0.0; n]; q];
                let mut wsum = 0.0;
                for &ei in &vertex_edges[v] {
                    let e = &mesh.edges[ei];
                    if e.weight.abs() < 1e-14 {
                        continue;
                    }
                    let other = if e.a == v { e.b } else { e.a };
                    let m = qspace::optimal_matching(&field.values[v], &field.values[other])?;
                    for (i, &mi) in m.iter().enumerate() {
                        for d in 0..n {
                            acc[i][d] += e.weight * field.values[other].points[mi][d];
                        }
                    }
                    wsum += e.weight;
                }
                if wsum <= 0.0 {
                    break;
                }
                let pts: Vec<Vec<f64>> =
                    acc.into_iter().map(|p| p.into_iter().map(|x| x / wsum).collect()).collect();
                let new_val = QPoint::new(n, pts)?;
                let moved = qspace::metric_g(&new_val, &field.values[v])?;
                field.values[v] = new_val;
                if moved < 1e-15 {
                    break;
                }
            }
        }
        // Periodic convergence check.
        if sweep % 25 == 24 || sweep + 1 == max_sweeps {
            let energy = dirichlet_energy(field)?.total;
            max_sub = max_subgradient(field, mesh, &vertex_edges)?;
            trace.push((sweep + 1, energy, max_sub));
            let stalled = last_energy - energy <= 1e-15 * (energy.abs() + 1.0);
            last_energy = energy;
            if max_sub <= threshold || stalled {
                return Ok((energy, max_sub, sweep + 1));
            }
        }
    }
    let energy = dirichlet_energy(field)?.total;
    Ok((energy, max_sub, max_sweeps))
}

/// Largest per-vertex subgradient norm, using lexicographically smallest
/// optimal matchings.
pub fn max_subgradient(
    field: &QField,
    mesh: &Mesh,
    vertex_edges: &[Vec<usize>],
) -> Result<f64> {
    let (q, n) = (field.q(), field.n());
    let mut worst = 0.0f64;
    for v in 0..mesh.num_vertices() {
        if mesh.is_boundary(v) {
            continue;
        }
        let mut grad = vec![vec![0.0; n]; q];
        for &ei in &vertex_edges[v] {
            let e = &mesh.edges[ei];
            if e.weight.abs() < 1e-14 {
                continue;
            }
            let other = if e.a == v { e.b } else { e.a };
            let m = qspace::optimal_matching(&field.values[v], &field.values[other])?;
            for (i, &mi) in m.iter().enumerate() {
                for d in 0..n {
                    grad[i][d] += 2.0
                        * e.weight
                        * (field.values[v].points[i][d] - field.values[other].points[mi][d]);
                }
            }
        }
        let norm: f64 =
            grad.iter().flat_map(|g| g.iter()).map(|x| x * x).sum::<f64>().sqrt();
        worst = worst.max(norm);
    }
    Ok(worst)
}

/// Solve the weighted graph Laplace equation with the fixed vertices as
/// Dirichlet data, by conjugate gradients.
pub fn harmonic_extend(mesh: &Mesh, values: &mut [f64], fixed: &[bool]) {
    let nv = mesh.num_vertices();
    let free: Vec<usize> = (0..nv).filter(|&v| !fixed[v]).collect();
    if free.is_empty() {
        return;
    }
    let index: Vec<usize> = {
        let mut idx = vec![usize::MAX; nv];
        for (i, &v) in free.iter().enumerate() {
            idx[v] = i;
        }
        idx
    };
    // b = sum of weights into fixed neighbors * their values; A = weighted Laplacian.
    let mut diag = vec![0.0; free.len()];
    let mut b = vec![0.0; free.len()];
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); free.len()];
    for e in &mesh.edges {
        let w = e.weight;
        if w.abs() < 1e-14 {
            continue;
        }
        for (u, v) in [(e.a, e.b), (e.b, e.a)] {
            if !fixed[u] {
                diag[index[u]] += w;
                if fixed[v] {
                    b[index[u]] += w * values[v];
                } else {
                    adj[index[u]].push((index[v], w));
                }
            }
        }
    }
    let apply = |x: &[f64], out: &mut [f64]| {
        for i in 0..x.len() {
            let mut acc = diag[i] * x[i];
            for &(j, w) in &adj[i] {
                acc -= w * x[j];
            }
            out[i] = acc;
        }
    };
    let mut x: Vec<f64> = free.iter().map(|&v| values[v]).collect();
    let mut ax = vec![0.0; free.len()];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut p = r.clone();
    let mut rs: f64 = r.iter().map(|v| v * v).sum();
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-30);
    for _ in 0..4 * free.len().max(100) {
        if rs.sqrt() <= 1e-12 * b_norm {
            break;
        }
        apply(&p, &mut ax);
        let pap: f64 = p.iter().zip(&ax).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break;
        }
        let alpha = rs / pap;
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ax[i];
        }
        let rs_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rs_new / rs;
        rs = rs_new;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
    }
    for (i, &v) in free.iter().enumerate() {
        values[v] = x[i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_field_has_zero_energy() {
        let mesh = Arc::new(Mesh::unit_square(8).unwrap());
        let u = QField::constant(Arc::clone(&mesh), QPoint::scalar(&[1.0, 2.0]));
        assert_eq!(dirichlet_energy(&u).unwrap().total, 0.0);
    }

    #[test]
    fn linear_field_energy_is_exact() {
        // u(x) = A x single-valued (q=1, n=2); energy = |A|_F^2 * area.
        let mesh = Arc::new(Mesh::unit_square(32).unwrap());
        let a = [[1.25, -0.5], [0.75, 2.0]];
        let u = QField::from_fn(Arc::clone(&mesh), |p| {
            QPoint::new(
                2,
                vec![vec![a[0][0] * p[0] + a[0][1] * p[1], a[1][0] * p[0] + a[1][1] * p[1]]],
            )
            .unwrap()
        });
        let fro2 = a.iter().flatten().map(|x| x * x).sum::<f64>();
        let e = dirichlet_energy(&u).unwrap();
        assert_abs_diff_eq!(e.total, fro2, epsilon = 1e-6);
        // Per-cell entries sum to the total.
        let s: f64 = e.per_cell.iter().sum();
        assert_abs_diff_eq!(s, e.total, epsilon = 1e-10);
    }

    #[test]
    fn branch_field_energy_approaches_two_pi() {
        // The 2-valued square-root field on the unit disk: continuum energy 2*pi.
        for (rings, tol) in [(16usize, 0.2), (32, 0.1)] {
            let mesh = Arc::new(Mesh::disk_polar(1.0, rings, rings * 2).unwrap());
            let u = QField::from_fn(Arc::clone(&mesh), |p| sqrt_branch(p));
            let e = dirichlet_energy(&u).unwrap().total;
            let rel = (e - 2.0 * std::f64::consts::PI).abs() / (2.0 * std::f64::consts::PI);
            assert!(rel < tol, "rings={rings}: energy {e}, rel err {rel}");
        }
    }

    pub(crate) fn sqrt_branch(p: &[f64; 2]) -> QPoint {
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt().sqrt();
        let th = p[1].atan2(p[0]) / 2.0;
        let w = [r * th.cos(), r * th.sin()];
        QPoint::new(2, vec![vec![w[0], w[1]], vec![-w[0], -w[1]]]).unwrap()
    }

    #[test]
    fn minimizer_constant_boundary() {
        let emb = Embedding::standard(2, 1).unwrap();
        let mesh = Arc::new(Mesh::unit_square(8).unwrap());
        let bval = QPoint::scalar(&[0.5, 0.5]);
        let boundary: Vec<(usize, QPoint)> =
            mesh.boundary.iter().map(|&v| (v, bval.clone())).collect();
        let (field, report) =
            minimize_dirichlet(&emb, &mesh, &boundary, &MinimizeOpts::default()).unwrap();
        assert!(report.total < 1e-16, "energy {}", report.total);
        for v in &field.values {
            assert_abs_diff_eq!(v.points[0][0], 0.5, epsilon = 1e-7);
        }
    }

    #[test]
    fn minimizer_matches_harmonic_oracle() {
        // Single-valued boundary Re(z^2): analytic Dirichlet energy 2*pi on
        // the unit disk (computed by radial quadrature of |grad|^2 = 4 r^2).
        let emb = Embedding::standard(1, 1).unwrap();
        let mesh = Arc::new(Mesh::disk_polar(1.0, 32, 64).unwrap());
        let boundary: Vec<(usize, QPoint)> = mesh
            .boundary
            .iter()
            .map(|&v| {
                let p = mesh.vertices[v];
                (v, QPoint::scalar(&[p[0] * p[0] - p[1] * p[1]]))
            })
            .collect();
        let opts = MinimizeOpts { max_sweeps: 4000, restarts: 0, ..Default::default() };
        let (_, report) = minimize_dirichlet(&emb, &mesh, &boundary, &opts).unwrap();
        let rel = (report.total - 2.0 * std::f64::consts::PI).abs() / (2.0 * std::f64::consts::PI);
        assert!(rel < 0.02, "energy {} rel {}", report.total, rel);
    }
}
