//! Lipschitz approximation of a current satisfying the cylinder hypothesis:
//! threshold the excess maximal function, read the good set from slices, and
//! extend across the bad set. The coverage bound carries the explicit 5^m/eta
//! constant.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dirichlet::QField;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::qspace::{self, QPoint};

use super::excess::ExcessField;
use super::{graph_current, slice_indexed, SimplicialCurrent};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageRow {
    pub r: f64,
    pub bad_area: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LipschitzApproximation {
    #[serde(skip_serializing, skip_deserializing)]
    pub u: Option<QField>,
    /// Grid cells of the good set K (maximal function below eta, inside B_3s).
    pub k_cells: Vec<usize>,
    pub eta: f64,
    pub r0: f64,
    pub measured_lip: f64,
    /// Largest graph-vs-current mass discrepancy over K cells.
    pub graph_match_error: f64,
    /// Largest slice mismatch against u on K cell centers.
    pub slice_match_error: f64,
    pub coverage: Vec<CoverageRow>,
    pub coverage_ok: bool,
}

/// Run the approximation in the cylinder of radius 4s = excess grid radius.
///
/// The produced field lives on a box mesh over [-3s, 3s]^2 whose cells are
/// the excess-grid cells restricted to that square.
pub fn lipschitz_approximate(
    t: &SimplicialCurrent,
    ef: &ExcessField,
    eta: f64,
    margin: f64,
) -> Result<LipschitzApproximation> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidInput("eta must lie in (0,1)".into()));
    }
    let e = ef.excess;
    let r0 = 4.0 * (e / eta).sqrt();
    if r0 >= 0.2 {
        return Err(Error::Hypothesis(format!(
            "r0 = 4 sqrt(E/eta) = {r0:.3} >= 1/5; excess too large for eta = {eta}"
        )));
    }
    let four_s = ef.grid.radius;
    let s = four_s / 4.0;
    let q = ef.q as usize;
    let n = t.ambient - t.base_dim;
    let center = ef.grid.center;
    let dist = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();

    // Good set: maximal function below eta, centers within B_{3s}.
    let k_cells: Vec<usize> = (0..ef.grid.num_cells())
        .filter(|&c| {
            ef.m_t[c] < eta && dist(ef.grid.cell_center(c), center) <= 3.0 * s
        })
        .collect();

    // Field mesh: uniform grid on [-3s, 3s]^2 aligned with the excess grid.
    let k_per_side = ef.grid.cells_per_side();
    let cells_in_3s = ((3.0 * s / ef.grid.cell_size()).round() as usize * 2).min(k_per_side);
    let mesh = Arc::new(Mesh::box_grid(
        center[0] - 3.0 * s,
        center[0] + 3.0 * s,
        center[1] - 3.0 * s,
        center[1] + 3.0 * s,
        cells_in_3s,
        cells_in_3s,
    )?);

    // Vertices adjacent to a good cell read their value from the slice.
    let index = super::BaseIndex::build(t, 4.0 * ef.grid.cell_size());
    let k_set: Vec<bool> = {
        let mut set = vec![false; ef.grid.num_cells()];
        for &c in &k_cells {
            set[c] = true;
        }
        set
    };
    let good = |x: [f64; 2]| -> bool {
        ef.grid.cells_near(x, 1e-9).any(|c| k_set[c])
    };
    let mut values: Vec<Option<QPoint>> = vec![None; mesh.num_vertices()];
    for (vi, v) in mesh.vertices.iter().enumerate() {
        if good(*v) {
            let sl = slice_indexed(t, Some(&index), *v)?;
            match sl.as_qpoint(q, n) {
                Ok(p) => values[vi] = Some(p),
                Err(_) => {
                    return Err(Error::Geometry(format!(
                        "slice at ({:.3}, {:.3}) does not carry {q} positive points; \
                         the grid is too coarse",
                        v[0], v[1]
                    )))
                }
            }
        }
    }

    // Extend across the bad set: nearest-known seed then relaxation sweeps
    // with the known vertices frozen.
    let known: Vec<usize> =
        (0..mesh.num_vertices()).filter(|&v| values[v].is_some()).collect();
    if known.is_empty() {
        return Err(Error::Hypothesis("good set is empty".into()));
    }
    for vi in 0..mesh.num_vertices() {
        if values[vi].is_none() {
            let nearest = known
                .iter()
                .min_by(|&&a, &&b| {
                    dist(mesh.vertices[a], mesh.vertices[vi])
                        .partial_cmp(&dist(mesh.vertices[b], mesh.vertices[vi]))
                        .unwrap()
                })
                .unwrap();
            values[vi] = values[*nearest].clone();
        }
    }
    let mut u = QField::new(
        Arc::clone(&mesh),
        values.into_iter().map(|v| v.unwrap()).collect(),
    )?;
    relax_unknowns(&mut u, &known, 40)?;

    // Cell-exactness of the graph over K: rasterized masses per cell plus
    // slice spot checks on a deterministic sample.
    let graph = graph_current(&u)?;
    let graph_masses = super::excess::rasterize_mass(&graph, &ef.grid);
    let mut graph_match_error = 0.0f64;
    for &c in &k_cells {
        graph_match_error = graph_match_error.max((ef.mass_cells[c] - graph_masses[c]).abs());
    }
    let graph_index = super::BaseIndex::build(&graph, 4.0 * ef.grid.cell_size());
    let mut slice_match_error = 0.0f64;
    let stride = (k_cells.len() / 200).max(1);
    for &c in k_cells.iter().step_by(stride) {
        let xc = ef.grid.cell_center(c);
        let st = slice_indexed(t, Some(&index), xc)?.as_qpoint(q, n)?;
        let su = slice_indexed(&graph, Some(&graph_index), xc)?.as_qpoint(q, n)?;
        slice_match_error = slice_match_error.max(qspace::metric_g(&st, &su)?);
    }

    // Coverage bound with the explicit 5^m/eta constant.
    let thr = eta / 4.0; // 2^{-m} eta, m = 2
    let mut coverage = Vec::new();
    let mut coverage_ok = true;
    for rr in [s, 1.5 * s, 2.0 * s, 2.5 * s, 3.0 * s] {
        let mut bad_area = 0.0;
        for c in 0..ef.grid.num_cells() {
            let xc = ef.grid.cell_center(c);
            if dist(xc, center) <= rr && !k_set[c] && dist(xc, center) <= 3.0 * s {
                bad_area += ef.area_cells[c];
            }
        }
        let enlarged = rr + r0 * s;
        let mut rhs_e = 0.0;
        for c in 0..ef.grid.num_cells() {
            if ef.m_t[c] > thr && dist(ef.grid.cell_center(c), center) <= enlarged {
                rhs_e += ef.e_cells[c].max(0.0);
            }
        }
        let bound = 25.0 / eta * rhs_e;
        let ok = bad_area <= bound * (1.0 + margin) + 1e-12;
        coverage_ok &= ok;
        coverage.push(CoverageRow { r: rr, bad_area, bound, ok });
    }

    let measured_lip = u.measured_lip();
    Ok(LipschitzApproximation {
        u: Some(u),
        k_cells,
        eta,
        r0,
        measured_lip,
        graph_match_error,
        slice_match_error,
        coverage,
        coverage_ok,
    })
}

/// Relax the unknown vertices toward local averages (matchings recomputed
/// each visit), leaving `known` frozen. A cheap Lipschitz-style extension.
fn relax_unknowns(u: &mut QField, known: &[usize], sweeps: usize) -> Result<()> {
    let mesh = Arc::clone(&u.mesh);
    let ve = mesh.vertex_edges();
    let frozen: Vec<bool> = {
        let mut f = vec![false; mesh.num_vertices()];
        for &v in known {
            f[v] = true;
        }
        f
    };
    let (q, n) = (u.q(), u.n());
    for _ in 0..sweeps {
        for v in 0..mesh.num_vertices() {
            if frozen[v] {
                continue;
            }
            let mut acc = vec![vec![0.0; n]; q];
            let mut wsum = 0.0;
            for &ei in &ve[v] {
                let e = &mesh.edges[ei];
                // Uniform weights: plain metric averaging extends better than
                // the stiffness weights here (zero-weight diagonals).
                let w = 1.0;
                let other = if e.a == v { e.b } else { e.a };
                let m = qspace::optimal_matching(&u.values[v], &u.values[other])?;
                for (i, &mi) in m.iter().enumerate() {
                    for d in 0..n {
                        acc[i][d] += w * u.values[other].points[mi][d];
                    }
                }
                wsum += w;
            }
            if wsum > 0.0 {
                let pts = acc
                    .into_iter()
                    .map(|p| p.into_iter().map(|x| x / wsum).collect())
                    .collect();
                u.values[v] = QPoint::new(n, pts)?;
            }
        }
    }
    Ok(())
}
