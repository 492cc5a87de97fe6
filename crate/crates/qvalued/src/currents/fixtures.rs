//! Test-current library: flat and tilted sheets, orientation-reversed pairs,
//! branched square-root graphs, spike sheets, and random Lipschitz graphs.
//! Each fixture has analytically known masses and excesses where a closed
//! form exists; tests pin those values.

use std::sync::Arc;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::dirichlet::QField;
use crate::error::Result;
use crate::mesh::Mesh;
use crate::qspace::QPoint;

use super::{graph_current, SimplexCell, SimplicialCurrent};

/// Q parallel flat sheets at the given heights over a square mesh.
pub fn flat_sheets(mesh: &Arc<Mesh>, heights: &[Vec<f64>]) -> Result<SimplicialCurrent> {
    let n = heights[0].len();
    let f = QField::from_fn(Arc::clone(mesh), |_| {
        QPoint::new(n, heights.to_vec()).unwrap()
    });
    graph_current(&f)
}

/// Single sheet x -> A x (A is n x 2). Excess density is constant:
/// sqrt(det(I + A^T A)) - 1.
pub fn tilted_sheet(mesh: &Arc<Mesh>, a: &[Vec<f64>]) -> Result<SimplicialCurrent> {
    let f = tilted_field(mesh, a);
    graph_current(&f)
}

pub fn tilted_field(mesh: &Arc<Mesh>, a: &[Vec<f64>]) -> QField {
    let n = a.len();
    QField::from_fn(Arc::clone(mesh), |p| {
        let pts = vec![(0..n).map(|i| a[i][0] * p[0] + a[i][1] * p[1]).collect()];
        QPoint::new(n, pts).unwrap()
    })
}

/// Analytic excess density of a tilted sheet with slope matrix A.
pub fn tilt_excess_density(a: &[Vec<f64>]) -> f64 {
    // det(I2 + A^T A) for A n x 2.
    let mut g = [[0.0f64; 2], [0.0f64; 2]];
    for (r, gr) in g.iter_mut().enumerate() {
        for (c, v) in gr.iter_mut().enumerate() {
            *v = if r == c { 1.0 } else { 0.0 };
            for row in a {
                *v += row[r] * row[c];
            }
        }
    }
    (g[0][0] * g[1][1] - g[0][1] * g[1][0]).sqrt() - 1.0
}

/// Two superposed flat sheets with opposite orientations: the varifold excess
/// vanishes while the cylindrical (integral-form) excess is maximal.
pub fn orientation_reversed_pair(mesh: &Arc<Mesh>, n: usize) -> Result<SimplicialCurrent> {
    let up = flat_sheets(mesh, &[vec![0.5; n].clone()])?;
    let mut cells = up.cells.clone();
    for cell in &up.cells {
        let mut c = SimplexCell {
            vertices: cell.vertices.clone(),
            multiplicity: -cell.multiplicity,
        };
        for v in c.vertices.iter_mut() {
            for y in v.iter_mut().skip(2) {
                *y = -*y;
            }
        }
        cells.push(c);
    }
    Ok(SimplicialCurrent { ambient: up.ambient, dim: 2, base_dim: 2, cells })
}

/// The two-valued square-root field, scaled: eps * {±sqrt(z)} as points of
/// R^2 over the base point z = x + iy.
pub fn sqrt_branch_qpoint(p: &[f64; 2], eps: f64) -> QPoint {
    let r = (p[0] * p[0] + p[1] * p[1]).sqrt().sqrt();
    let th = p[1].atan2(p[0]) / 2.0;
    let w = [eps * r * th.cos(), eps * r * th.sin()];
    QPoint::new(2, vec![vec![w[0], w[1]], vec![-w[0], -w[1]]]).unwrap()
}

/// Branched two-valued graph over an annulus (keeps the branch point out of
/// the mesh).
pub fn branched_graph(
    r_inner: f64,
    r_outer: f64,
    rings: usize,
    sectors: usize,
    eps: f64,
) -> Result<(QField, SimplicialCurrent)> {
    let mesh = Arc::new(Mesh::annulus_polar(r_inner, r_outer, rings, sectors)?);
    let f = QField::from_fn(Arc::clone(&mesh), |p| sqrt_branch_qpoint(p, eps));
    let t = graph_current(&f)?;
    Ok((f, t))
}

/// Branched two-valued field on a disk mesh (branch point at the center
/// vertex, where both sheets collide).
pub fn branched_disk_field(radius: f64, rings: usize, sectors: usize, eps: f64) -> Result<QField> {
    let mesh = Arc::new(Mesh::disk_polar(radius, rings, sectors)?);
    Ok(QField::from_fn(Arc::clone(&mesh), |p| sqrt_branch_qpoint(p, eps)))
}

/// Two well-separated flat sheets, one carrying a compactly supported spike:
/// excess concentrates in the spike ball.
pub fn spike_field(
    mesh: &Arc<Mesh>,
    center: [f64; 2],
    width: f64,
    height: f64,
) -> QField {
    QField::from_fn(Arc::clone(mesh), |p| {
        let d2 = ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)) / (width * width);
        let bump = if d2 < 1.0 { height * (1.0 - d2).powi(2) } else { 0.0 };
        QPoint::new(1, vec![vec![0.3 + bump], vec![-0.3]]).unwrap()
    })
}

/// Canonical spike fixture: two well-separated flat sheets over [-4,4]^2,
/// one carrying a narrow bump at (0.8, 0.3), inside the cylinder of radius 4.
/// The bump height keeps the global excess small enough for the maximal-
/// function hypothesis at eta = 0.05 while its density still crosses the
/// thresholds (the excess of this bump profile is 2*pi*H^2/3, width-free).
pub fn spike_current_with_excess(
    level: u32,
) -> (SimplicialCurrent, super::excess::ExcessField) {
    // 0.0625 spacing aligns bit-exactly with the approximation mesh; over the
    // good set the current is then affine per approximation cell, which is
    // what makes discrete cell-exactness meaningful.
    let mesh = Arc::new(crate::mesh::Mesh::box_grid(-4.0, 4.0, -4.0, 4.0, 128, 128).unwrap());
    let f = spike_field(&mesh, [0.8, 0.3], 0.08, 0.05);
    let t = graph_current(&f).unwrap();
    let ef = super::excess::excess_field(&t, [0.0, 0.0], 4.0, level).unwrap();
    (t, ef)
}

/// Random Lipschitz 2-valued graph: two independent smooth sheets kept apart
/// by a vertical offset, so sheet tracking is unambiguous.
pub fn random_two_valued_field(mesh: &Arc<Mesh>, n: usize, lip: f64, seed: u64) -> QField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sheets = Vec::new();
    for _ in 0..2 {
        let modes: Vec<(f64, [f64; 2], f64, usize)> = (0..4)
            .map(|_| {
                (
                    rng.random_range(0.2..1.0),
                    [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)],
                    rng.random_range(0.0..std::f64::consts::TAU),
                    rng.random_range(0..n),
                )
            })
            .collect();
        sheets.push(modes);
    }
    let offsets: Vec<f64> = vec![0.6, -0.6];
    QField::from_fn(Arc::clone(mesh), move |p| {
        let pts: Vec<Vec<f64>> = sheets
            .iter()
            .zip(&offsets)
            .map(|(modes, off)| {
                let mut y = vec![0.0; n];
                y[0] += off;
                for (amp, k, phase, comp) in modes {
                    // Normalize so the sheet Lipschitz constant stays ~ lip.
                    let knorm = (k[0] * k[0] + k[1] * k[1]).sqrt().max(0.5);
                    y[*comp] +=
                        lip * amp * (k[0] * p[0] + k[1] * p[1] + phase).sin() / (4.0 * knorm);
                }
                y
            })
            .collect();
        QPoint::new(n, pts).unwrap()
    })
}

/// A 1-current carried by a polyline in the plane.
pub fn polyline_current(points: &[[f64; 2]], multiplicity: i64) -> SimplicialCurrent {
    let cells = points
        .windows(2)
        .map(|w| SimplexCell {
            vertices: vec![w[0].to_vec(), w[1].to_vec()],
            multiplicity,
        })
        .collect();
    SimplicialCurrent { ambient: 2, dim: 1, base_dim: 2, cells }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::currents::{
        boundary, mass, projection_multiplicity, pushforward_mass, slice, BaseRegion,
    };
    use approx::assert_abs_diff_eq;

    #[test]
    fn flat_sheets_mass_is_q_times_area() {
        let mesh = Arc::new(Mesh::unit_square(8).unwrap());
        let t = flat_sheets(&mesh, &[vec![0.0], vec![1.0], vec![-1.0]]).unwrap();
        assert_abs_diff_eq!(mass(&t, None), 3.0, epsilon = 1e-12);
        assert_eq!(projection_multiplicity(&t, [0.4, 0.6]).unwrap(), 3);
    }

    #[test]
    fn collapsed_sheets_merge_multiplicity() {
        let mesh = Arc::new(Mesh::unit_square(4).unwrap());
        let t = flat_sheets(&mesh, &[vec![0.0], vec![0.0]]).unwrap();
        // Q copies of the flat square merge into multiplicity-2 cells.
        assert!(t.cells.iter().all(|c| c.multiplicity == 2));
        assert_abs_diff_eq!(mass(&t, None), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn tilted_sheet_mass_matches_jacobian() {
        let mesh = Arc::new(Mesh::unit_square(8).unwrap());
        let a = vec![vec![0.7, -0.2]];
        let t = tilted_sheet(&mesh, &a).unwrap();
        let expected = 1.0 + tilt_excess_density(&a);
        assert_abs_diff_eq!(mass(&t, None), expected, epsilon = 1e-10);
    }

    #[test]
    fn restricted_mass_uses_exact_clipping() {
        let mesh = Arc::new(Mesh::unit_square(8).unwrap());
        let t = flat_sheets(&mesh, &[vec![2.0]]).unwrap();
        let reg = BaseRegion::Disk { center: [0.5, 0.5], r: 0.25 };
        assert_abs_diff_eq!(
            mass(&t, Some(&reg)),
            std::f64::consts::PI * 0.0625,
            epsilon = 1e-10
        );
    }

    #[test]
    fn boundary_of_flat_square_is_q_perimeters() {
        let mesh = Arc::new(Mesh::unit_square(4).unwrap());
        let t = flat_sheets(&mesh, &[vec![0.0], vec![1.0]]).unwrap();
        let bd = boundary(&t);
        let len: f64 = bd.cells.iter().map(|c| c.multiplicity.unsigned_abs() as f64 * c.volume()).sum();
        assert_abs_diff_eq!(len, 8.0, epsilon = 1e-12);
        // Chain complex: boundary of the boundary has no cells.
        let bdbd = boundary(&bd);
        assert!(bdbd.cells.is_empty(), "dd != 0: {} cells", bdbd.cells.len());
    }

    #[test]
    fn branched_graph_has_full_projection() {
        let (_, t) = branched_graph(0.2, 1.0, 8, 32, 1.0).unwrap();
        for x in [[0.5, 0.1], [-0.4, 0.3], [0.0, -0.7]] {
            assert_eq!(projection_multiplicity(&t, x).unwrap(), 2);
        }
        let bdbd = boundary(&boundary(&t));
        assert!(bdbd.cells.is_empty());
    }

    #[test]
    fn graph_slices_match_field_values() {
        let mesh = Arc::new(Mesh::unit_square(8).unwrap());
        let f = random_two_valued_field(&mesh, 2, 0.5, 11);
        let t = graph_current(&f).unwrap();
        let x = [0.37, 0.61];
        let s = slice(&t, x).unwrap();
        assert_eq!(s.total_sign(), 2);
        let sq = s.as_qpoint(2, 2).unwrap();
        let fv = crate::currents::evaluate_field(&f, x).unwrap();
        assert!(crate::qspace::metric_g(&sq, &fv).unwrap() < 1e-9);
    }

    #[test]
    fn pushforward_consistency_and_curves() {
        let mesh = Arc::new(Mesh::unit_square(6).unwrap());
        let a = vec![vec![0.3, 0.4]];
        let f = tilted_field(&mesh, &a);
        let t = graph_current(&f).unwrap();
        // r = [[0,1]^2] as a current: push-forward mass equals the graph mass.
        let full = SimplicialCurrent {
            ambient: 2,
            dim: 2,
            base_dim: 2,
            cells: mesh
                .cells
                .iter()
                .map(|c| SimplexCell {
                    vertices: c.v.iter().map(|&v| mesh.vertices[v].to_vec()).collect(),
                    multiplicity: 1,
                })
                .collect(),
        };
        let pf = pushforward_mass(&f, &full).unwrap();
        assert_abs_diff_eq!(pf, mass(&t, None), epsilon = 1e-10);

        // A straight segment pushed by the linear sheet: analytic length.
        let seg = polyline_current(&[[0.1, 0.1], [0.9, 0.1]], 1);
        let lifted_len = pushforward_mass(&f, &seg).unwrap();
        // Image tangent (0.8, 0, 0.8*0.3): length 0.8 * sqrt(1 + 0.09).
        assert_abs_diff_eq!(lifted_len, 0.8 * 1.09f64.sqrt(), epsilon = 1e-10);
        // Doubling the multiplicity doubles the mass.
        let seg2 = polyline_current(&[[0.1, 0.1], [0.9, 0.1]], 2);
        assert_abs_diff_eq!(pushforward_mass(&f, &seg2).unwrap(), 2.0 * lifted_len, epsilon = 1e-12);
    }
}
