//! current-analyze: excess/BV/Taylor/varifold suites over the test-current
//! library (or over a current loaded from file).

use std::path::Path;
use std::sync::Arc;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use qvalued::currents::excess::{
    bv_estimate_check, excess_field, higher_integrability_scan, maximal_measure,
    strong_estimate_scan, taylor_check, varifold_excess, BaseGrid, BumpPsi,
};
use qvalued::currents::forms::{Form1, Poly};
use qvalued::currents::{
    self, boundary, fixtures, graph_current, mass, projection_multiplicity, stokes_check,
    SimplicialCurrent,
};
use qvalued::mesh::Mesh;

use crate::config::CampaignConfig;
use crate::report::{fmt, Csv, Summary};

const PI: f64 = std::f64::consts::PI;

pub fn run(cfg: &CampaignConfig, out: &Path, strict: bool) -> anyhow::Result<bool> {
    let mut summary = Summary::new("current-analyze", cfg.seed);
    let cc = &cfg.current_analyze;

    if !cc.input.is_empty() {
        let text = std::fs::read_to_string(&cc.input)?;
        let t: SimplicialCurrent = serde_json::from_str(&text)?;
        analyze_external(&t, cc.level, &mut summary, out)?;
        summary.write(out)?;
        return Ok(summary.all_passed());
    }

    let square = Arc::new(Mesh::box_grid(-1.0, 1.0, -1.0, 1.0, 16, 16)?);

    // Flat sheets: zero excess, zero maximal function, all-zero report.
    {
        let t = fixtures::flat_sheets(&square, &[vec![0.3], vec![-0.5]])?;
        let ef = excess_field(&t, [0.0, 0.0], 0.9, cc.level)?;
        summary.check(
            "flat-sheet-zero-excess",
            ef.excess.abs() <= 1e-10 && ef.m_t.iter().all(|m| m.abs() <= 1e-8),
            format!("E={}", fmt(ef.excess)),
        );
        summary.check(
            "flat-sheet-mass",
            (mass(&t, None) - 2.0 * 4.0).abs() <= 1e-10,
            String::new(),
        );
    }

    // Tilted sheet: exact constant excess density and additivity.
    {
        let a = vec![vec![0.4, -0.3]];
        let t = fixtures::tilted_sheet(&square, &a)?;
        let ef = excess_field(&t, [0.0, 0.0], 0.9, cc.level)?;
        let expected = fixtures::tilt_excess_density(&a);
        summary.check(
            "tilted-sheet-exact-excess",
            (ef.excess - expected).abs() <= 1e-9,
            format!("E={} expected={}", fmt(ef.excess), fmt(expected)),
        );
        let total: f64 = ef.e_cells.iter().sum();
        summary.check(
            "excess-additivity",
            (total - expected * PI * 0.81).abs() <= 1e-10,
            format!("gap={}", fmt((total - expected * PI * 0.81).abs())),
        );
        let mut md_ok = true;
        for (m, d) in ef.m_t.iter().zip(&ef.delta) {
            md_ok &= *m + 1e-12 >= *d && *d >= 0.0;
        }
        summary.check("maximal-dominates-density", md_ok, String::new());
        if strict {
            let unstable = ef
                .delta_stability
                .iter()
                .zip(&ef.delta)
                .filter(|(s, d)| **d > 1e-9 && (**s > 2.0 || **s < 0.5))
                .count();
            summary.check("density-scale-stability", unstable == 0, format!("flagged={unstable}"));
        }
    }

    // Varifold excess: bounded by twice the cylindrical excess on every
    // fixture; the orientation-reversed pair separates the two.
    {
        let mut csv = Csv::new(out, "varifold.csv", &["fixture", "ve", "e"])?;
        let mut ve_ok = true;
        for (name, t) in [
            ("flat", fixtures::flat_sheets(&square, &[vec![0.3]])?),
            ("tilt-small", fixtures::tilted_sheet(&square, &[vec![0.1, 0.0]])?),
            ("tilt-large", fixtures::tilted_sheet(&square, &[vec![0.5, 0.2]])?),
            ("reversed-pair", fixtures::orientation_reversed_pair(&square, 1)?),
        ] {
            let rep = varifold_excess(&t, [0.0, 0.0], 0.9)?;
            ve_ok &= rep.varifold_excess <= 2.0 * rep.integral_excess + 1e-12;
            csv.row(&[name.into(), fmt(rep.varifold_excess), fmt(rep.integral_excess)])?;
        }
        csv.finish()?;
        summary.check("varifold-le-twice-cylindrical", ve_ok, String::new());
        let rep = varifold_excess(
            &fixtures::orientation_reversed_pair(&square, 1)?,
            [0.0, 0.0],
            0.9,
        )?;
        summary.check(
            "orientation-blindness",
            rep.varifold_excess <= 1e-12 && rep.integral_excess > 1.0,
            format!("ve={} e={}", fmt(rep.varifold_excess), fmt(rep.integral_excess)),
        );
    }

    // Boundary and the boundary-pairing residual under refinement.
    {
        let mut csv = Csv::new(out, "stokes.csv", &["rings", "residual"])?;
        let omega = test_form();
        let mut residuals = Vec::new();
        for &m in &cc.stokes_meshes {
            let (_, t) = fixtures::branched_graph(0.25, 1.0, m, 2 * m, 1.0)?;
            let bdbd = boundary(&boundary(&t));
            if !bdbd.cells.is_empty() {
                summary.check("chain-complex", false, format!("dd has {} cells", bdbd.cells.len()));
            }
            let r = stokes_check(&t, &omega)?;
            residuals.push((m as f64, r));
            csv.row(&[m.to_string(), fmt(r)])?;
        }
        csv.finish()?;
        let order = -loglog_slope(&residuals);
        let last = residuals.last().unwrap().1;
        summary.check(
            "stokes-residual",
            order >= 1.0 && last <= 1e-3,
            format!("order={} final={}", fmt(order), fmt(last)),
        );
        // Mass refinement: the graph mass of the branched fixture converges
        // at order >= 1 under mesh refinement (Richardson quotient).
        let masses: Vec<f64> = cc
            .stokes_meshes
            .iter()
            .map(|&m| {
                let (_, t) = fixtures::branched_graph(0.25, 1.0, m, 2 * m, 1.0)?;
                Ok(mass(&t, None))
            })
            .collect::<anyhow::Result<_>>()?;
        if masses.len() >= 3 {
            let d1 = (masses[0] - masses[1]).abs();
            let d2 = (masses[1] - masses[2]).abs();
            let order = (d1 / d2.max(1e-300)).log2();
            summary.check(
                "mass-refinement-order",
                order >= 1.0,
                format!("order={} masses={masses:?}", fmt(order)),
            );
        }

        // Projection multiplicity of the branched graph is 2 everywhere.
        let (_, t) = fixtures::branched_graph(0.25, 1.0, 16, 32, 1.0)?;
        let mut proj_ok = true;
        for x in [[0.5, 0.1], [-0.3, 0.4], [0.0, -0.6], [0.6, 0.55]] {
            proj_ok &= projection_multiplicity(&t, x)? == 2;
        }
        summary.check("projection-multiplicity", proj_ok, String::new());
    }

    // Slice/mass compatibility: integrating slice masses over the base
    // recovers the restricted mass.
    {
        let t = fixtures::tilted_sheet(&square, &[vec![0.3, 0.1]])?;
        let grid = BaseGrid { center: [0.0, 0.0], radius: 0.8, level: 5 };
        let mut integral = 0.0;
        let index = currents::BaseIndex::build(&t, 4.0 * grid.cell_size());
        for id in 0..grid.num_cells() {
            let x = grid.cell_center(id);
            if x[0] * x[0] + x[1] * x[1] <= 0.64 {
                let s = currents::slice_indexed(&t, Some(&index), x)?;
                let slice_mass: f64 = s.atoms.iter().map(|(_, m)| m.abs() as f64).sum();
                // Mass of a graph slice counts the Jacobian, not just the
                // number of points.
                let jac = (1.0 + 0.3f64 * 0.3 + 0.1 * 0.1).sqrt();
                integral += slice_mass * jac * grid.cell_size() * grid.cell_size();
            }
        }
        let reg = currents::BaseRegion::Disk { center: [0.0, 0.0], r: 0.8 };
        let restricted = mass(&t, Some(&reg));
        let rel = (integral - restricted).abs() / restricted;
        summary.check(
            "slice-mass-compatibility",
            rel <= 0.02,
            format!("integral={} mass={} rel={}", fmt(integral), fmt(restricted), fmt(rel)),
        );
    }

    // Modified BV estimate battery over random graphs and bump functions.
    {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xBF);
        let mut all_ok = true;
        let mut worst_gap = 0.0f64;
        let mut rows = 0usize;
        let mesh = Arc::new(Mesh::box_grid(-1.0, 1.0, -1.0, 1.0, 16, 16)?);
        for gi in 0..cc.bv_graphs {
            let f = fixtures::random_two_valued_field(&mesh, 1, 0.8, cfg.seed ^ (gi as u64));
            let t = graph_current(&f)?;
            let ef = excess_field(&t, [0.0, 0.0], 0.9, cc.level)?;
            for _ in 0..cc.bv_psis {
                let psi = BumpPsi {
                    center: vec![rng.random_range(-1.0..1.0)],
                    radius: rng.random_range(0.5..2.0),
                };
                let rep = bv_estimate_check(&t, &ef, &psi, cc.bv_margin)?;
                all_ok &= rep.all_ok;
                worst_gap = worst_gap.max(rep.max_coarea_gap);
                rows += rep.rows.len();
            }
        }
        summary.check(
            "bv-estimate-factor-two",
            all_ok,
            format!("graphs={} psis={} regions={rows}", cc.bv_graphs, cc.bv_psis),
        );
        summary.check(
            "bv-tv-coarea-agreement",
            worst_gap <= 0.01,
            format!("max_gap={}", fmt(worst_gap)),
        );
    }

    // Taylor envelope with the frozen constant and the quadratic error sweep.
    {
        let mut csv = Csv::new(
            out,
            "taylor.csv",
            &["fixture", "eps", "lip", "lower_c", "upper_c", "rel_err"],
        )?;
        let mut need_low = 0.0f64;
        let mut need_high = f64::INFINITY;
        for eps in [0.2, 0.1, 0.05] {
            let f = fixtures::tilted_field(&square, &[vec![eps, 0.0]]);
            let rep = taylor_check(&f)?;
            need_low = need_low.max(rep.lower_c);
            need_high = need_high.min(rep.upper_c);
            csv.row(&[
                "tilt".into(),
                fmt(eps),
                fmt(rep.lip),
                fmt(rep.lower_c),
                fmt(rep.upper_c),
                fmt(rep.relative_error),
            ])?;
        }
        let mut sweep = Vec::new();
        for eps in [0.2, 0.1, 0.05] {
            let mesh = Arc::new(Mesh::annulus_polar(0.25, 1.0, 24, 48)?);
            let f = qvalued::dirichlet::QField::from_fn(Arc::clone(&mesh), |p| {
                fixtures::sqrt_branch_qpoint(p, eps)
            });
            let rep = taylor_check(&f)?;
            need_low = need_low.max(rep.lower_c);
            need_high = need_high.min(rep.upper_c);
            sweep.push((eps, rep.relative_error));
            csv.row(&[
                "branched".into(),
                fmt(eps),
                fmt(rep.lip),
                fmt(rep.lower_c),
                fmt(rep.upper_c),
                fmt(rep.relative_error),
            ])?;
        }
        csv.finish()?;
        summary.check(
            "taylor-frozen-c",
            need_low <= cc.taylor_c && cc.taylor_c <= need_high,
            format!(
                "window=[{}, {}] frozen_c={}",
                fmt(need_low),
                fmt(need_high),
                fmt(cc.taylor_c)
            ),
        );
        let slope = loglog_slope(&sweep);
        summary.check(
            "taylor-error-quadratic",
            (slope - 2.0).abs() <= 0.1,
            format!("slope={}", fmt(slope)),
        );
    }

    // Measure maximal function bound.
    {
        let grid = BaseGrid { center: [0.0, 0.0], radius: 2.0, level: 5 };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x33);
        let mut all_ok = true;
        for case in 0..6 {
            let mut mu = vec![0.0; grid.num_cells()];
            match case {
                0 => {}
                1 => mu[grid.num_cells() / 2 + grid.cells_per_side() / 2] = 0.008,
                _ => {
                    for _ in 0..(case * 3) {
                        let id = rng.random_range(0..grid.num_cells());
                        mu[id] += rng.random_range(0.0..0.002);
                    }
                }
            }
            for theta in [0.2, 0.4, 0.8] {
                match maximal_measure(&grid, &mu, theta, 0.10) {
                    Ok(rep) => all_ok &= rep.all_ok,
                    Err(qvalued::Error::Hypothesis(_)) => {}
                    Err(e) => return Err(e.into()),
                }
            }
        }
        summary.check("measure-maximal-bound", all_ok, String::new());
    }

    // Empirical scans: internal consistency plus the adversarial control.
    {
        let f = fixtures::branched_disk_field(1.0, 16, 32, 0.3)?;
        let t = graph_current(&f)?;
        let ef = excess_field(&t, [0.0, 0.0], 0.9, cc.level)?;
        // Exported excess grid for the branched fixture.
        let mut grid_csv = Csv::new(out, "excess_grid.csv", &["cx", "cy", "e", "delta", "m_t"])?;
        for id in 0..ef.grid.num_cells() {
            let c = ef.grid.cell_center(id);
            grid_csv.row(&[
                fmt(c[0]),
                fmt(c[1]),
                fmt(ef.e_cells[id]),
                fmt(ef.delta[id]),
                fmt(ef.m_t[id]),
            ])?;
        }
        grid_csv.finish()?;
        let rows = higher_integrability_scan(&ef, 0.5, &[1.0, 1.25, 1.5, 2.0])?;
        let mut csv = Csv::new(out, "scans.csv", &["kind", "parameter", "lhs", "rhs", "ratio"])?;
        for r in &rows {
            csv.row(&["higher-integrability".into(), fmt(r.parameter), fmt(r.lhs), fmt(r.rhs), fmt(r.ratio)])?;
        }
        let srows = strong_estimate_scan(&ef, &[0.25, 0.5, 0.75]);
        for r in &srows {
            csv.row(&["strong-estimate".into(), fmt(r.parameter), fmt(r.lhs), fmt(r.rhs), fmt(r.ratio)])?;
        }
        // Adversarial spike: the scan ratio must blow up relative to the
        // smooth branched graph (the estimate is not vacuous).
        let (spike_t, spike_ef) = fixtures::spike_current_with_excess(6);
        let spike_rows = higher_integrability_scan(&spike_ef, 0.5, &[1.5])?;
        let smooth_rows = higher_integrability_scan(&ef, 0.5, &[1.5])?;
        for r in &spike_rows {
            csv.row(&["spike-control".into(), fmt(r.parameter), fmt(r.lhs), fmt(r.rhs), fmt(r.ratio)])?;
        }
        csv.finish()?;
        let blowup = spike_rows[0].ratio / smooth_rows[0].ratio.max(1e-300);
        summary.check(
            "scan-internal-consistency",
            rows.windows(2).all(|w| w[1].lhs <= w[0].lhs + 1e-12),
            String::new(),
        );
        summary.note("spike-control-ratio", format!("blowup={}", fmt(blowup)));
        let _ = spike_t;
    }

    summary.write(out)?;
    Ok(summary.all_passed())
}

fn analyze_external(
    t: &SimplicialCurrent,
    level: u32,
    summary: &mut Summary,
    out: &Path,
) -> anyhow::Result<()> {
    let ef = excess_field(t, [0.0, 0.0], 1.0, level)?;
    let rep = varifold_excess(t, [0.0, 0.0], 1.0)?;
    summary.note(
        "external-current",
        format!(
            "q={} E={} ve={} mass={}",
            ef.q,
            fmt(ef.excess),
            fmt(rep.varifold_excess),
            fmt(mass(t, None))
        ),
    );
    let mut csv = Csv::new(out, "excess_grid_external.csv", &["cx", "cy", "e", "delta", "m_t"])?;
    for id in 0..ef.grid.num_cells() {
        let c = ef.grid.cell_center(id);
        csv.row(&[fmt(c[0]), fmt(c[1]), fmt(ef.e_cells[id]), fmt(ef.delta[id]), fmt(ef.m_t[id])])?;
    }
    csv.finish()?;
    summary.check(
        "external-ve-bound",
        rep.varifold_excess <= 2.0 * rep.integral_excess + 1e-12,
        String::new(),
    );
    Ok(())
}

/// Fixed degree-4 test form in R^4 (base graphs have n = 2): high enough
/// degree that the midedge quadrature is inexact and the residual reflects
/// the refinement order.
fn test_form() -> Form1 {
    Form1 {
        comps: vec![
            Poly::monomial(4, 0.7, vec![0, 2, 2, 0]),
            Poly::monomial(4, -0.4, vec![2, 0, 0, 2]),
            Poly::monomial(4, 0.9, vec![1, 1, 2, 0]),
            Poly::monomial(4, 0.3, vec![0, 1, 1, 2]),
        ],
    }
}

fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (x, y) in points {
        let (lx, ly) = (x.ln(), y.max(1e-300).ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}
