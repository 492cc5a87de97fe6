//! lipschitz-approx: the maximal-function truncation pipeline on the spike
//! fixture, with cell-exact graph matching and the explicit coverage bound.

use std::path::Path;

use qvalued::currents::fixtures;
use qvalued::currents::lipschitz::lipschitz_approximate;

use crate::config::CampaignConfig;
use crate::report::{fmt, Csv, Summary};

pub fn run(cfg: &CampaignConfig, out: &Path, _strict: bool) -> anyhow::Result<bool> {
    let mut summary = Summary::new("lipschitz-approx", cfg.seed);
    let lc = &cfg.lipschitz_approx;
    let (t, ef) = fixtures::spike_current_with_excess(lc.level);
    summary.note("spike-fixture", format!("excess={}", fmt(ef.excess)));

    let mut csv = Csv::new(
        out,
        "lipschitz_coverage.csv",
        &["eta", "r", "bad_area", "bound", "ok"],
    )?;
    for &eta in &lc.etas {
        let rep = lipschitz_approximate(&t, &ef, eta, lc.margin)?;
        for row in &rep.coverage {
            csv.row(&[
                fmt(eta),
                fmt(row.r),
                fmt(row.bad_area),
                fmt(row.bound),
                row.ok.to_string(),
            ])?;
        }
        summary.check(
            &format!("graph-cell-exact-eta-{eta}"),
            rep.graph_match_error <= 1e-8 && rep.slice_match_error <= 1e-8,
            format!(
                "mass_err={} slice_err={}",
                fmt(rep.graph_match_error),
                fmt(rep.slice_match_error)
            ),
        );
        summary.check(
            &format!("lipschitz-bound-eta-{eta}"),
            rep.measured_lip <= lc.lip_c * eta.sqrt(),
            format!("lip={} bound={}", fmt(rep.measured_lip), fmt(lc.lip_c * eta.sqrt())),
        );
        summary.check(
            &format!("coverage-bound-eta-{eta}"),
            rep.coverage_ok,
            format!("r0={}", fmt(rep.r0)),
        );
        // The spike region must genuinely be excluded from the good set.
        let spike_cell = (0..ef.grid.num_cells())
            .min_by(|&a, &b| {
                let pa = ef.grid.cell_center(a);
                let pb = ef.grid.cell_center(b);
                let da = (pa[0] - 0.8).powi(2) + (pa[1] - 0.3).powi(2);
                let db = (pb[0] - 0.8).powi(2) + (pb[1] - 0.3).powi(2);
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        summary.check(
            &format!("spike-excluded-eta-{eta}"),
            !rep.k_cells.contains(&spike_cell),
            String::new(),
        );
    }
    csv.finish()?;

    summary.write(out)?;
    Ok(summary.all_passed())
}
