//! competitor: the three-zone construction ledger — mollify, almost-project,
//! interpolate — with trace/cone checks and the per-zone energy breakdown.

use std::path::Path;
use std::sync::Arc;

use qvalued::dirichlet::{smoothing::build_competitor, QField};
use qvalued::embedding::Embedding;
use qvalued::mesh::Mesh;
use qvalued::projections::build_rho_star;
use qvalued::qspace::{self, QPoint};

use crate::config::CampaignConfig;
use crate::report::{fmt, Csv, Summary};

pub fn run(cfg: &CampaignConfig, out: &Path, _strict: bool) -> anyhow::Result<bool> {
    let mut summary = Summary::new("competitor", cfg.seed);
    let kc = &cfg.competitor;
    let emb = Arc::new(Embedding::line_pair());
    let proj = build_rho_star(&emb, kc.mu, cfg.seed)?;
    let mesh = Arc::new(Mesh::disk_polar(1.0, kc.rings, kc.sectors)?);

    let mut csv = Csv::new(
        out,
        "competitor.csv",
        &[
            "case",
            "energy_f",
            "energy_g",
            "zone_outer",
            "zone_mid",
            "zone_core",
            "moll_l2",
            "rho_disp",
            "cone_adjust",
            "trace_err",
            "lip_f",
            "lip_g",
        ],
    )?;

    // Constant field: every stage acts trivially.
    {
        let f = QField::constant(
            Arc::clone(&mesh),
            QPoint::new(1, vec![vec![0.2], vec![0.9]])?,
        );
        let (g, rep) = build_competitor(&f, &emb, &proj, kc.eps, kc.radii)?;
        let max_dev = f
            .values
            .iter()
            .zip(&g.values)
            .map(|(a, b)| qspace::metric_g(a, b).unwrap())
            .fold(0.0f64, f64::max);
        write_row(&mut csv, "constant", &rep)?;
        summary.check(
            "constant-field-fixed",
            max_dev <= 1e-9,
            format!("max_dev={}", fmt(max_dev)),
        );
    }

    // Smooth two-valued field: trace preserved, output cone-valued, ledger
    // reported; competitor energy stays within the overhead budget.
    {
        let f = QField::from_fn(Arc::clone(&mesh), |p| {
            let b = 0.5 * (p[0] + 0.3 * p[1]);
            let v = 0.6 + 0.2 * (2.0 * p[0]).sin() * (1.5 * p[1]).cos();
            QPoint::new(1, vec![vec![b - v], vec![b + v]]).unwrap()
        });
        let (g, rep) = build_competitor(&f, &emb, &proj, kc.eps, kc.radii)?;
        write_row(&mut csv, "smooth-two-valued", &rep)?;
        summary.check(
            "trace-preserved",
            rep.trace_error <= 1e-9,
            format!("err={}", fmt(rep.trace_error)),
        );
        // Cone-valuedness: re-embedding the output lands on the cone.
        let mut worst = 0.0f64;
        for v in &g.values {
            let w = emb.xi(v)?;
            worst = worst.max(emb.dist_to_cone(&w)?);
        }
        summary.check("output-cone-valued", worst <= 1e-6, format!("residual={}", fmt(worst)));
        summary.note(
            "energy-ledger",
            format!(
                "f={} g={} zones=[{}, {}, {}]",
                fmt(rep.energy_f),
                fmt(rep.energy_g),
                fmt(rep.zone_energies[0]),
                fmt(rep.zone_energies[1]),
                fmt(rep.zone_energies[2])
            ),
        );
        summary.check(
            "lipschitz-ledger",
            rep.lip_g <= 8.0 * rep.lip_f + 1.0,
            format!("lip_f={} lip_g={}", fmt(rep.lip_f), fmt(rep.lip_g)),
        );
    }

    // Mollification/projection error shrinks with (mu, eps) on a
    // single-valued smooth field.
    {
        let f = QField::from_fn(Arc::clone(&mesh), |p| {
            QPoint::new(1, vec![vec![(1.5 * p[0]).sin() * 0.4], vec![1.2 + 0.3 * p[1]]]).unwrap()
        });
        let mut l2s = Vec::new();
        for (mu, eps) in [(0.2, 0.45), (0.05, 0.3)] {
            let proj = build_rho_star(&emb, mu, cfg.seed)?;
            let (g, rep) = build_competitor(&f, &emb, &proj, eps, kc.radii)?;
            let l2 = f.l2_distance(&g)?;
            l2s.push(l2);
            write_row(&mut csv, &format!("sweep-mu{mu}-eps{eps}"), &rep)?;
        }
        summary.check(
            "stage-error-shrinks",
            l2s[1] <= l2s[0],
            format!("l2={:?}", l2s),
        );
    }
    csv.finish()?;

    summary.write(out)?;
    Ok(summary.all_passed())
}

fn write_row(
    csv: &mut Csv,
    case: &str,
    rep: &qvalued::dirichlet::smoothing::CompetitorReport,
) -> anyhow::Result<()> {
    csv.row(&[
        case.into(),
        fmt(rep.energy_f),
        fmt(rep.energy_g),
        fmt(rep.zone_energies[0]),
        fmt(rep.zone_energies[1]),
        fmt(rep.zone_energies[2]),
        fmt(rep.mollification_l2),
        fmt(rep.max_rho_displacement),
        fmt(rep.max_cone_adjustment),
        fmt(rep.trace_error),
        fmt(rep.lip_f),
        fmt(rep.lip_g),
    ])
}
