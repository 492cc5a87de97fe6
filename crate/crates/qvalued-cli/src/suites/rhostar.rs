//! rho-star-verify: the almost-projection sweep — stage ledger, inner-tube
//! face-projection coincidence, defect exponent regression, and the
//! composition energy inequality with the frozen constant.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use qvalued::embedding::{dist, norm, Embedding};
use qvalued::mesh::Mesh;
use qvalued::projections::{build_rho_star, verify_energy_inequality};

use crate::config::CampaignConfig;
use crate::report::{fmt, Csv, Summary};

pub fn run(cfg: &CampaignConfig, out: &Path, _strict: bool) -> anyhow::Result<bool> {
    let mut summary = Summary::new("rho-star-verify", cfg.seed);
    let rc = &cfg.rho_star_verify;
    let started = Instant::now();
    let emb = Arc::new(Embedding::standard(rc.q, rc.n)?);
    let complex = emb
        .complex()
        .ok_or_else(|| anyhow::anyhow!("rho-star needs an enumerable face complex"))?;
    let top = complex.top_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9057A5);

    let mut sweep = Csv::new(
        out,
        "rho_star_sweep.csv",
        &["mu", "sup_defect", "defect_coefficient", "stage_k", "stage_lip", "stage_defect"],
    )?;
    let mut defects: Vec<(f64, f64)> = Vec::new();
    let mut coincide_worst = 0.0f64;
    let mut coincide_count = 0usize;
    let mut energy_c_worst = 0.0f64;

    // Field battery for the energy inequality: smooth cone-valued fields with
    // a smooth off-cone displacement crossing the tube width.
    let mesh = Arc::new(Mesh::box_grid(-1.5, 1.5, -1.5, 1.5, rc.mesh, rc.mesh)?);
    let nn = emb.spec().big_n();

    for &mu in &rc.mus {
        let proj = build_rho_star(&emb, mu, cfg.seed)?;
        let cal = &proj.calibration;
        for st in &cal.stages {
            sweep.row(&[
                fmt(mu),
                fmt(cal.sup_defect),
                fmt(cal.defect_coefficient),
                st.k.to_string(),
                fmt(st.lip),
                fmt(st.defect),
            ])?;
        }
        defects.push((mu, cal.sup_defect));
        // Stagewise ledger: each prefix adds at most C mu^{2^{-top+k}} of
        // Lipschitz constant over the identity top stage (frozen C = 1).
        let mut prev_lip = 1.0f64;
        let mut ledger_ok = true;
        for st in cal.stages.iter() {
            let budget = mu.powf(2.0f64.powi(-(top as i32) + st.k as i32));
            ledger_ok &= st.lip - prev_lip <= budget + 1e-9;
            prev_lip = prev_lip.max(st.lip);
        }
        summary.check(
            &format!("stage-lipschitz-ledger-mu-{mu}"),
            ledger_ok,
            format!("final_lip={}", fmt(prev_lip)),
        );

        // Inner-tube coincidence with the face projection.
        for face in complex.faces.iter().filter(|f| f.dim < top) {
            let rep_norm = norm(&face.representative).max(1e-12);
            for i in 0..(rc.tube_samples / complex.faces.len().max(1)) {
                let scale = 1.0 + 3.0 * (i as f64 / rc.tube_samples.max(1) as f64);
                let y: Vec<f64> =
                    face.representative.iter().map(|x| x * scale / rep_norm).collect();
                // Perturb within the cone at transverse distance below mu.
                let t = emb.decode(&y)?;
                let mut pts = t.points.clone();
                for p in pts.iter_mut() {
                    for c in p.iter_mut() {
                        *c += rng.random_range(-0.3..0.3) * mu;
                    }
                }
                let w = emb.xi(&qvalued::QPoint::new(t.n, pts)?)?;
                let p_face = face.project(&w);
                let z = dist(&w, &p_face);
                if z > 0.9 * mu {
                    continue;
                }
                // Tube membership mirrors the stage selector.
                if emb.dist_to_face_closure(&w, face.id)? > 2.0 * proj.geometry.c[face.dim] {
                    continue;
                }
                if face.dim >= 1
                    && emb.dist_to_skeleton(&w, face.dim - 1)? < proj.geometry.c[face.dim - 1]
                {
                    continue;
                }
                let outp = proj.project_on_cone(&w)?;
                coincide_worst = coincide_worst.max(dist(&outp, &p_face));
                coincide_count += 1;
            }
        }

        // Energy inequality on random fields.
        let fields: Vec<Vec<Vec<f64>>> = (0..rc.fields)
            .map(|_| random_cone_adjacent_field(&emb, &mesh, mu, top, nn, &mut rng))
            .collect();
        let rep = verify_energy_inequality(&proj, &mesh, &fields)?;
        energy_c_worst = energy_c_worst.max(rep.fitted_c);
        let mut ecsv = Csv::new(
            out,
            &format!("rho_star_energy_mu{}.csv", fmt_mu(mu)),
            &["field", "lhs", "near", "far", "required_c"],
        )?;
        for (i, row) in rep.rows.iter().enumerate() {
            ecsv.row(&[
                i.to_string(),
                fmt(row.lhs),
                fmt(row.near),
                fmt(row.far),
                fmt(row.required_c),
            ])?;
        }
        ecsv.finish()?;
    }
    sweep.finish()?;

    summary.check(
        "pi-f-coincidence",
        coincide_worst <= 1e-8 && coincide_count > 0,
        format!("max={} samples={coincide_count}", fmt(coincide_worst)),
    );

    // Least-squares log-log slope of the sup defect against mu.
    let slope = loglog_slope(&defects);
    let threshold = 2.0f64.powi(-(top as i32)) - 0.05;
    summary.check(
        "defect-exponent",
        slope >= threshold,
        format!("slope={} threshold={} defects={:?}", fmt(slope), fmt(threshold), defects),
    );

    summary.check(
        "energy-inequality-frozen-c",
        energy_c_worst <= rc.energy_c,
        format!("fitted_c={} frozen_c={}", fmt(energy_c_worst), fmt(rc.energy_c)),
    );

    let elapsed = started.elapsed().as_secs_f64();
    summary.check("rho-star-runtime", elapsed < 300.0, format!("seconds={elapsed:.1}"));

    summary.write(out)?;
    Ok(summary.all_passed())
}

fn fmt_mu(mu: f64) -> String {
    format!("{mu:.4}").replace('.', "p")
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

/// A smooth field valued near the cone: the embedded image of a smooth
/// Q-point path plus a smooth off-cone displacement whose size crosses the
/// near/far tube width mu^top.
fn random_cone_adjacent_field(
    emb: &Arc<Embedding>,
    mesh: &Arc<Mesh>,
    mu: f64,
    top: usize,
    nn: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let spec = emb.spec();
    let (q, n) = (spec.q, spec.n);
    let tube = mu.powi(top as i32);
    let modes: Vec<(f64, [f64; 2], f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(0.3..1.0),
                [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)],
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    // Two sheets separated by a gap comparable to the tube width, so the
    // off-cone displacement genuinely crosses the cone boundary.
    let gap = rng.random_range(0.5..3.0) * tube;
    let base: Vec<Vec<f64>> = (0..q)
        .map(|i| {
            (0..n)
                .map(|d| rng.random_range(-1.0..1.0) + i as f64 * gap + d as f64 * 0.1)
                .collect()
        })
        .collect();
    // Push the two smallest slots of the first block against their sorting:
    // from a blockwise-sorted point this direction leaves the cone.
    let off_dir: Vec<f64> = {
        let mut v = vec![0.0; nn];
        v[0] = 1.0 / 2.0f64.sqrt();
        v[1] = -1.0 / 2.0f64.sqrt();
        v
    };
    let amp = rng.random_range(0.5..4.0) * tube;
    mesh.vertices
        .iter()
        .map(|p| {
            let mut pts = base.clone();
            for (amp_m, k, phase) in &modes {
                let s = amp_m * (k[0] * p[0] + k[1] * p[1] + phase).sin() * 0.3;
                for (i, pt) in pts.iter_mut().enumerate() {
                    pt[0] += s * (1.0 + i as f64 * 0.5);
                }
            }
            let t = qvalued::QPoint::new(n, pts).unwrap();
            let mut w = emb.xi(&t).unwrap();
            let bump = amp * ((2.0 * p[0]).sin() * (1.5 * p[1]).cos()).max(0.0);
            for (wc, oc) in w.iter_mut().zip(&off_dir) {
                *wc += bump * oc;
            }
            w
        })
        .collect()
}
