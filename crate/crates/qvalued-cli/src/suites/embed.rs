//! embed-verify: embedding properties (Lipschitz bound, permutation
//! invariance, decode round-trips, retraction) and the face-lattice dump
//! with the partition/cone/boundary-dimension checks.

use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use qvalued::embedding::{dist, Embedding};
use qvalued::qspace;

use crate::config::CampaignConfig;
use crate::report::{fmt, Csv, Summary};

pub fn run(cfg: &CampaignConfig, out: &Path, _strict: bool) -> anyhow::Result<bool> {
    let mut summary = Summary::new("embed-verify", cfg.seed);
    let ec = &cfg.embed_verify;
    let emb = Embedding::standard(ec.q, ec.n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xE3BD);

    // Permutation invariance is bit-exact.
    let mut perm_ok = true;
    for _ in 0..500 {
        let t = emb.random_qpoint(&mut rng);
        let mut shuffled = t.clone();
        shuffled.points.reverse();
        perm_ok &= emb.xi(&t)? == emb.xi(&shuffled)?;
    }
    summary.check("xi-permutation-invariant", perm_ok, String::new());

    // Lip(xi) <= 1 within 1e-9.
    let mut worst_ratio = 0.0f64;
    for _ in 0..ec.lip_samples {
        let s = emb.random_qpoint(&mut rng);
        let t = emb.random_qpoint(&mut rng);
        let g = qspace::metric_g(&s, &t)?;
        if g > 1e-12 {
            worst_ratio = worst_ratio.max(dist(&emb.xi(&s)?, &emb.xi(&t)?) / g);
        }
    }
    summary.check(
        "xi-lipschitz-bound",
        worst_ratio <= 1.0 + 1e-9,
        format!("max_ratio={}", fmt(worst_ratio)),
    );

    // Decode round-trip within 1e-6 in the metric.
    let mut worst_rt = 0.0f64;
    for _ in 0..ec.decode_samples {
        let t = emb.random_qpoint(&mut rng);
        let back = emb.decode(&emb.xi(&t)?)?;
        worst_rt = worst_rt.max(qspace::metric_g(&t, &back)?);
    }
    summary.check("decode-roundtrip", worst_rt <= 1e-6, format!("max_err={}", fmt(worst_rt)));

    // Retraction: identity on the cone, idempotent off it.
    let mut retract_ok = true;
    for _ in 0..300 {
        let t = emb.random_qpoint(&mut rng);
        let w = emb.xi(&t)?;
        retract_ok &= dist(&emb.retract(&w)?.point, &w) <= 1e-9;
        let off: Vec<f64> =
            w.iter().map(|x| x + rng.random_range(-0.5..0.5)).collect();
        let r1 = emb.retract(&off)?;
        let r2 = emb.retract(&r1.point)?;
        retract_ok &= dist(&r1.point, &r2.point) <= 1e-9;
    }
    summary.check("retraction-identity-idempotent", retract_ok, String::new());

    // Measured inverse Lipschitz constant (reported, not asserted).
    let inv_lip = emb.measured_inverse_lipschitz(2_000, cfg.seed ^ 0x17)?;
    summary.note("measured-inverse-lipschitz", format!("c={}", fmt(inv_lip)));

    // Face lattice dump and the partition/cone properties.
    if let Some(complex) = emb.complex() {
        let mut csv =
            Csv::new(out, "face_lattice.csv", &["id", "dim", "signature", "representative"])?;
        for face in &complex.faces {
            csv.row(&[
                face.id.to_string(),
                face.dim.to_string(),
                format!("{:?}", face.signature),
                face.representative.iter().map(|x| fmt(*x)).collect::<Vec<_>>().join(" "),
            ])?;
        }
        csv.finish()?;

        if ec.q == 2 && ec.n == 1 {
            let dims: Vec<usize> = complex.faces.iter().map(|f| f.dim).collect();
            summary.check(
                "minimal-face-lattice",
                complex.faces.len() == 2 && dims == vec![1, 2],
                format!("faces={dims:?}"),
            );
        }

        // (p1)+(p2): every sampled cone point resolves to exactly one face
        // (the canonical signature is total and the lattice has no duplicate
        // canonical signatures by construction; failure shows up as a lookup
        // miss). (p3): scaling preserves the face.
        let mut partition_ok = true;
        let mut cone_ok = true;
        for _ in 0..ec.face_samples {
            let t = emb.random_qpoint(&mut rng);
            let w = emb.xi(&t)?;
            match emb.face_of(&w) {
                Ok(id) => {
                    let lam = rng.random_range(0.2..4.0);
                    let scaled: Vec<f64> = w.iter().map(|x| x * lam).collect();
                    cone_ok &= emb.face_of(&scaled)? == id;
                }
                Err(_) => partition_ok = false,
            }
        }
        summary.check("face-partition-p1-p2", partition_ok, String::new());
        summary.check("face-cone-p3", cone_ok, String::new());

        // (p4): drive open-face points toward their projection onto a
        // lower-dimensional span; the limiting face has smaller dimension.
        let mut p4_ok = true;
        let mut p4_checked = 0;
        for _ in 0..200 {
            let t = emb.random_qpoint(&mut rng);
            let w = emb.xi(&t)?;
            let id = emb.face_of(&w)?;
            let dim = complex.face(id).dim;
            for lower in &complex.faces {
                if lower.dim >= dim {
                    continue;
                }
                if !complex.in_closure(lower.id, id) {
                    continue;
                }
                let p = lower.project(&w);
                // Walk to the boundary point.
                let end = emb.retract(&p)?.point;
                if dist(&end, &w) < 1e-9 {
                    continue;
                }
                let end_id = emb.face_of(&end)?;
                p4_checked += 1;
                p4_ok &= complex.face(end_id).dim < dim;
                break;
            }
        }
        summary.check(
            "face-boundary-p4",
            p4_ok && p4_checked > 0,
            format!("paths={p4_checked}"),
        );
    } else {
        summary.note("face-lattice", "complex out of enumeration range".into());
    }

    summary.write(out)?;
    Ok(summary.all_passed())
}
