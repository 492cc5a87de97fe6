//! metric-bench: assignment-solver oracle comparisons and metric axioms.

use std::path::Path;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use qvalued::assignment::{self, CostMatrix};
use qvalued::qspace::{self, QPoint};

use crate::config::CampaignConfig;
use crate::report::{fmt, Csv, Summary};

fn random_qpoint(rng: &mut ChaCha8Rng, q: usize, n: usize) -> QPoint {
    QPoint::new(n, (0..q).map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).collect())
        .unwrap()
}

pub fn run(cfg: &CampaignConfig, out: &Path, _strict: bool) -> anyhow::Result<bool> {
    let mut summary = Summary::new("metric-bench", cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mc = &cfg.metric_bench;

    // Oracle battery: exact agreement with the exhaustive-permutation
    // minimum for both metrics.
    let started = Instant::now();
    let mut csv = Csv::new(out, "metric_oracle.csv", &["q", "n", "pairs", "max_err_g", "max_err_w1"])?;
    let mut worst_overall = 0.0f64;
    for q in 2..=mc.q_max {
        for &n in &mc.dims {
            let mut worst_g = 0.0f64;
            let mut worst_w1 = 0.0f64;
            for _ in 0..mc.pairs {
                let a = random_qpoint(&mut rng, q, n);
                let b = random_qpoint(&mut rng, q, n);
                let g = qspace::metric_g(&a, &b)?;
                let w1 = qspace::wasserstein1(&a, &b)?;
                let c2 = CostMatrix::from_fn(q, |i, j| {
                    a.points[i].iter().zip(&b.points[j]).map(|(x, y)| (x - y) * (x - y)).sum()
                });
                let c1 = CostMatrix::from_fn(q, |i, j| {
                    a.points[i]
                        .iter()
                        .zip(&b.points[j])
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
                        .sqrt()
                });
                worst_g = worst_g.max((g - assignment::brute_force(&c2).value.sqrt()).abs());
                worst_w1 = worst_w1.max((w1 - assignment::brute_force(&c1).value).abs());
            }
            worst_overall = worst_overall.max(worst_g).max(worst_w1);
            csv.row(&[
                q.to_string(),
                n.to_string(),
                mc.pairs.to_string(),
                fmt(worst_g),
                fmt(worst_w1),
            ])?;
        }
    }
    csv.finish()?;
    let elapsed = started.elapsed().as_secs_f64();
    summary.check(
        "assignment-oracle-exact",
        worst_overall <= 1e-12,
        format!("max_err={}", fmt(worst_overall)),
    );
    summary.check("oracle-runtime", elapsed < 10.0, format!("seconds={elapsed:.2}"));

    // Metric axioms on random triples.
    let mut tri_violation = 0.0f64;
    let mut sym_violation = 0.0f64;
    let mut dom_violation = 0.0f64;
    for _ in 0..mc.triples {
        let a = random_qpoint(&mut rng, 3, 2);
        let b = random_qpoint(&mut rng, 3, 2);
        let c = random_qpoint(&mut rng, 3, 2);
        let (gab, gba) = (qspace::metric_g(&a, &b)?, qspace::metric_g(&b, &a)?);
        let (gbc, gac) = (qspace::metric_g(&b, &c)?, qspace::metric_g(&a, &c)?);
        sym_violation = sym_violation.max((gab - gba).abs());
        tri_violation = tri_violation.max(gac - gab - gbc);
        dom_violation = dom_violation.max(gab - qspace::wasserstein1(&a, &b)?);
    }
    summary.check("metric-symmetry", sym_violation <= 1e-12, format!("max={}", fmt(sym_violation)));
    summary.check(
        "triangle-inequality",
        tri_violation <= 1e-9,
        format!("max_slack={}", fmt(tri_violation)),
    );
    summary.check(
        "w1-dominates-g",
        dom_violation <= 1e-9,
        format!("max_gap={}", fmt(dom_violation)),
    );

    // Identity of indiscernibles on canonical forms.
    let mut id_ok = true;
    for _ in 0..200 {
        let a = random_qpoint(&mut rng, 3, 2);
        let b = a.canonical();
        id_ok &= qspace::metric_g(&a, &b)? <= 1e-12;
    }
    summary.check("zero-iff-equal", id_ok, String::new());

    // Pinned small cases.
    let a = QPoint::scalar(&[0.0, 2.0]);
    let b = QPoint::scalar(&[1.0, 1.0]);
    summary.check(
        "pinned-metric-example",
        (qspace::metric_g(&a, &b)? - 2.0f64.sqrt()).abs() <= 1e-15
            && (qspace::wasserstein1(&a, &b)? - 2.0).abs() <= 1e-15,
        String::new(),
    );
    let t = QPoint::scalar(&[0.0, 1.0, 3.0]);
    summary.check(
        "separation-diameter",
        qspace::separation(&t) == 1.0
            && qspace::diameter(&t) == 3.0
            && qspace::separation(&QPoint::splat(2, vec![0.5])) == f64::INFINITY,
        String::new(),
    );
    let clusters = qspace::cluster_split(&QPoint::scalar(&[0.0, 0.1, 5.0, 5.2]), 1.0)?;
    summary.check("cluster-split", clusters.len() == 2, format!("clusters={}", clusters.len()));

    // Translation invariance of the metric and its minimizing matching.
    let mut trans_err = 0.0f64;
    for _ in 0..500 {
        let s = random_qpoint(&mut rng, 3, 2);
        let t = random_qpoint(&mut rng, 3, 2);
        let y: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
        let (ts, tt) = (qspace::translate(&s, &y)?, qspace::translate(&t, &y)?);
        trans_err = trans_err
            .max((qspace::metric_g(&s, &t)? - qspace::metric_g(&ts, &tt)?).abs());
    }
    summary.check(
        "translation-invariance",
        trans_err <= 1e-12,
        format!("max={}", fmt(trans_err)),
    );

    summary.write(out)?;
    Ok(summary.all_passed())
}
