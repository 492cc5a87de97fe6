//! Pointwise Lipschitz extension queries as convex feasibility problems:
//! given lambda-consistent samples (x_i, y_i), any query x admits y with
//! |y - y_i| <= lambda |x - x_i| for all i. The solver runs a projected
//! subgradient descent with Polyak steps on the max-violation functional,
//! warm-started from the nearest sample; any feasible point is acceptable.

use crate::error::{Error, Result};

/// Max-violation functional: max_i (|y - y_i| - lambda |x - x_i|).
fn violation(samples: &[(Vec<f64>, Vec<f64>)], lambda: f64, x: &[f64], y: &[f64]) -> (f64, usize) {
    let mut worst = f64::NEG_INFINITY;
    let mut arg = 0;
    for (i, (xi, yi)) in samples.iter().enumerate() {
        let v = dist(y, yi) - lambda * dist(x, xi);
        if v > worst {
            worst = v;
            arg = i;
        }
    }
    (worst, arg)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// Check lambda-consistency of the sample set.
pub fn check_consistency(samples: &[(Vec<f64>, Vec<f64>)], lambda: f64, tol: f64) -> Result<()> {
    for i in 0..samples.len() {
        for j in (i + 1)..samples.len() {
            let dy = dist(&samples[i].1, &samples[j].1);
            let dx = dist(&samples[i].0, &samples[j].0);
            if dy > lambda * dx + tol {
                return Err(Error::InvalidInput(format!(
                    "samples {i},{j} violate the Lipschitz bound: {dy:.6} > {lambda:.6} * {dx:.6}"
                )));
            }
        }
    }
    Ok(())
}

/// Feasibility tolerance for accepted queries.
pub const FEAS_TOL: f64 = 1e-8;

/// Extend the sampled map to `x`. Deterministic; errors if the iteration
/// budget is exhausted before reaching feasibility (which signals an upstream
/// Lipschitz violation, since a feasible point always exists).
pub fn kirszbraun_extend(
    samples: &[(Vec<f64>, Vec<f64>)],
    lambda: f64,
    x: &[f64],
) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no samples to extend".into()));
    }
    check_consistency(samples, lambda, 1e-9)?;
    // Warm start: value of the nearest sample.
    let nearest = samples
        .iter()
        .enumerate()
        .min_by(|(_, (xa, _)), (_, (xb, _))| {
            dist(x, xa).partial_cmp(&dist(x, xb)).unwrap()
        })
        .map(|(i, _)| i)
        .unwrap();
    let mut y = samples[nearest].1.clone();
    let scale: f64 = samples
        .iter()
        .map(|(xi, _)| dist(x, xi))
        .fold(0.0, f64::max)
        .max(1.0);

    for _ in 0..10_000 {
        let (v, arg) = violation(samples, lambda, x, &y);
        if v <= FEAS_TOL * scale.min(1.0) {
            return Ok(y);
        }
        // Subgradient of the active term: (y - y_arg)/|y - y_arg|.
        let yi = &samples[arg].1;
        let d = dist(&y, yi).max(1e-300);
        // Polyak step toward the zero level of the max functional.
        let step = v / 1.0; // |g| = 1 for the distance subgradient
        for (yc, yic) in y.iter_mut().zip(yi) {
            *yc -= step * (*yc - yic) / d;
        }
    }
    let (v, _) = violation(samples, lambda, x, &y);
    Err(Error::Convergence { context: "kirszbraun feasibility".into(), residual: v })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_at_sample_points() {
        let samples = vec![
            (vec![0.0, 0.0], vec![1.0, 2.0]),
            (vec![1.0, 0.0], vec![1.5, 2.0]),
            (vec![0.0, 1.0], vec![1.0, 2.5]),
        ];
        let y = kirszbraun_extend(&samples, 1.0, &[0.0, 0.0]).unwrap();
        assert!(dist(&y, &samples[0].1) <= 1e-8);
    }

    #[test]
    fn single_sample_returns_its_value() {
        let samples = vec![(vec![2.0], vec![-3.0])];
        let y = kirszbraun_extend(&samples, 0.5, &[10.0]).unwrap();
        assert_eq!(y, vec![-3.0]);
    }

    #[test]
    fn one_dimensional_cone_intersection_oracle() {
        // Three collinear samples of a 1-Lipschitz function; the feasible set
        // at the query is the intersection of intervals
        // [y_i - |x - x_i|, y_i + |x - x_i|], computed directly.
        let f = |x: f64| 0.5 * x + 0.25 * (2.0 * x).sin() / 2.0;
        let xs = [0.0, 1.0, 3.0];
        let samples: Vec<(Vec<f64>, Vec<f64>)> =
            xs.iter().map(|&x| (vec![x], vec![f(x)])).collect();
        let lambda = 1.0;
        let q = 1.7;
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for (x, y) in &samples {
            lo = lo.max(y[0] - lambda * (q - x[0]).abs());
            hi = hi.min(y[0] + lambda * (q - x[0]).abs());
        }
        assert!(lo <= hi, "oracle interval must be nonempty");
        let y = kirszbraun_extend(&samples, lambda, &[q]).unwrap();
        assert!(y[0] >= lo - 1e-8 && y[0] <= hi + 1e-8, "{} not in [{lo}, {hi}]", y[0]);
    }

    #[test]
    fn inconsistent_samples_rejected() {
        let samples = vec![
            (vec![0.0], vec![0.0]),
            (vec![1.0], vec![5.0]),
        ];
        assert!(kirszbraun_extend(&samples, 1.0, &[0.5]).is_err());
    }

    #[test]
    fn feasible_on_random_consistent_sets() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for _ in 0..30 {
            // Build consistent samples from an actual Lipschitz map: a random
            // affine contraction plus clipping.
            let a: Vec<f64> = (0..2).map(|_| rng.random_range(-0.5..0.5)).collect();
            let map = |x: &[f64]| vec![a[0] * x[0] + a[1] * x[1], 0.3 * x[0] - 0.2 * x[1]];
            let samples: Vec<(Vec<f64>, Vec<f64>)> = (0..8)
                .map(|_| {
                    let x = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
                    let y = map(&x);
                    (x, y)
                })
                .collect();
            let q = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let y = kirszbraun_extend(&samples, 1.0, &q).unwrap();
            let (v, _) = violation(&samples, 1.0, &q, &y);
            assert!(v <= 1e-8, "violation {v}");
        }
    }
}
