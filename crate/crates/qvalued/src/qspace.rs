//! The metric space of unordered Q-tuples of points in R^n: assignment
//! metrics, separation/diameter statistics, translations, and single-linkage
//! cluster splitting.

use serde::{Deserialize, Serialize};

use crate::assignment::{self, CostMatrix};
use crate::error::{Error, Result};

/// Absolute tolerance used for equality of distances.
pub const DIST_EQ_TOL: f64 = 1e-12;

/// An unordered multiset of `q` points in R^n. Entries may repeat.
///
/// Semantic equality is permutation-invariant; `canonicalize` orders the
/// points lexicographically so that serialization round-trips produce a
/// stable representative.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QPoint {
    pub q: usize,
    pub n: usize,
    pub points: Vec<Vec<f64>>,
}

impl QPoint {
    pub fn new(n: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("QPoint needs at least one point".into()));
        }
        for p in &points {
            if p.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: p.len() });
            }
        }
        Ok(Self { q: points.len(), n, points })
    }

    /// `q` copies of a single point.
    pub fn splat(q: usize, p: Vec<f64>) -> Self {
        let n = p.len();
        Self { q, n, points: vec![p; q] }
    }

    /// Convenience constructor for n = 1.
    pub fn scalar(values: &[f64]) -> Self {
        Self {
            q: values.len(),
            n: 1,
            points: values.iter().map(|&v| vec![v]).collect(),
        }
    }

    /// Lexicographic order on coordinates, ties broken by original index.
    pub fn canonicalize(&mut self) {
        self.points.sort_by(|a, b| lex_cmp(a, b));
    }

    pub fn canonical(&self) -> Self {
        let mut c = self.clone();
        c.canonicalize();
        c
    }

    fn check_compatible(&self, other: &QPoint) -> Result<()> {
        if self.q != other.q {
            return Err(Error::MultiplicityMismatch { expected: self.q, got: other.q });
        }
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: other.n });
        }
        Ok(())
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Equal) | None => continue,
            Some(ord) => return ord,
        }
    }
    std::cmp::Ordering::Equal
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
}

/// The assignment metric: minimum over permutations of the l2 sum of matched
/// squared distances, then square root. Exact via the Hungarian solver, with
/// direct enumeration for q <= 3 (hot path of the mesh sweeps).
pub fn metric_g(a: &QPoint, b: &QPoint) -> Result<f64> {
    a.check_compatible(b)?;
    match a.q {
        1 => Ok(dist(&a.points[0], &b.points[0])),
        2 | 3 => {
            let mut best = f64::INFINITY;
            for perm in PERMS[a.q] {
                let v: f64 = (0..a.q).map(|i| dist_sq(&a.points[i], &b.points[perm[i]])).sum();
                best = best.min(v);
            }
            Ok(best.max(0.0).sqrt())
        }
        _ => {
            let c = CostMatrix::from_fn(a.q, |i, j| dist_sq(&a.points[i], &b.points[j]));
            Ok(assignment::solve(&c).value.max(0.0).sqrt())
        }
    }
}

/// Permutations of {0..q} in lexicographic order, q <= 3.
const PERMS: [&[&[usize]]; 4] = [
    &[],
    &[&[0]],
    &[&[0, 1], &[1, 0]],
    &[&[0, 1, 2], &[0, 2, 1], &[1, 0, 2], &[1, 2, 0], &[2, 0, 1], &[2, 1, 0]],
];

/// The exponent-1 Wasserstein distance: minimum over permutations of the sum
/// of matched distances. Always >= `metric_g` on the same pair.
pub fn wasserstein1(a: &QPoint, b: &QPoint) -> Result<f64> {
    a.check_compatible(b)?;
    let c = CostMatrix::from_fn(a.q, |i, j| dist(&a.points[i], &b.points[j]));
    Ok(assignment::solve(&c).value.max(0.0))
}

/// The lexicographically smallest optimal matching for the squared-distance
/// cost, as row->column indices. Used wherever a deterministic subgradient or
/// sheet pairing is required.
pub fn optimal_matching(a: &QPoint, b: &QPoint) -> Result<Vec<usize>> {
    a.check_compatible(b)?;
    match a.q {
        1 => Ok(vec![0]),
        2 | 3 => {
            let mut best = f64::INFINITY;
            for perm in PERMS[a.q] {
                let v: f64 = (0..a.q).map(|i| dist_sq(&a.points[i], &b.points[perm[i]])).sum();
                best = best.min(v);
            }
            // First permutation in lex order within tolerance of the optimum.
            for perm in PERMS[a.q] {
                let v: f64 = (0..a.q).map(|i| dist_sq(&a.points[i], &b.points[perm[i]])).sum();
                if v <= best + DIST_EQ_TOL {
                    return Ok(perm.to_vec());
                }
            }
            unreachable!()
        }
        _ => {
            let c = CostMatrix::from_fn(a.q, |i, j| dist_sq(&a.points[i], &b.points[j]));
            Ok(assignment::solve_lex(&c, DIST_EQ_TOL).perm)
        }
    }
}

/// Minimum distance over pairs of distinct values; +inf when all points
/// coincide (min over an empty set).
pub fn separation(t: &QPoint) -> f64 {
    let mut s = f64::INFINITY;
    for i in 0..t.q {
        for j in (i + 1)..t.q {
            let d = dist(&t.points[i], &t.points[j]);
            if d > 0.0 {
                s = s.min(d);
            }
        }
    }
    s
}

/// Maximum pairwise distance.
pub fn diameter(t: &QPoint) -> f64 {
    let mut d = 0.0f64;
    for i in 0..t.q {
        for j in (i + 1)..t.q {
            d = d.max(dist(&t.points[i], &t.points[j]));
        }
    }
    d
}

/// Shift every point by `-y`.
pub fn translate(t: &QPoint, y: &[f64]) -> Result<QPoint> {
    if y.len() != t.n {
        return Err(Error::DimensionMismatch { expected: t.n, got: y.len() });
    }
    let points = t
        .points
        .iter()
        .map(|p| p.iter().zip(y).map(|(a, b)| a - b).collect())
        .collect();
    QPoint::new(t.n, points)
}

/// Single-linkage clusters at the given threshold. The concatenation of the
/// output is a permutation of the input; points in different clusters are
/// more than `threshold` apart.
pub fn cluster_split(t: &QPoint, threshold: f64) -> Result<Vec<QPoint>> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidInput("cluster threshold must be positive".into()));
    }
    // Union-find over points, linking pairs within threshold.
    let mut parent: Vec<usize> = (0..t.q).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    for i in 0..t.q {
        for j in (i + 1)..t.q {
            if dist(&t.points[i], &t.points[j]) <= threshold {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: Vec<(usize, Vec<Vec<f64>>)> = Vec::new();
    for i in 0..t.q {
        let r = find(&mut parent, i);
        match groups.iter_mut().find(|(root, _)| *root == r) {
            Some((_, pts)) => pts.push(t.points[i].clone()),
            None => groups.push((r, vec![t.points[i].clone()])),
        }
    }
    groups.into_iter().map(|(_, pts)| QPoint::new(t.n, pts)).collect()
}
