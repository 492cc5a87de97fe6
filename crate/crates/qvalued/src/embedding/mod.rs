//! The embedding of unordered tuples into Euclidean space: directional
//! projections followed by blockwise sorting. The image is a cone stratified
//! into finitely many convex open faces (see [`faces`]); decoding and
//! nearest-point retraction scan the face spans, with an alternating
//! least-squares fallback when the face complex is out of enumeration range.

pub mod faces;

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qspace::{self, QPoint};

pub use faces::{face_decomposition, BlockSig, ConeComplex, Face, Signature};

/// Default relative tolerance for decode residuals.
pub const DECODE_TOL: f64 = 1e-7;

/// Default relative tolerance for face membership comparisons.
pub const FACE_TOL: f64 = 1e-7;

/// Parameters of the embedding: `h` unit direction vectors in R^n and a
/// normalization factor. The embedded dimension is N = q * h.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingSpec {
    pub q: usize,
    pub n: usize,
    pub dirs: Vec<Vec<f64>>,
    pub scale: f64,
    /// Enumeration bounds for the face decomposition.
    pub max_enum_q: usize,
    pub max_enum_size: usize,
}

impl EmbeddingSpec {
    pub fn with_dirs(q: usize, n: usize, dirs: Vec<Vec<f64>>, scale: f64) -> Result<Self> {
        if q == 0 || n == 0 || dirs.is_empty() {
            return Err(Error::InvalidInput("q, n, h must all be positive".into()));
        }
        for e in &dirs {
            if e.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: e.len() });
            }
            let norm: f64 = e.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!("direction has norm {norm}, want 1")));
            }
        }
        for i in 0..dirs.len() {
            for j in (i + 1)..dirs.len() {
                let d: f64 =
                    dirs[i].iter().zip(&dirs[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                if d.sqrt() < 1e-9 {
                    return Err(Error::InvalidInput("directions must be pairwise distinct".into()));
                }
            }
        }
        Ok(Self { q, n, dirs, scale, max_enum_q: 3, max_enum_size: 12 })
    }

    /// Default spec: for n = 1 a single direction; for n >= 2,
    /// max(n(q-1)+1, n) maximally spread unit vectors. Scale is h^{-1/2} so
    /// the embedding is 1-Lipschitz.
    pub fn standard(q: usize, n: usize) -> Result<Self> {
        let dirs = default_directions(q, n, 0);
        let scale = 1.0 / (dirs.len() as f64).sqrt();
        Self::with_dirs(q, n, dirs, scale)
    }

    pub fn h(&self) -> usize {
        self.dirs.len()
    }

    /// Embedded dimension N = q * h.
    pub fn big_n(&self) -> usize {
        self.q * self.h()
    }
}

fn default_directions(q: usize, n: usize, rotation_seed: u64) -> Vec<Vec<f64>> {
    if n == 1 {
        return vec![vec![1.0]];
    }
    // n(q-1)+1 spread directions certify injectivity at desk scale; at least
    // n are needed to span.
    let h = (n * (q - 1) + 1).max(n);
    let mut dirs = Vec::with_capacity(h);
    if n == 2 {
        // Evenly spread over the projective circle.
        let offset = rotation_seed as f64 * 0.1;
        for l in 0..h {
            let theta = std::f64::consts::PI * l as f64 / h as f64 + offset;
            dirs.push(vec![theta.cos(), theta.sin()]);
        }
    } else {
        // Golden-spiral points on the upper hemisphere, rotated on resample.
        let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
        let offset = rotation_seed as f64 * 0.37;
        for l in 0..h {
            let z = (l as f64 + 0.5) / h as f64; // (0,1): upper hemisphere
            let r = (1.0 - z * z).sqrt();
            let phi = golden * l as f64 + offset;
            let mut e = vec![r * phi.cos(), r * phi.sin(), z];
            e.truncate(3);
            // For n > 3 pad with zeros then renormalize a small perturbation
            // to break degeneracy.
            while e.len() < n {
                let k = e.len() as f64;
                e.push(0.1 / (k + l as f64 + 1.0));
            }
            let norm: f64 = e.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in e.iter_mut() {
                *x /= norm;
            }
            dirs.push(e);
        }
    }
    dirs
}

/// The embedding engine: spec plus precomputed recovery data and, when the
/// spec is within enumeration range, the face complex of the image cone.
#[derive(Debug, Clone)]
pub struct Embedding {
    spec: EmbeddingSpec,
    /// Inverse of the direction Gram matrix sum_l e_l e_l^T.
    gram_inv: DMatrix<f64>,
    complex: Option<ConeComplex>,
}

impl Embedding {
    pub fn new(spec: EmbeddingSpec) -> Result<Self> {
        let n = spec.n;
        let mut gram = DMatrix::zeros(n, n);
        for e in &spec.dirs {
            for a in 0..n {
                for b in 0..n {
                    gram[(a, b)] += e[a] * e[b];
                }
            }
        }
        let gram_inv = gram
            .try_inverse()
            .ok_or_else(|| Error::Geometry("directions do not span R^n".into()))?;
        let complex = match face_decomposition(&spec) {
            Ok(c) => Some(c),
            Err(Error::EnumerationBound(_)) => None,
            Err(e) => return Err(e),
        };
        let emb = Self { spec, gram_inv, complex };
        emb.validate_injectivity(10_000, 0x51ED)?;
        Ok(emb)
    }

    /// Default embedding for (q, n); resamples the direction set if the
    /// injectivity validation rejects it.
    pub fn standard(q: usize, n: usize) -> Result<Self> {
        let mut last_err = None;
        for attempt in 0..3 {
            let dirs = default_directions(q, n, attempt);
            let scale = 1.0 / (dirs.len() as f64).sqrt();
            let spec = EmbeddingSpec::with_dirs(q, n, dirs, scale)?;
            match Self::new(spec) {
                Ok(e) => return Ok(e),
                Err(e @ Error::Geometry(_)) => last_err = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last_err.unwrap_or_else(|| Error::Geometry("no valid direction set".into())))
    }

    /// The minimal spec q=2, n=1, h=1 (the sorted-pair half-plane).
    pub fn line_pair() -> Self {
        let spec = EmbeddingSpec::with_dirs(2, 1, vec![vec![1.0]], 1.0).unwrap();
        Self::new(spec).unwrap()
    }

    pub fn spec(&self) -> &EmbeddingSpec {
        &self.spec
    }

    pub fn complex(&self) -> Option<&ConeComplex> {
        self.complex.as_ref()
    }

    /// The linear part: block l holds the q projections onto direction l,
    /// scaled. `tuple` is ordered.
    pub fn lmap(&self, tuple: &[Vec<f64>]) -> Result<Vec<f64>> {
        if tuple.len() != self.spec.q {
            return Err(Error::MultiplicityMismatch { expected: self.spec.q, got: tuple.len() });
        }
        let (q, n) = (self.spec.q, self.spec.n);
        let mut out = vec![0.0; self.spec.big_n()];
        for (l, e) in self.spec.dirs.iter().enumerate() {
            for (i, p) in tuple.iter().enumerate() {
                if p.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: p.len() });
                }
                let dot: f64 = p.iter().zip(e).map(|(a, b)| a * b).sum();
                out[l * q + i] = self.spec.scale * dot;
            }
        }
        Ok(out)
    }

    /// Sort each q-block ascending. 1-Lipschitz per block, idempotent.
    pub fn omap(&self, w: &[f64]) -> Vec<f64> {
        let q = self.spec.q;
        let mut out = w.to_vec();
        for block in out.chunks_mut(q) {
            block.sort_by(|a, b| a.partial_cmp(b).unwrap());
        }
        out
    }

    /// The embedding: sort-compose-linear, independent of the input ordering.
    pub fn xi(&self, t: &QPoint) -> Result<Vec<f64>> {
        if t.q != self.spec.q {
            return Err(Error::MultiplicityMismatch { expected: self.spec.q, got: t.q });
        }
        let w = self.lmap(&t.points)?;
        Ok(self.omap(&w))
    }

    /// Recover the tuple whose image is (approximately) `w`.
    pub fn decode(&self, w: &[f64]) -> Result<QPoint> {
        let tol = DECODE_TOL * norm(w).max(1.0);
        let (t, res) = self.decode_with_residual(w)?;
        if res <= tol {
            Ok(t)
        } else {
            Err(Error::Convergence { context: "decode".into(), residual: res })
        }
    }

    /// Best reconstruction and its forward residual |xi(T) - w|.
    pub fn decode_with_residual(&self, w: &[f64]) -> Result<(QPoint, f64)> {
        self.check_len(w)?;
        if let Some(complex) = &self.complex {
            let mut best: Option<(f64, Vec<f64>)> = None;
            for face in &complex.faces {
                let p = face.project(w);
                let r = dist(w, &p);
                if best.as_ref().map_or(true, |(br, _)| r < *br - 1e-15) {
                    let tuple = self.tuple_from_slots(&p, &face.slot_to_index);
                    best = Some((r, tuple));
                }
            }
            let (_, tuple) = best.expect("complex has at least one face");
            let t = self.tuple_to_qpoint(&tuple);
            let res = dist(&self.xi(&t)?, w);
            // The span scan can be misled on points far off the cone; keep
            // the better of scan and local refinement.
            let (t2, res2) = self.alternating(w, 8, 60);
            if res2 < res {
                return Ok((t2, res2));
            }
            return Ok((t, res));
        }
        Ok(self.alternating(w, 8, 60))
    }

    /// Nearest point of the image cone. Exact (face-span scan) when the face
    /// complex is available, otherwise alternating minimization.
    pub fn retract(&self, w: &[f64]) -> Result<Retraction> {
        self.check_len(w)?;
        if let Some(complex) = &self.complex {
            let feas_tol = FACE_TOL * norm(w).max(1.0);
            let mut best: Option<(f64, Vec<f64>, &Face)> = None;
            for face in &complex.faces {
                let p = face.project(w);
                if !self.closure_feasible(&p, face, feas_tol) {
                    continue;
                }
                let d = dist(w, &p);
                if best.as_ref().map_or(true, |(bd, _, _)| d < *bd - 1e-15) {
                    best = Some((d, p, face));
                }
            }
            if let Some((d, p, face)) = best {
                let tuple = self.tuple_from_slots(&p, &face.slot_to_index);
                let t = self.tuple_to_qpoint(&tuple);
                return Ok(Retraction { point: p, tuple: t, dist: d });
            }
        }
        let (t, _) = self.alternating(w, 8, 80);
        let p = self.xi(&t)?;
        let d = dist(w, &p);
        Ok(Retraction { point: p, tuple: t, dist: d })
    }

    /// Distance from `w` to the image cone.
    pub fn dist_to_cone(&self, w: &[f64]) -> Result<f64> {
        Ok(self.retract(w)?.dist)
    }

    /// Distance from `w` to the closure of one face: scan the face and every
    /// face of its boundary, keeping feasible span projections.
    pub fn dist_to_face_closure(&self, w: &[f64], id: usize) -> Result<f64> {
        let complex = self
            .complex
            .as_ref()
            .ok_or_else(|| Error::EnumerationBound("no face complex for this spec".into()))?;
        let feas_tol = FACE_TOL * norm(w).max(1.0);
        let mut best = f64::INFINITY;
        for g in complex.closure_of(id) {
            let face = complex.face(g);
            let p = face.project(w);
            if self.closure_feasible(&p, face, feas_tol) {
                best = best.min(dist(w, &p));
            }
        }
        Ok(best)
    }

    /// Distance from `w` to the k-skeleton (union of the closed k-faces);
    /// infinite when there are no k-dimensional faces.
    pub fn dist_to_skeleton(&self, w: &[f64], k: usize) -> Result<f64> {
        let complex = self
            .complex
            .as_ref()
            .ok_or_else(|| Error::EnumerationBound("no face complex for this spec".into()))?;
        let mut best = f64::INFINITY;
        for face in complex.faces.iter().filter(|f| f.dim == k) {
            best = best.min(self.dist_to_face_closure(w, face.id)?);
        }
        Ok(best)
    }

    /// Orthogonal projection onto the span of a face (the map the stage
    /// construction must reproduce on the inner tube).
    pub fn project_to_face(&self, w: &[f64], id: usize) -> Result<Vec<f64>> {
        let complex = self
            .complex
            .as_ref()
            .ok_or_else(|| Error::EnumerationBound("no face complex for this spec".into()))?;
        Ok(complex.face(id).project(w))
    }

    /// Face id containing the cone point `w`.
    pub fn face_of(&self, w: &[f64]) -> Result<usize> {
        let complex = self
            .complex
            .as_ref()
            .ok_or_else(|| Error::EnumerationBound("no face complex for this spec".into()))?;
        let scale = norm(w).max(1.0);
        let (t, res) = self.decode_with_residual(w)?;
        if res > 10.0 * DECODE_TOL * scale {
            return Err(Error::Domain(format!("point is {res:.3e} away from the cone")));
        }
        let sig = self.signature_of_tuple(&t, FACE_TOL * scale);
        let canon = faces::canonical_signature(&sig, self.spec.q);
        complex
            .lookup(&canon)
            .ok_or_else(|| Error::Domain("signature not in the enumerated complex".into()))
    }

    /// Per-block rank pattern of a tuple's projections.
    pub fn signature_of_tuple(&self, t: &QPoint, tol: f64) -> Signature {
        self.spec
            .dirs
            .iter()
            .map(|e| {
                let vals: Vec<f64> = t
                    .points
                    .iter()
                    .map(|p| p.iter().zip(e).map(|(a, b)| a * b).sum::<f64>())
                    .collect();
                faces::rank_pattern(&vals, tol)
            })
            .collect()
    }

    /// Minimum image-distance/metric ratio over random pairs; its reciprocal
    /// is the measured Lipschitz constant of the inverse on the cone.
    /// Reported, never asserted.
    pub fn measured_inverse_lipschitz(&self, samples: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut min_ratio = f64::INFINITY;
        for _ in 0..samples {
            let (s, t) = (self.random_qpoint(&mut rng), self.random_qpoint(&mut rng));
            let g = qspace::metric_g(&s, &t)?;
            if g < 1e-9 {
                continue;
            }
            let d = dist(&self.xi(&s)?, &self.xi(&t)?);
            min_ratio = min_ratio.min(d / g);
        }
        Ok(1.0 / min_ratio)
    }

    pub fn random_qpoint(&self, rng: &mut impl Rng) -> QPoint {
        let pts = (0..self.spec.q)
            .map(|_| (0..self.spec.n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        QPoint::new(self.spec.n, pts).unwrap()
    }

    fn check_len(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.spec.big_n() {
            return Err(Error::DimensionMismatch { expected: self.spec.big_n(), got: w.len() });
        }
        Ok(())
    }

    /// Least-squares tuple recovery given per-block slot assignments.
    fn tuple_from_slots(&self, w: &[f64], slot_to_index: &[Vec<usize>]) -> Vec<f64> {
        let (q, n) = (self.spec.q, self.spec.n);
        let mut tuple = vec![0.0; q * n];
        for i in 0..q {
            let mut rhs = DVector::zeros(n);
            for (l, e) in self.spec.dirs.iter().enumerate() {
                // Slot of index i in block l.
                let s = slot_to_index[l].iter().position(|&x| x == i).unwrap();
                let c = w[l * q + s] / self.spec.scale;
                for d in 0..n {
                    rhs[d] += c * e[d];
                }
            }
            let p = &self.gram_inv * rhs;
            for d in 0..n {
                tuple[i * n + d] = p[d];
            }
        }
        tuple
    }

    fn tuple_to_qpoint(&self, tuple: &[f64]) -> QPoint {
        let (q, n) = (self.spec.q, self.spec.n);
        let pts = (0..q).map(|i| tuple[i * n..(i + 1) * n].to_vec()).collect();
        let mut t = QPoint::new(n, pts).unwrap();
        t.canonicalize();
        t
    }

    /// Does the span point satisfy the face's weak order constraints?
    fn closure_feasible(&self, p: &[f64], face: &Face, tol: f64) -> bool {
        let q = self.spec.q;
        for (l, ranks) in face.signature.iter().enumerate() {
            let block = &p[l * q..(l + 1) * q];
            // Slots are ordered by ascending rank; strict steps must not
            // invert beyond tolerance.
            for s in 1..q {
                let (i_prev, i_cur) = (face.slot_to_index[l][s - 1], face.slot_to_index[l][s]);
                if ranks[i_cur] != ranks[i_prev] && block[s] - block[s - 1] < -tol {
                    return false;
                }
            }
        }
        true
    }

    /// Alternating least squares: freeze per-block sort assignments, solve
    /// for the tuple, re-sort; multistart over perturbed initializations.
    /// Deterministic for fixed input.
    fn alternating(&self, w: &[f64], restarts: usize, iters: usize) -> (QPoint, f64) {
        let (q, n) = (self.spec.q, self.spec.n);
        let mut rng = ChaCha8Rng::seed_from_u64(0x0DEC0DE);
        let scale = norm(w).max(1.0);

        let slot_read: Vec<Vec<usize>> = (0..self.spec.h()).map(|_| (0..q).collect()).collect();
        let base = self.tuple_from_slots(w, &slot_read);

        let mut best: Option<(f64, QPoint)> = None;
        for r in 0..restarts {
            let mut tuple = base.clone();
            if r > 0 {
                for x in tuple.iter_mut() {
                    *x += rng.random_range(-0.3..0.3) * scale;
                }
            }
            let mut prev = f64::INFINITY;
            for _ in 0..iters {
                // Sort assignment induced by the current tuple.
                let slots: Vec<Vec<usize>> = self
                    .spec
                    .dirs
                    .iter()
                    .map(|e| {
                        let vals: Vec<f64> = (0..q)
                            .map(|i| (0..n).map(|d| tuple[i * n + d] * e[d]).sum())
                            .collect();
                        let mut order: Vec<usize> = (0..q).collect();
                        order.sort_by(|&a, &b| {
                            vals[a].partial_cmp(&vals[b]).unwrap().then(a.cmp(&b))
                        });
                        order
                    })
                    .collect();
                tuple = self.tuple_from_slots(w, &slots);
                let t = self.tuple_to_qpoint(&tuple);
                let res = dist(&self.xi(&t).unwrap(), w);
                if prev - res < 1e-14 * scale {
                    break;
                }
                prev = res;
            }
            let t = self.tuple_to_qpoint(&tuple);
            let res = dist(&self.xi(&t).unwrap(), w);
            if best.as_ref().map_or(true, |(br, _)| res < *br) {
                best = Some((res, t));
            }
        }
        let (res, t) = best.unwrap();
        (t, res)
    }

    /// Reject direction sets that fail to separate distinct multisets,
    /// including coordinate-exchange collisions that share all marginals of
    /// a sub-basis.
    fn validate_injectivity(&self, samples: usize, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (q, n) = (self.spec.q, self.spec.n);
        for k in 0..samples {
            let s = self.random_qpoint(&mut rng);
            let t = if q >= 2 && k % 2 == 0 {
                // Swap a coordinate prefix between two points: same coordinate
                // multiset, generically different point multiset.
                let mut pts = s.points.clone();
                let cut = 1 + (k / 2) % n.max(1);
                for d in 0..cut.min(n) {
                    let tmp = pts[0][d];
                    pts[0][d] = pts[1][d];
                    pts[1][d] = tmp;
                }
                QPoint::new(n, pts).unwrap()
            } else {
                self.random_qpoint(&mut rng)
            };
            let g = qspace::metric_g(&s, &t)?;
            if g > 1e-6 {
                let d = dist(&self.xi(&s)?, &self.xi(&t)?);
                if d <= 1e-12 {
                    return Err(Error::Geometry(format!(
                        "direction set is not injective: metric distance {g:.3e} \
                         collapses to image distance {d:.3e}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Result of the nearest-point retraction.
#[derive(Debug, Clone)]
pub struct Retraction {
    /// The retracted point on the cone.
    pub point: Vec<f64>,
    /// Its decoded tuple.
    pub tuple: QPoint,
    /// Distance from the query to the cone.
    pub dist: f64,
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lmap_identity_pair() {
        let emb = Embedding::line_pair();
        let w = emb.lmap(&[vec![3.0], vec![5.0]]).unwrap();
        assert_eq!(w, vec![3.0, 5.0]);
        // Homogeneity.
        let w2 = emb.lmap(&[vec![6.0], vec![10.0]]).unwrap();
        assert_eq!(w2, vec![6.0, 10.0]);
        // Zero maps to zero.
        assert_eq!(emb.lmap(&[vec![0.0], vec![0.0]]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn omap_sorts_blocks_and_is_short() {
        let emb = Embedding::line_pair();
        assert_eq!(emb.omap(&[5.0, 3.0]), vec![3.0, 5.0]);
        assert_eq!(emb.omap(&[3.0, 5.0]), vec![3.0, 5.0]);
        // |O(w) - O(z)| <= |w - z| on random pairs.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let emb3 = Embedding::standard(3, 1).unwrap();
        for _ in 0..500 {
            let w: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let z: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            assert!(dist(&emb3.omap(&w), &emb3.omap(&z)) <= dist(&w, &z) + 1e-12);
        }
    }

    #[test]
    fn xi_is_permutation_invariant_bit_exact() {
        let emb = Embedding::standard(3, 2).unwrap();
        let a = QPoint::new(2, vec![vec![0.3, -0.7], vec![-0.1, 0.2], vec![0.9, 0.4]]).unwrap();
        let b = QPoint::new(2, vec![vec![0.9, 0.4], vec![0.3, -0.7], vec![-0.1, 0.2]]).unwrap();
        assert_eq!(emb.xi(&a).unwrap(), emb.xi(&b).unwrap());
    }

    #[test]
    fn xi_of_collapsed_point_is_zero() {
        let emb = Embedding::standard(2, 2).unwrap();
        let t = QPoint::splat(2, vec![0.0, 0.0]);
        assert_eq!(emb.xi(&t).unwrap(), vec![0.0; emb.spec().big_n()]);
    }

    #[test]
    fn xi_is_one_lipschitz() {
        let emb = Embedding::standard(2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..2000 {
            let s = emb.random_qpoint(&mut rng);
            let t = emb.random_qpoint(&mut rng);
            let g = qspace::metric_g(&s, &t).unwrap();
            let d = dist(&emb.xi(&s).unwrap(), &emb.xi(&t).unwrap());
            assert!(d <= g + 1e-9, "image distance {d} exceeds metric {g}");
        }
    }

    #[test]
    fn decode_roundtrip() {
        for (q, n) in [(2usize, 1usize), (2, 2), (3, 1), (2, 3)] {
            let emb = Embedding::standard(q, n).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            for _ in 0..200 {
                let t = emb.random_qpoint(&mut rng);
                let w = emb.xi(&t).unwrap();
                let back = emb.decode(&w).unwrap();
                let g = qspace::metric_g(&t, &back).unwrap();
                assert!(g <= 1e-6, "(q={q}, n={n}): roundtrip error {g}");
            }
        }
    }

    #[test]
    fn decode_fixed_cases() {
        let emb = Embedding::line_pair();
        let t = emb.decode(&[3.0, 5.0]).unwrap();
        assert_eq!(t.canonical().points, vec![vec![3.0], vec![5.0]]);
        let z = emb.decode(&[0.0, 0.0]).unwrap();
        assert_eq!(z.points, vec![vec![0.0], vec![0.0]]);
    }

    #[test]
    fn retract_is_identity_on_cone() {
        let emb = Embedding::standard(2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let t = emb.random_qpoint(&mut rng);
            let w = emb.xi(&t).unwrap();
            let r = emb.retract(&w).unwrap();
            assert!(dist(&r.point, &w) <= 1e-9, "retraction moved a cone point");
        }
    }

    #[test]
    fn retract_nearest_point_pinned() {
        // Brute-force oracle over the half-plane {a <= b}: the nearest point
        // of the cone to (5,3) is the diagonal projection (4,4), not the
        // sorted vector (3,5).
        let emb = Embedding::line_pair();
        let mut best = (f64::INFINITY, 0.0, 0.0);
        let grid = 400;
        for i in 0..=grid {
            for j in 0..=grid {
                let a = 2.0 + 4.0 * i as f64 / grid as f64;
                let b = a + 4.0 * j as f64 / grid as f64;
                let d2 = (a - 5.0) * (a - 5.0) + (b - 3.0) * (b - 3.0);
                if d2 < best.0 {
                    best = (d2, a, b);
                }
            }
        }
        assert!((best.1 - 4.0).abs() < 0.02 && (best.2 - 4.0).abs() < 0.02);

        let r = emb.retract(&[5.0, 3.0]).unwrap();
        assert_abs_diff_eq!(r.point[0], 4.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.point[1], 4.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.dist, 2.0f64.sqrt(), epsilon = 1e-9);

        // Idempotence.
        let rr = emb.retract(&r.point).unwrap();
        assert!(dist(&rr.point, &r.point) <= 1e-9);
    }

    #[test]
    fn face_of_minimal_spec() {
        let emb = Embedding::line_pair();
        let complex = emb.complex().unwrap();
        let diag = emb.face_of(&[1.0, 1.0]).unwrap();
        let open = emb.face_of(&[1.0, 2.0]).unwrap();
        assert_ne!(diag, open);
        assert_eq!(complex.face(diag).dim, 1);
        assert_eq!(complex.face(open).dim, 2);
        // Zero lies on the minimal-dimension face.
        assert_eq!(emb.face_of(&[0.0, 0.0]).unwrap(), diag);
        // Perturbations below tolerance keep the open face id.
        let w = [1.0, 2.0 + 0.4 * FACE_TOL];
        assert_eq!(emb.face_of(&w).unwrap(), open);
    }

    #[test]
    fn face_partition_on_samples() {
        let emb = Embedding::standard(2, 2).unwrap();
        let complex = emb.complex().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..500 {
            let t = emb.random_qpoint(&mut rng);
            let w = emb.xi(&t).unwrap();
            let id = emb.face_of(&w).unwrap();
            assert!(id < complex.faces.len());
            // Cone property: positive scaling preserves the face.
            let lam = rng.random_range(0.1..5.0);
            let scaled: Vec<f64> = w.iter().map(|x| x * lam).collect();
            assert_eq!(emb.face_of(&scaled).unwrap(), id);
        }
    }
}
