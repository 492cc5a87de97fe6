//! Face decomposition of the image cone.
//!
//! Points of the cone are grouped by the per-block order/equality pattern of
//! their preimages under the linear map: each realizable pattern is an open
//! convex cone (a face), patterns related by a relabeling of the underlying
//! tuple have the same image under blockwise sorting and are merged. Faces
//! partition the cone, are closed under positive scaling, and their closures
//! decompose into lower-dimensional faces.

use std::collections::HashMap;

use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOutcome};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::EmbeddingSpec;

/// Slack used to encode strict inequalities in the realizability LP.
pub const STRICT_SLACK: f64 = 1e-6;

/// Hard cap on LP feasibility calls during enumeration.
const LP_BUDGET: usize = 200_000;

/// Per-block order/equality pattern: `ranks[i]` is the ascending group index
/// of tuple entry `i` in this block (group indices are contiguous from 0).
pub type BlockSig = Vec<usize>;

/// One pattern per block.
pub type Signature = Vec<BlockSig>;

/// A face of the cone: an open convex cone of the stated dimension.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Face {
    pub id: usize,
    pub dim: usize,
    /// Canonical signature (lexicographically smallest over tuple relabelings).
    pub signature: Signature,
    /// A point in the open face.
    pub representative: Vec<f64>,
    /// Orthonormal basis of the linear span of the face in R^N.
    pub basis: Vec<Vec<f64>>,
    /// Per block: slot -> tuple index in the face's sorted order.
    pub slot_to_index: Vec<Vec<usize>>,
}

impl Face {
    /// Orthogonal projection of `w` onto the span of this face.
    pub fn project(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; w.len()];
        for b in &self.basis {
            let c: f64 = b.iter().zip(w).map(|(x, y)| x * y).sum();
            for (o, x) in out.iter_mut().zip(b) {
                *o += c * x;
            }
        }
        out
    }
}

/// The full face decomposition for one embedding spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConeComplex {
    pub spec: EmbeddingSpec,
    pub faces: Vec<Face>,
    #[serde(skip)]
    by_signature: HashMap<Signature, usize>,
}

impl ConeComplex {
    pub fn face(&self, id: usize) -> &Face {
        &self.faces[id]
    }

    /// Is face `a` contained in the closure of face `b`? Combinatorially:
    /// some relabeling of the tuple collapses b's strict inequalities onto
    /// a's pattern while preserving b's equalities and never reversing an
    /// order.
    pub fn in_closure(&self, a: usize, b: usize) -> bool {
        if a == b {
            return true;
        }
        let (fa, fb) = (&self.faces[a], &self.faces[b]);
        if fa.dim >= fb.dim {
            return false;
        }
        let q = fa.signature[0].len();
        let mut idx: Vec<usize> = (0..q).collect();
        let mut found = false;
        permute_indices(&mut idx, 0, &mut |perm| {
            if found {
                return;
            }
            let ok = fa.signature.iter().zip(&fb.signature).all(|(ra, rb)| {
                (0..q).all(|i| {
                    (0..q).all(|j| {
                        let (bi, bj) = (rb[perm[i]], rb[perm[j]]);
                        let (ai, aj) = (ra[i], ra[j]);
                        if bi == bj {
                            ai == aj
                        } else if bi < bj {
                            ai <= aj
                        } else {
                            ai >= aj
                        }
                    })
                })
            });
            if ok {
                found = true;
            }
        });
        found
    }

    /// Ids of all faces lying in the closure of `id` (including itself).
    pub fn closure_of(&self, id: usize) -> Vec<usize> {
        (0..self.faces.len()).filter(|&a| self.in_closure(a, id)).collect()
    }

    pub fn lookup(&self, canonical: &Signature) -> Option<usize> {
        if self.by_signature.is_empty() && !self.faces.is_empty() {
            // Deserialized complexes arrive without the index; linear scan.
            return self.faces.iter().position(|f| &f.signature == canonical);
        }
        self.by_signature.get(canonical).copied()
    }

    pub fn top_dim(&self) -> usize {
        self.faces.iter().map(|f| f.dim).max().unwrap_or(0)
    }

    /// Faces of exactly dimension `k`.
    pub fn faces_of_dim(&self, k: usize) -> impl Iterator<Item = &Face> {
        self.faces.iter().filter(move |f| f.dim == k)
    }
}

/// All weak orderings (ordered set partitions) of `q` elements as rank
/// vectors. 3 for q=2, 13 for q=3.
pub fn weak_orderings(q: usize) -> Vec<BlockSig> {
    let mut out = Vec::new();
    let mut ranks = vec![0usize; q];
    gen_ranks(&mut ranks, 0, &mut out);
    out.sort();
    out
}

fn gen_ranks(ranks: &mut Vec<usize>, i: usize, out: &mut Vec<BlockSig>) {
    let q = ranks.len();
    if i == q {
        // Ranks must use a contiguous prefix 0..=max with every value present.
        let mx = *ranks.iter().max().unwrap();
        let mut seen = vec![false; mx + 1];
        for &r in ranks.iter() {
            seen[r] = true;
        }
        if seen.iter().all(|&s| s) {
            out.push(ranks.clone());
        }
        return;
    }
    for r in 0..q {
        ranks[i] = r;
        gen_ranks(ranks, i + 1, out);
    }
}

/// Canonical form of a signature under simultaneous relabeling of the tuple
/// indices: the lexicographically smallest rank matrix over all permutations.
pub fn canonical_signature(sig: &Signature, q: usize) -> Signature {
    let mut best: Option<Signature> = None;
    let mut idx: Vec<usize> = (0..q).collect();
    permute_indices(&mut idx, 0, &mut |perm| {
        let relabeled: Signature = sig
            .iter()
            .map(|block| perm.iter().map(|&p| block[p]).collect())
            .collect();
        match &best {
            Some(b) if *b <= relabeled => {}
            _ => best = Some(relabeled),
        }
    });
    best.unwrap()
}

fn permute_indices(idx: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == idx.len() {
        visit(idx);
        return;
    }
    for i in k..idx.len() {
        idx.swap(k, i);
        permute_indices(idx, k + 1, visit);
        idx.swap(k, i);
    }
}

struct Enumerator<'a> {
    spec: &'a EmbeddingSpec,
    orderings: Vec<BlockSig>,
    lp_calls: usize,
}

impl<'a> Enumerator<'a> {
    /// LP feasibility of a partial signature (first `sig.len()` blocks).
    fn feasible(&mut self, sig: &[BlockSig]) -> Result<Option<Vec<f64>>> {
        self.lp_calls += 1;
        if self.lp_calls > LP_BUDGET {
            return Err(Error::EnumerationBound(format!(
                "face enumeration exceeded {LP_BUDGET} LP feasibility checks"
            )));
        }
        let (q, n) = (self.spec.q, self.spec.n);
        let mut problem = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<_> = (0..q * n).map(|_| problem.add_var(0.0, (-1.0, 1.0))).collect();
        for (l, ranks) in sig.iter().enumerate() {
            let e = &self.spec.dirs[l];
            // Indices sorted ascending by (rank, index).
            let mut order: Vec<usize> = (0..q).collect();
            order.sort_by_key(|&i| (ranks[i], i));
            for w in order.windows(2) {
                let (i, j) = (w[0], w[1]);
                // Row: (P_j - P_i) . e_l
                let mut expr = microlp::LinearExpr::empty();
                for d in 0..n {
                    expr.add(vars[j * n + d], e[d]);
                    expr.add(vars[i * n + d], -e[d]);
                }
                if ranks[i] == ranks[j] {
                    problem.add_constraint(expr, ComparisonOp::Eq, 0.0);
                } else {
                    problem.add_constraint(expr, ComparisonOp::Ge, STRICT_SLACK);
                }
            }
        }
        match problem.solve() {
            Ok(SolveOutcome::Solution(s)) => {
                Ok(Some(vars.iter().map(|&v| s.var_value(v)).collect()))
            }
            Ok(SolveOutcome::Interrupted(_)) => {
                Err(Error::Geometry("LP solve interrupted".into()))
            }
            Err(microlp::Error::Infeasible) => Ok(None),
            Err(e) => Err(Error::Geometry(format!("LP solver failure: {e}"))),
        }
    }

    fn enumerate(&mut self) -> Result<Vec<(Signature, Vec<f64>)>> {
        let mut found: Vec<(Signature, Vec<f64>)> = Vec::new();
        let mut partial: Signature = Vec::new();
        self.dfs(&mut partial, &mut found)?;
        Ok(found)
    }

    fn dfs(
        &mut self,
        partial: &mut Signature,
        found: &mut Vec<(Signature, Vec<f64>)>,
    ) -> Result<()> {
        if partial.len() == self.spec.h() {
            if let Some(point) = self.feasible(partial)? {
                found.push((partial.clone(), point));
            }
            return Ok(());
        }
        let orderings = self.orderings.clone();
        for ord in orderings {
            partial.push(ord);
            if self.feasible(partial)?.is_some() {
                self.dfs(partial, found)?;
            }
            partial.pop();
        }
        Ok(())
    }
}

/// Enumerate the realizable signatures, merge those with a common sorted
/// image, and assemble the face complex.
pub fn face_decomposition(spec: &EmbeddingSpec) -> Result<ConeComplex> {
    let (q, h) = (spec.q, spec.h());
    if q > spec.max_enum_q || q * h > spec.max_enum_size {
        return Err(Error::EnumerationBound(format!(
            "face enumeration supports q <= {} and q*h <= {} (got q={q}, q*h={})",
            spec.max_enum_q,
            spec.max_enum_size,
            q * h
        )));
    }
    let orderings = weak_orderings(q);
    let mut enumerator = Enumerator { spec, orderings, lp_calls: 0 };
    let raw = enumerator.enumerate()?;

    // Group into orbits under tuple relabeling.
    let mut canonical_points: Vec<(Signature, Vec<f64>)> = Vec::new();
    let mut seen: HashMap<Signature, usize> = HashMap::new();
    for (sig, point) in raw {
        let canon = canonical_signature(&sig, q);
        if !seen.contains_key(&canon) {
            seen.insert(canon.clone(), canonical_points.len());
            // Re-solve on the canonical representative so the stored point
            // realizes the stored signature.
            let cpoint = if canon == sig {
                point
            } else {
                enumerator
                    .feasible(&canon)?
                    .ok_or_else(|| Error::Geometry("canonical signature infeasible".into()))?
            };
            canonical_points.push((canon, cpoint));
        }
    }

    // Deterministic face ordering: by (dim, signature).
    let mut faces: Vec<Face> = canonical_points
        .into_iter()
        .map(|(sig, point)| build_face(spec, sig, &point))
        .collect::<Result<_>>()?;
    faces.sort_by(|a, b| (a.dim, &a.signature).cmp(&(b.dim, &b.signature)));
    let mut by_signature = HashMap::new();
    for (id, f) in faces.iter_mut().enumerate() {
        f.id = id;
        by_signature.insert(f.signature.clone(), id);
    }
    Ok(ConeComplex { spec: spec.clone(), faces, by_signature })
}

fn build_face(spec: &EmbeddingSpec, signature: Signature, tuple: &[f64]) -> Result<Face> {
    let (q, n, h) = (spec.q, spec.n, spec.h());
    let nq = q * n;

    // Equality constraints of the signature as rows over tuple space.
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut slot_to_index: Vec<Vec<usize>> = Vec::with_capacity(h);
    for (l, ranks) in signature.iter().enumerate() {
        let e = &spec.dirs[l];
        let mut order: Vec<usize> = (0..q).collect();
        order.sort_by_key(|&i| (ranks[i], i));
        for w in order.windows(2) {
            let (i, j) = (w[0], w[1]);
            if ranks[i] == ranks[j] {
                let mut row = vec![0.0; nq];
                for d in 0..n {
                    row[j * n + d] += e[d];
                    row[i * n + d] -= e[d];
                }
                rows.push(row);
            }
        }
        slot_to_index.push(order);
    }

    // Nullspace of the equality rows = tuple-space directions inside the face.
    let null = if rows.is_empty() {
        DMatrix::identity(nq, nq)
    } else {
        let a = DMatrix::from_fn(rows.len(), nq, |r, c| rows[r][c]);
        nullspace(&a)
    };
    let dim = null.ncols();

    // Push the nullspace through the (permuted) linear map and orthonormalize.
    let mut images: Vec<Vec<f64>> = Vec::with_capacity(dim);
    for c in 0..dim {
        let p: Vec<f64> = (0..nq).map(|r| null[(r, c)]).collect();
        images.push(apply_lmap_with_slots(spec, &p, &slot_to_index));
    }
    let basis = orthonormalize(images, 1e-10);
    if basis.len() != dim {
        return Err(Error::Geometry(format!(
            "face span rank {} does not match equality-count dimension {dim}; \
             direction set may be degenerate",
            basis.len()
        )));
    }

    let representative = apply_lmap_with_slots(spec, tuple, &slot_to_index);
    Ok(Face { id: 0, dim, signature, representative, basis, slot_to_index })
}

/// L followed by the face's slot permutation (the sorted arrangement on this
/// face), so the output lies in R^N with blocks ordered as O would order them.
fn apply_lmap_with_slots(
    spec: &EmbeddingSpec,
    tuple: &[f64],
    slot_to_index: &[Vec<usize>],
) -> Vec<f64> {
    let (q, n) = (spec.q, spec.n);
    let mut out = vec![0.0; spec.big_n()];
    for (l, e) in spec.dirs.iter().enumerate() {
        for s in 0..q {
            let i = slot_to_index[l][s];
            let dot: f64 = (0..n).map(|d| tuple[i * n + d] * e[d]).sum();
            out[l * q + s] = spec.scale * dot;
        }
    }
    out
}

fn nullspace(a: &DMatrix<f64>) -> DMatrix<f64> {
    // Nullspace of A as the small-eigenvalue eigenvectors of A^T A.
    let gram = a.transpose() * a;
    let eig = gram.symmetric_eigen();
    let max_ev = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max).max(1.0);
    let tol = 1e-16 * a.ncols().max(a.nrows()) as f64 * max_ev + 1e-20;
    let null_idx: Vec<usize> =
        (0..eig.eigenvalues.len()).filter(|&i| eig.eigenvalues[i] <= tol).collect();
    DMatrix::from_fn(a.ncols(), null_idx.len(), |r, c| eig.eigenvectors[(r, null_idx[c])])
}

fn orthonormalize(vectors: Vec<Vec<f64>>, tol: f64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for mut v in vectors {
        for b in &basis {
            let c: f64 = b.iter().zip(&v).map(|(x, y)| x * y).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= c * bi;
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > tol {
            for vi in v.iter_mut() {
                *vi /= norm;
            }
            basis.push(v);
        }
    }
    basis
}

/// Rank pattern of a list of values with an absolute clustering tolerance:
/// values within `tol` of the previous sorted value share a group.
pub fn rank_pattern(values: &[f64], tol: f64) -> BlockSig {
    let q = values.len();
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
    let mut ranks = vec![0usize; q];
    let mut group = 0usize;
    for w in 0..q {
        if w > 0 && values[order[w]] - values[order[w - 1]] > tol {
            group += 1;
        }
        ranks[order[w]] = group;
    }
    ranks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::Embedding;

    #[test]
    fn weak_ordering_counts() {
        assert_eq!(weak_orderings(1).len(), 1);
        assert_eq!(weak_orderings(2).len(), 3);
        assert_eq!(weak_orderings(3).len(), 13);
    }

    #[test]
    fn q2_line_has_two_faces() {
        // q=2, n=1, h=1: the strict orderings merge into one open half-plane
        // face; the diagonal is the other.
        let emb = Embedding::line_pair();
        let complex = emb.complex().expect("complex for the minimal spec");
        assert_eq!(complex.faces.len(), 2);
        let dims: Vec<usize> = complex.faces.iter().map(|f| f.dim).collect();
        assert_eq!(dims, vec![1, 2]);
    }

    #[test]
    fn q3_line_face_lattice() {
        // q=3, n=1, h=1: 13 weak orderings merge under relabeling into the
        // three patterns a=b=c, a=b<c (with a<b=c), a<b<c.
        let spec = EmbeddingSpec::with_dirs(3, 1, vec![vec![1.0]], 1.0).unwrap();
        let complex = face_decomposition(&spec).unwrap();
        assert_eq!(complex.faces.len(), 4);
        let mut dims: Vec<usize> = complex.faces.iter().map(|f| f.dim).collect();
        dims.sort();
        assert_eq!(dims, vec![1, 2, 2, 3]);
    }

    #[test]
    fn rank_pattern_tolerance() {
        assert_eq!(rank_pattern(&[3.0, 1.0, 1.0 + 1e-12], 1e-9), vec![1, 0, 0]);
        assert_eq!(rank_pattern(&[3.0, 1.0, 2.0], 1e-9), vec![2, 0, 1]);
    }

    #[test]
    fn canonical_signature_merges_orbit() {
        // Signatures [a<b] and [b<a] are the same face after relabeling.
        let up = vec![vec![0usize, 1usize]];
        let down = vec![vec![1usize, 0usize]];
        assert_eq!(canonical_signature(&up, 2), canonical_signature(&down, 2));
    }
}
