//! Exact solvers for the square linear assignment problem on small dense
//! f64 cost matrices.
//!
//! The shortest-augmenting-path form of the Hungarian algorithm (O(n^3))
//! provides optimal values; a branch-and-bound pass recovers the
//! lexicographically smallest optimal permutation when a canonical matching
//! is needed (tie-breaking for subgradient selection and serialization).

/// Dense square cost matrix in row-major order.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    n: usize,
    costs: Vec<f64>,
}

impl CostMatrix {
    pub fn new(n: usize, costs: Vec<f64>) -> Self {
        assert_eq!(costs.len(), n * n, "cost matrix must be n x n");
        Self { n, costs }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut costs = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                costs.push(f(i, j));
            }
        }
        Self { n, costs }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.costs[i * self.n + j]
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Optimal assignment: `perm[i]` is the column matched to row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub perm: Vec<usize>,
    pub value: f64,
}

/// Shortest-augmenting-path Hungarian algorithm.
///
/// Returns an optimal row-to-column permutation and its total cost.
pub fn solve(c: &CostMatrix) -> Assignment {
    let n = c.n;
    if n == 0 {
        return Assignment { perm: Vec::new(), value: 0.0 };
    }
    let inf = f64::INFINITY;
    // Dual potentials and matching, with a virtual 0-th column.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1]; // p[j] = row matched to column j (1-based)
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = c.at(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut perm = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            perm[p[j] - 1] = j - 1;
        }
    }
    let value = perm.iter().enumerate().map(|(i, &j)| c.at(i, j)).sum();
    Assignment { perm, value }
}

/// Lexicographically smallest permutation whose cost is within `tol` of the
/// optimum. Depth-first search over rows with a per-row greedy lower bound;
/// column indices are tried in increasing order so the first accepted leaf is
/// the lexicographic minimum.
pub fn solve_lex(c: &CostMatrix, tol: f64) -> Assignment {
    let n = c.n;
    let opt = solve(c);
    if n <= 1 {
        return opt;
    }
    // Lower bound helper: sum over unassigned rows of their cheapest free column.
    let bound = |row: usize, used: &[bool]| -> f64 {
        let mut b = 0.0;
        for i in row..n {
            let mut m = f64::INFINITY;
            for j in 0..n {
                if !used[j] {
                    m = m.min(c.at(i, j));
                }
            }
            b += m;
        }
        b
    };

    let budget = opt.value + tol;
    let mut used = vec![false; n];
    let mut choice = vec![0usize; n];
    let mut best: Option<Vec<usize>> = None;

    fn dfs(
        c: &CostMatrix,
        row: usize,
        acc: f64,
        budget: f64,
        used: &mut [bool],
        choice: &mut [usize],
        best: &mut Option<Vec<usize>>,
        bound: &impl Fn(usize, &[bool]) -> f64,
    ) -> bool {
        let n = c.n();
        if row == n {
            *best = Some(choice.to_vec());
            return true;
        }
        for j in 0..n {
            if used[j] {
                continue;
            }
            let acc2 = acc + c.at(row, j);
            used[j] = true;
            let feasible = acc2 + bound(row + 1, used) <= budget;
            if feasible {
                choice[row] = j;
                if dfs(c, row + 1, acc2, budget, used, choice, best, bound) {
                    used[j] = false;
                    return true;
                }
            }
            used[j] = false;
        }
        false
    }

    let found = dfs(c, 0, 0.0, budget, &mut used, &mut choice, &mut best, &bound);
    if let (true, Some(perm)) = (found, best) {
        let value = perm.iter().enumerate().map(|(i, &j)| c.at(i, j)).sum();
        Assignment { perm, value }
    } else {
        opt
    }
}

/// Exhaustive minimum over all permutations. Only for tests and small n.
pub fn brute_force(c: &CostMatrix) -> Assignment {
    let n = c.n;
    let mut idx: Vec<usize> = (0..n).collect();
    let mut best = Assignment { perm: idx.clone(), value: f64::INFINITY };
    permute(&mut idx, 0, &mut |perm| {
        let value: f64 = perm.iter().enumerate().map(|(i, &j)| c.at(i, j)).sum();
        if value < best.value {
            best = Assignment { perm: perm.to_vec(), value };
        }
    });
    best
}

fn permute(idx: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == idx.len() {
        visit(idx);
        return;
    }
    for i in k..idx.len() {
        idx.swap(k, i);
        permute(idx, k + 1, visit);
        idx.swap(k, i);
    }
}
