//! Polynomial functions and low-degree differential forms on R^d, with
//! simplex quadrature. Enough for boundary-pairing residuals and slice
//! identities; not a general exterior calculus.

/// Multivariate polynomial as a monomial list.
#[derive(Debug, Clone)]
pub struct Poly {
    pub dim: usize,
    /// (coefficient, exponents per coordinate)
    pub terms: Vec<(f64, Vec<u32>)>,
}

impl Poly {
    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: Vec::new() }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self { dim, terms: vec![(c, vec![0; dim])] }
    }

    pub fn monomial(dim: usize, c: f64, exps: Vec<u32>) -> Self {
        assert_eq!(exps.len(), dim);
        Self { dim, terms: vec![(c, exps)] }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| {
                c * e.iter().enumerate().map(|(i, &p)| x[i].powi(p as i32)).product::<f64>()
            })
            .sum()
    }

    pub fn partial(&self, i: usize) -> Poly {
        let terms = self
            .terms
            .iter()
            .filter(|(_, e)| e[i] > 0)
            .map(|(c, e)| {
                let mut e2 = e.clone();
                e2[i] -= 1;
                (c * e[i] as f64, e2)
            })
            .collect();
        Poly { dim: self.dim, terms }
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(_, e)| e.iter().sum()).max().unwrap_or(0)
    }
}

/// A 1-form sum_i comps[i] dx_i.
#[derive(Debug, Clone)]
pub struct Form1 {
    pub comps: Vec<Poly>,
}

/// A 2-form sum_{i<j} comps[(i,j)] dx_i ∧ dx_j.
#[derive(Debug, Clone)]
pub struct Form2 {
    pub dim: usize,
    pub comps: Vec<(usize, usize, Poly)>,
}

impl Form1 {
    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    /// Exterior derivative.
    pub fn d(&self) -> Form2 {
        let dim = self.dim();
        let mut comps = Vec::new();
        for i in 0..dim {
            for j in (i + 1)..dim {
                let mut p = self.comps[j].partial(i);
                let q = self.comps[i].partial(j);
                for (c, e) in q.terms {
                    p.terms.push((-c, e));
                }
                comps.push((i, j, p));
            }
        }
        Form2 { dim, comps }
    }

    /// Integrate over an oriented segment with multiplicity, by Gauss-Legendre
    /// quadrature exact through degree `2*GAUSS_PTS-1`.
    pub fn integrate_segment(&self, a: &[f64], b: &[f64], mult: f64) -> f64 {
        // 3-point Gauss: exact for polynomials of degree 5.
        const NODES: [f64; 3] = [-0.774596669241483, 0.0, 0.774596669241483];
        const WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
        let dim = self.dim();
        let mut acc = 0.0;
        for (t, w) in NODES.iter().zip(WEIGHTS) {
            let s = 0.5 * (1.0 + t);
            let x: Vec<f64> = (0..dim).map(|d| a[d] + s * (b[d] - a[d])).collect();
            let mut val = 0.0;
            for d in 0..dim {
                val += self.comps[d].eval(&x) * (b[d] - a[d]);
            }
            acc += w * 0.5 * val;
        }
        mult * acc
    }
}

/// Degree-2-exact 3-point (midedge) quadrature on a triangle in R^d given by
/// three vertices; returns the integral of `f` over the flat 2-simplex area
/// measure times the provided area.
pub fn triangle_quadrature(
    v0: &[f64],
    v1: &[f64],
    v2: &[f64],
    area: f64,
    f: impl Fn(&[f64]) -> f64,
) -> f64 {
    let dim = v0.len();
    let mid = |a: &[f64], b: &[f64]| -> Vec<f64> {
        (0..dim).map(|d| 0.5 * (a[d] + b[d])).collect()
    };
    let pts = [mid(v0, v1), mid(v1, v2), mid(v2, v0)];
    area / 3.0 * pts.iter().map(|p| f(p)).sum::<f64>()
}

impl Form2 {
    /// Pair with an oriented flat 2-simplex of multiplicity `mult`: integrate
    /// sum c_ij(x) <dx_i ∧ dx_j, u ∧ v> where u, v span the simplex.
    pub fn integrate_simplex(&self, v0: &[f64], v1: &[f64], v2: &[f64], mult: f64) -> f64 {
        let dim = self.dim;
        let u: Vec<f64> = (0..dim).map(|d| v1[d] - v0[d]).collect();
        let v: Vec<f64> = (0..dim).map(|d| v2[d] - v0[d]).collect();
        let mut acc = 0.0;
        for (i, j, p) in &self.comps {
            // Constant wedge component over the flat simplex; the 1/2 is the
            // reference-simplex area factor.
            let wedge = 0.5 * (u[*i] * v[*j] - u[*j] * v[*i]);
            if wedge == 0.0 {
                continue;
            }
            let avg = triangle_quadrature(v0, v1, v2, 1.0, |x| p.eval(x));
            acc += wedge * avg;
        }
        mult * acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn poly_eval_and_partial() {
        // p = 3 x^2 y + y
        let mut p = Poly::monomial(2, 3.0, vec![2, 1]);
        p.terms.push((1.0, vec![0, 1]));
        assert_abs_diff_eq!(p.eval(&[2.0, 5.0]), 65.0);
        let px = p.partial(0);
        assert_abs_diff_eq!(px.eval(&[2.0, 5.0]), 60.0);
        let py = p.partial(1);
        assert_abs_diff_eq!(py.eval(&[2.0, 5.0]), 13.0);
    }

    #[test]
    fn stokes_on_one_flat_triangle() {
        // For a single oriented 2-simplex, <T, dω> equals the boundary line
        // integral of ω; with degree <= 2 coefficients both quadratures are
        // exact, so the identity holds to roundoff.
        let omega = Form1 {
            comps: vec![
                Poly::monomial(3, 1.0, vec![0, 2, 0]),
                Poly::monomial(3, -2.0, vec![1, 0, 1]),
                Poly::monomial(3, 0.5, vec![1, 1, 0]),
            ],
        };
        let d = omega.d();
        let v0 = [0.0, 0.0, 0.0];
        let v1 = [1.0, 0.2, -0.3];
        let v2 = [0.4, 1.1, 0.6];
        let lhs = d.integrate_simplex(&v0, &v1, &v2, 1.0);
        let rhs = omega.integrate_segment(&v0, &v1, 1.0)
            + omega.integrate_segment(&v1, &v2, 1.0)
            + omega.integrate_segment(&v2, &v0, 1.0);
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-13);
    }
}
