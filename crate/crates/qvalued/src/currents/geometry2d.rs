//! Exact planar clipping helpers: convex polygon vs half-plane, rectangle,
//! and disk intersection areas. Used to distribute simplex masses over grid
//! cells and cylinders so that excess measures are additive to roundoff.

/// Signed area of a polygon (counterclockwise positive).
pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        acc += p[0] * q[1] - p[1] * q[0];
    }
    0.5 * acc
}

/// Clip a convex polygon by the half-plane {x : n.x <= c} (Sutherland-Hodgman
/// step). The input must be convex and counterclockwise.
pub fn clip_halfplane(poly: &[[f64; 2]], normal: [f64; 2], c: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    let n = poly.len();
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let dp = normal[0] * p[0] + normal[1] * p[1] - c;
        let dq = normal[0] * q[0] + normal[1] * q[1] - c;
        if dp <= 0.0 {
            out.push(p);
        }
        if (dp < 0.0 && dq > 0.0) || (dp > 0.0 && dq < 0.0) {
            let t = dp / (dp - dq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

/// Clip a convex polygon to an axis-aligned rectangle.
pub fn clip_rect(poly: &[[f64; 2]], x0: f64, x1: f64, y0: f64, y1: f64) -> Vec<[f64; 2]> {
    let mut p = poly.to_vec();
    p = clip_halfplane(&p, [1.0, 0.0], x1);
    p = clip_halfplane(&p, [-1.0, 0.0], -x0);
    p = clip_halfplane(&p, [0.0, 1.0], y1);
    p = clip_halfplane(&p, [0.0, -1.0], -y0);
    p
}

/// Area of the intersection of a (convex or star-shaped w.r.t. its interior)
/// counterclockwise polygon with the disk B_r(center). Exact: decomposes the
/// polygon into origin-fans and accumulates triangle pieces inside the circle
/// and circular-sector pieces outside.
pub fn polygon_disk_area(poly: &[[f64; 2]], center: [f64; 2], r: f64) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let p = [poly[i][0] - center[0], poly[i][1] - center[1]];
        let q = [poly[(i + 1) % n][0] - center[0], poly[(i + 1) % n][1] - center[1]];
        acc += fan_segment_area(p, q, r);
    }
    acc
}

/// Signed area of (triangle 0-p-q) ∩ (disk of radius r at 0).
fn fan_segment_area(p: [f64; 2], q: [f64; 2], r: f64) -> f64 {
    let cross = p[0] * q[1] - p[1] * q[0];
    if cross == 0.0 {
        return 0.0;
    }
    // Intersections of segment p->q with the circle: solve |p + t(q-p)|^2 = r^2.
    let d = [q[0] - p[0], q[1] - p[1]];
    let a = d[0] * d[0] + d[1] * d[1];
    let b = 2.0 * (p[0] * d[0] + p[1] * d[1]);
    let c = p[0] * p[0] + p[1] * p[1] - r * r;
    let mut ts = vec![0.0];
    if a > 0.0 {
        let disc = b * b - 4.0 * a * c;
        if disc > 0.0 {
            let sq = disc.sqrt();
            for t in [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)] {
                if t > 1e-14 && t < 1.0 - 1e-14 {
                    ts.push(t);
                }
            }
        }
    }
    ts.push(1.0);
    ts.sort_by(|x, y| x.partial_cmp(y).unwrap());

    let mut acc = 0.0;
    for w in ts.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        if t1 - t0 <= 1e-15 {
            continue;
        }
        let tm = 0.5 * (t0 + t1);
        let m = [p[0] + tm * d[0], p[1] + tm * d[1]];
        let a0 = [p[0] + t0 * d[0], p[1] + t0 * d[1]];
        let a1 = [p[0] + t1 * d[0], p[1] + t1 * d[1]];
        if m[0] * m[0] + m[1] * m[1] <= r * r {
            // Straight piece inside: triangle (0, a0, a1).
            acc += 0.5 * (a0[0] * a1[1] - a0[1] * a1[0]);
        } else {
            // Piece outside: circular sector between the two directions.
            let th0 = a0[1].atan2(a0[0]);
            let th1 = a1[1].atan2(a1[0]);
            let mut dth = th1 - th0;
            while dth > std::f64::consts::PI {
                dth -= 2.0 * std::f64::consts::PI;
            }
            while dth < -std::f64::consts::PI {
                dth += 2.0 * std::f64::consts::PI;
            }
            acc += 0.5 * r * r * dth;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const PI: f64 = std::f64::consts::PI;

    #[test]
    fn clip_triangle_to_rect() {
        // The unit square lies entirely inside {x >= 0, y >= 0, x + y <= 2}.
        let tri = [[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]];
        let clipped = clip_rect(&tri, 0.0, 1.0, 0.0, 1.0);
        assert_abs_diff_eq!(polygon_area(&clipped), 1.0, epsilon = 1e-12);

        // A half-covered square.
        let clipped = clip_rect(&tri, 1.0, 2.0, 0.0, 1.0);
        assert_abs_diff_eq!(polygon_area(&clipped), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn square_fully_inside_disk() {
        let sq = [[-0.1, -0.1], [0.1, -0.1], [0.1, 0.1], [-0.1, 0.1]];
        assert_abs_diff_eq!(polygon_disk_area(&sq, [0.0, 0.0], 1.0), 0.04, epsilon = 1e-12);
    }

    #[test]
    fn big_square_covers_disk() {
        let sq = [[-5.0, -5.0], [5.0, -5.0], [5.0, 5.0], [-5.0, 5.0]];
        assert_abs_diff_eq!(polygon_disk_area(&sq, [0.0, 0.0], 1.0), PI, epsilon = 1e-10);
        // Off-center disk still inside.
        assert_abs_diff_eq!(polygon_disk_area(&sq, [1.5, -2.0], 0.5), 0.25 * PI, epsilon = 1e-10);
    }

    #[test]
    fn half_plane_square_gets_half_disk() {
        let sq = [[0.0, -5.0], [5.0, -5.0], [5.0, 5.0], [0.0, 5.0]];
        assert_abs_diff_eq!(polygon_disk_area(&sq, [0.0, 0.0], 2.0), 2.0 * PI, epsilon = 1e-10);
    }

    #[test]
    fn grid_partition_is_additive() {
        // Sum of triangle∩cell∩disk areas over a grid equals triangle∩disk.
        let tri = [[-0.9, -0.4], [1.1, 0.1], [0.2, 1.3]];
        let whole = polygon_disk_area(&tri, [0.1, 0.2], 0.8);
        let mut acc = 0.0;
        let k = 16;
        for i in 0..k {
            for j in 0..k {
                let (x0, x1) = (-2.0 + 4.0 * i as f64 / k as f64, -2.0 + 4.0 * (i + 1) as f64 / k as f64);
                let (y0, y1) = (-2.0 + 4.0 * j as f64 / k as f64, -2.0 + 4.0 * (j + 1) as f64 / k as f64);
                let piece = clip_rect(&tri, x0, x1, y0, y1);
                if piece.len() >= 3 {
                    acc += polygon_disk_area(&piece, [0.1, 0.2], 0.8);
                }
            }
        }
        assert_abs_diff_eq!(acc, whole, epsilon = 1e-10);
    }
}
