//! Smoothing and gluing machinery: discrete mollification, Lipschitz
//! truncation, annulus interpolation with exact boundary traces, the
//! reverse-Holder ratio report, and the three-zone competitor construction
//! (mollify, almost-project, interpolate).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::embedding::{dist, Embedding};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, MeshKind};
use crate::projections::AlmostProjection;
use crate::qspace::{self, QPoint};

use super::{dirichlet_energy, QField};

/// Discrete mollification of a vector field on a mesh: a compactly supported
/// quartic bump kernel, exactly normalized against the lumped vertex areas.
pub fn mollify(mesh: &Mesh, field: &[Vec<f64>], eps: f64) -> Result<Vec<Vec<f64>>> {
    let spacing = mesh.spacing();
    if eps < 2.0 * spacing {
        return Err(Error::InvalidInput(format!(
            "mollification radius {eps} below twice the mesh spacing {spacing}"
        )));
    }
    let nv = mesh.num_vertices();
    let dim = field[0].len();
    // Bucket vertices for radius queries.
    let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
    for v in &mesh.vertices {
        x0 = x0.min(v[0]);
        y0 = y0.min(v[1]);
    }
    let h = eps;
    let mut buckets: std::collections::HashMap<(i64, i64), Vec<usize>> =
        std::collections::HashMap::new();
    for (i, v) in mesh.vertices.iter().enumerate() {
        let key = (((v[0] - x0) / h).floor() as i64, ((v[1] - y0) / h).floor() as i64);
        buckets.entry(key).or_default().push(i);
    }
    let kernel = |dx: f64, dy: f64| -> f64 {
        let kx = 1.0 - (dx / eps) * (dx / eps);
        let ky = 1.0 - (dy / eps) * (dy / eps);
        if kx <= 0.0 || ky <= 0.0 {
            0.0
        } else {
            kx * kx * ky * ky
        }
    };
    let mut out = vec![vec![0.0; dim]; nv];
    for i in 0..nv {
        let vi = mesh.vertices[i];
        let bx = ((vi[0] - x0) / h).floor() as i64;
        let by = ((vi[1] - y0) / h).floor() as i64;
        let mut wsum = 0.0;
        let mut acc = vec![0.0; dim];
        for dxb in -1..=1 {
            for dyb in -1..=1 {
                if let Some(list) = buckets.get(&(bx + dxb, by + dyb)) {
                    for &j in list {
                        let vj = mesh.vertices[j];
                        let w = kernel(vi[0] - vj[0], vi[1] - vj[1]) * mesh.vertex_area[j];
                        if w > 0.0 {
                            wsum += w;
                            for d in 0..dim {
                                acc[d] += w * field[j][d];
                            }
                        }
                    }
                }
            }
        }
        for d in 0..dim {
            out[i][d] = acc[d] / wsum;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruncateReport {
    pub level: f64,
    /// Vertices whose local slope exceeded the level.
    pub bad_vertices: Vec<usize>,
    pub output_lip: f64,
    pub input_energy: f64,
    pub output_energy: f64,
    /// Largest change on the boundary (the trace penalty of the Sobolev
    /// truncation lemma).
    pub boundary_trace_error: f64,
}

/// Truncate a field at a Lipschitz level: vertices whose local maximal slope
/// exceeds the level are re-extended from the good set.
pub fn lipschitz_truncate(u: &QField, level: f64) -> Result<(QField, TruncateReport)> {
    if !(level > 0.0) {
        return Err(Error::InvalidInput("truncation level must be positive".into()));
    }
    let mesh = &u.mesh;
    let ve = mesh.vertex_edges();
    let mut bad = Vec::new();
    for v in 0..mesh.num_vertices() {
        let mut slope = 0.0f64;
        for &ei in &ve[v] {
            let e = &mesh.edges[ei];
            let other = if e.a == v { e.b } else { e.a };
            slope = slope.max(qspace::metric_g(&u.values[v], &u.values[other])? / e.len);
        }
        if slope > level {
            bad.push(v);
        }
    }
    let mut out = u.clone();
    if !bad.is_empty() {
        let frozen: Vec<usize> =
            (0..mesh.num_vertices()).filter(|v| !bad.contains(v)).collect();
        if frozen.is_empty() {
            return Err(Error::InvalidInput("no vertex below the truncation level".into()));
        }
        // Seed bad vertices from their nearest good vertex, then relax.
        for &v in &bad {
            let nearest = frozen
                .iter()
                .min_by(|&&a, &&b| {
                    d2(mesh.vertices[a], mesh.vertices[v])
                        .partial_cmp(&d2(mesh.vertices[b], mesh.vertices[v]))
                        .unwrap()
                })
                .unwrap();
            out.values[v] = out.values[*nearest].clone();
        }
        relax_with_frozen(&mut out, &frozen, 40)?;
    }
    let boundary_trace_error = mesh
        .boundary
        .iter()
        .map(|&v| qspace::metric_g(&u.values[v], &out.values[v]).unwrap())
        .fold(0.0, f64::max);
    let report = TruncateReport {
        level,
        bad_vertices: bad,
        output_lip: out.measured_lip(),
        input_energy: dirichlet_energy(u)?.total,
        output_energy: dirichlet_energy(&out)?.total,
        boundary_trace_error,
    };
    Ok((out, report))
}

fn d2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Metric-averaging relaxation with a frozen vertex set (shared by the
/// truncation and approximation extension paths).
pub fn relax_with_frozen(u: &mut QField, frozen: &[usize], sweeps: usize) -> Result<()> {
    let mesh = Arc::clone(&u.mesh);
    let ve = mesh.vertex_edges();
    let mask: Vec<bool> = {
        let mut m = vec![false; mesh.num_vertices()];
        for &v in frozen {
            m[v] = true;
        }
        m
    };
    let (q, n) = (u.q(), u.n());
    for _ in 0..sweeps {
        for v in 0..mesh.num_vertices() {
            if mask[v] {
                continue;
            }
            let mut acc = vec![vec![0.0; n]; q];
            let mut wsum = 0.0;
            for &ei in &ve[v] {
                let e = &mesh.edges[ei];
                let other = if e.a == v { e.b } else { e.a };
                let m = qspace::optimal_matching(&u.values[v], &u.values[other])?;
                for (i, &mi) in m.iter().enumerate() {
                    for d in 0..n {
                        acc[i][d] += u.values[other].points[mi][d];
                    }
                }
                wsum += 1.0;
            }
            if wsum > 0.0 {
                let pts =
                    acc.into_iter().map(|p| p.into_iter().map(|x| x / wsum).collect()).collect();
                u.values[v] = QPoint::new(n, pts)?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnulusReport {
    pub eps_rings: usize,
    pub energy_f: f64,
    pub energy_h: f64,
    pub boundary_energy_f: f64,
    pub boundary_energy_g: f64,
    pub trace_mismatch: f64,
    /// Smallest C for D(h) <= D(f) + eps D(g,bd) + eps D(f,bd) + C/eps int G(f,g)^2.
    pub required_c: f64,
    pub lip_h: f64,
}

/// Interpolate between a field on a polar disk and new boundary data across
/// an outer annulus of about `eps` thickness. The output trace equals `g`
/// exactly on boundary vertices.
pub fn interpolate_annulus(
    f: &QField,
    g: &[(usize, QPoint)],
    eps: f64,
) -> Result<(QField, AnnulusReport)> {
    let mesh = &f.mesh;
    let (radius, rings, sectors) = match mesh.kind {
        MeshKind::DiskPolar { radius, rings, sectors } => (radius, rings, sectors),
        _ => {
            return Err(Error::InvalidInput(
                "annulus interpolation needs a polar disk mesh".into(),
            ))
        }
    };
    if !(eps > 0.0 && eps < radius) {
        return Err(Error::InvalidInput("eps must lie in (0, r)".into()));
    }
    let (q, n) = (f.q(), f.n());
    for (_, p) in g {
        if p.q != q || p.n != n {
            return Err(Error::MultiplicityMismatch { expected: q, got: p.q });
        }
    }
    let dr = radius / rings as f64;
    let n_eps = ((eps / dr).round() as usize).clamp(1, rings - 1);
    let inner_ring = rings - n_eps;
    let gmap: std::collections::HashMap<usize, &QPoint> =
        g.iter().map(|(v, p)| (*v, p)).collect();
    let vid = |ring: usize, s: usize| -> usize {
        if ring == 0 {
            0
        } else {
            1 + (ring - 1) * sectors + (s % sectors)
        }
    };
    let mut values = f.values.clone();
    for s in 0..sectors {
        let base = f.values[vid(inner_ring, s)].clone();
        let bid = vid(rings, s);
        let target = *gmap
            .get(&bid)
            .ok_or_else(|| Error::InvalidInput(format!("missing boundary datum at {bid}")))?;
        let m = qspace::optimal_matching(&base, target)?;
        for ring in (inner_ring + 1)..=rings {
            let t = (ring - inner_ring) as f64 / n_eps as f64;
            let pts: Vec<Vec<f64>> = (0..q)
                .map(|i| {
                    (0..n)
                        .map(|d| (1.0 - t) * base.points[i][d] + t * target.points[m[i]][d])
                        .collect()
                })
                .collect();
            values[vid(ring, s)] = QPoint::new(n, pts)?;
        }
    }
    let h = QField::new(Arc::clone(mesh), values)?;

    // Report the quantities entering the interpolation inequality.
    let energy_f = dirichlet_energy(f)?.total;
    let energy_h = dirichlet_energy(&h)?.total;
    let ring_energy = |field: &QField, ring: usize| -> Result<f64> {
        let mut acc = 0.0;
        for s in 0..sectors {
            let (a, b) = (vid(ring, s), vid(ring, s + 1));
            let len = d2(mesh.vertices[a], mesh.vertices[b]).sqrt();
            acc += qspace::metric_g(&field.values[a], &field.values[b])?.powi(2) / len;
        }
        Ok(acc)
    };
    let boundary_energy_f = ring_energy(f, rings)?;
    let gfield = {
        let mut v = f.values.clone();
        for (i, p) in g {
            v[*i] = p.clone();
        }
        QField::new(Arc::clone(mesh), v)?
    };
    let boundary_energy_g = ring_energy(&gfield, rings)?;
    let mut mismatch2 = 0.0;
    let mut trace_mismatch = 0.0f64;
    for s in 0..sectors {
        let bid = vid(rings, s);
        let gm = qspace::metric_g(&f.values[bid], gmap[&bid])?;
        let arc = 2.0 * std::f64::consts::PI * radius / sectors as f64;
        mismatch2 += gm * gm * arc;
        trace_mismatch = trace_mismatch.max(qspace::metric_g(&h.values[bid], gmap[&bid])?);
    }
    let slack = energy_h - energy_f - eps * (boundary_energy_f + boundary_energy_g);
    let required_c = if slack <= 0.0 || mismatch2 <= 1e-300 {
        0.0
    } else {
        slack * eps / mismatch2
    };
    let report = AnnulusReport {
        eps_rings: n_eps,
        energy_f,
        energy_h,
        boundary_energy_f,
        boundary_energy_g,
        trace_mismatch,
        required_c,
        lip_h: h.measured_lip(),
    };
    Ok((h, report))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReverseHolderRow {
    pub center: [f64; 2],
    pub r: f64,
    /// (mean of |Du|^2 over B_r)^{1/2}.
    pub l2_mean: f64,
    /// (mean of |Du|^s over B_2r)^{1/s}.
    pub ls_mean: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReverseHolderReport {
    pub s: f64,
    pub p: f64,
    pub rows: Vec<ReverseHolderRow>,
    /// ||Du||_{L^p(inner)} / ||Du||_{L^2(domain)}.
    pub norm_ratio: f64,
    pub max_ratio: f64,
}

/// Reverse-Holder ratios of the gradient over a ball sweep, plus the global
/// L^p/L^2 comparison on a compactly contained subdomain.
pub fn reverse_holder_check(
    u: &QField,
    inner_fraction: f64,
    s: f64,
    p: f64,
) -> Result<ReverseHolderReport> {
    if !(s > 1.0 && s < 2.0) {
        return Err(Error::InvalidInput(format!(
            "s = {s} outside (2(m-1)/m, 2) for m = 2"
        )));
    }
    if !(p > 2.0) {
        return Err(Error::InvalidInput("p must exceed 2".into()));
    }
    let mesh = &u.mesh;
    let report = dirichlet_energy(u)?;
    let density: Vec<f64> =
        report.per_cell.iter().zip(&mesh.cells).map(|(e, c)| e / c.area).collect();
    let centroid = |ci: usize| -> [f64; 2] {
        let c = &mesh.cells[ci];
        let mut out = [0.0, 0.0];
        for &v in &c.v {
            out[0] += mesh.vertices[v][0] / 3.0;
            out[1] += mesh.vertices[v][1] / 3.0;
        }
        out
    };
    let rad = mesh
        .vertices
        .iter()
        .map(|v| (v[0] * v[0] + v[1] * v[1]).sqrt())
        .fold(0.0, f64::max);
    let mean_pow = |center: [f64; 2], r: f64, pow: f64| -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (ci, c) in mesh.cells.iter().enumerate() {
            let cen = centroid(ci);
            if d2(cen, center) <= r * r {
                num += density[ci].max(0.0).powf(pow / 2.0) * c.area;
                den += c.area;
            }
        }
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    };
    let mut rows = Vec::new();
    let mut max_ratio = 0.0f64;
    for center in [[0.0, 0.0], [0.3 * rad, 0.1 * rad], [-0.2 * rad, -0.25 * rad]] {
        for frac in [0.1, 0.2, 0.3] {
            let r = frac * rad;
            if d2(center, [0.0, 0.0]).sqrt() + 2.0 * r > rad {
                continue;
            }
            let l2_mean = mean_pow(center, r, 2.0).sqrt();
            let ls_mean = mean_pow(center, 2.0 * r, s).powf(1.0 / s);
            let ratio = if ls_mean > 1e-300 { l2_mean / ls_mean } else { 0.0 };
            max_ratio = max_ratio.max(ratio);
            rows.push(ReverseHolderRow { center, r, l2_mean, ls_mean, ratio });
        }
    }
    // Global L^p on the inner region vs L^2 on the whole domain.
    let mut lp = 0.0;
    let mut l2 = 0.0;
    for (ci, c) in mesh.cells.iter().enumerate() {
        let cen = centroid(ci);
        if (cen[0] * cen[0] + cen[1] * cen[1]).sqrt() <= inner_fraction * rad {
            lp += density[ci].max(0.0).powf(p / 2.0) * c.area;
        }
        l2 += density[ci].max(0.0) * c.area;
    }
    let norm_ratio = lp.powf(1.0 / p) / l2.sqrt().max(1e-300);
    Ok(ReverseHolderReport { s, p, rows, norm_ratio, max_ratio })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompetitorReport {
    pub energy_scale: f64,
    pub mollification_l2: f64,
    pub max_rho_displacement: f64,
    pub max_cone_adjustment: f64,
    pub trace_error: f64,
    pub lip_f: f64,
    pub lip_g: f64,
    pub energy_f: f64,
    pub energy_g: f64,
    /// Zone energies of the competitor: [outer lin, middle lin, core].
    pub zone_energies: [f64; 3],
}

/// Three-zone competitor on a polar disk: embed and normalize the field,
/// mollify in the core, almost-project, and glue with two linear
/// interpolation annuli so the trace on the outer radius is preserved.
/// The output is cone-valued by construction (each vertex is retracted).
pub fn build_competitor(
    f: &QField,
    emb: &Arc<Embedding>,
    proj: &AlmostProjection,
    eps: f64,
    radii: [f64; 3],
) -> Result<(QField, CompetitorReport)> {
    let [r1, r2, r3] = radii;
    if !(r1 < r2 && r2 < r3) {
        return Err(Error::InvalidInput("radii must be strictly increasing".into()));
    }
    let mesh = &f.mesh;
    let (radius, rings, sectors) = match mesh.kind {
        MeshKind::DiskPolar { radius, rings, sectors } => (radius, rings, sectors),
        _ => return Err(Error::InvalidInput("competitor needs a polar disk mesh".into())),
    };
    if r3 > radius {
        return Err(Error::InvalidInput("outer radius beyond the mesh".into()));
    }
    let energy_f = dirichlet_energy(f)?.total;
    let scale = energy_f.max(1e-12).sqrt();

    // Embedded, normalized field and its mollification.
    let nn = emb.spec().big_n();
    let embedded: Vec<Vec<f64>> = f
        .values
        .iter()
        .map(|t| emb.xi(t).map(|w| w.iter().map(|x| x / scale).collect()))
        .collect::<Result<_>>()?;
    let mollified = mollify(mesh, &embedded, eps)?;
    let mut moll_l2 = 0.0;
    for (i, (a, b)) in embedded.iter().zip(&mollified).enumerate() {
        moll_l2 += mesh.vertex_area[i] * dist(a, b).powi(2);
    }

    // Almost-projections of both fields.
    let mut max_rho_displacement = 0.0f64;
    let mut rho_direct: Vec<Vec<f64>> = Vec::with_capacity(embedded.len());
    for w in &embedded {
        let out = proj.apply(w)?;
        max_rho_displacement = max_rho_displacement.max(dist(&out, w));
        rho_direct.push(out);
    }
    let rho_moll: Vec<Vec<f64>> =
        mollified.iter().map(|w| proj.apply(w)).collect::<Result<_>>()?;

    let dr = radius / rings as f64;
    let ring_of = |rho: f64| -> usize { (rho / dr).round() as usize };
    let (i1, i2, i3) = (ring_of(r1), ring_of(r2), ring_of(r3));
    if !(i1 > 0 && i1 < i2 && i2 < i3) {
        return Err(Error::InvalidInput("radii collapse on this mesh resolution".into()));
    }
    let vid = |ring: usize, s: usize| -> usize {
        if ring == 0 {
            0
        } else {
            1 + (ring - 1) * sectors + (s % sectors)
        }
    };

    // Assemble the embedded competitor ring by ring.
    let mut gprime: Vec<Vec<f64>> = embedded.iter().map(|w| scale_vec(w, scale)).collect();
    for ring in 0..=i3 {
        for s in 0..sectors {
            let v = vid(ring, s);
            let val: Vec<f64> = if ring > i2 {
                // lin between the outer trace (the field itself) and the
                // almost-projected field on the middle circle.
                let t = (i3 - ring) as f64 / (i3 - i2) as f64;
                let outer = &embedded[vid(i3, s)];
                let inner = &rho_direct[vid(i2, s)];
                (0..nn).map(|d| (1.0 - t) * outer[d] + t * inner[d]).collect()
            } else if ring > i1 {
                let t = (i2 - ring) as f64 / (i2 - i1) as f64;
                let outer = &rho_direct[vid(i2, s)];
                let inner = &rho_moll[vid(i1, s)];
                (0..nn).map(|d| (1.0 - t) * outer[d] + t * inner[d]).collect()
            } else {
                rho_moll[v].clone()
            };
            gprime[v] = scale_vec(&val, scale);
            if ring == 0 {
                break; // single center vertex
            }
        }
    }

    // Enforce cone values and decode.
    let mut max_cone_adjustment = 0.0f64;
    let mut values = Vec::with_capacity(gprime.len());
    for w in &gprime {
        let r = emb.retract(w)?;
        max_cone_adjustment = max_cone_adjustment.max(r.dist);
        values.push(r.tuple);
    }
    let g = QField::new(Arc::clone(mesh), values)?;

    let mut trace_error = 0.0f64;
    for s in 0..sectors {
        let v = vid(i3, s);
        trace_error = trace_error.max(qspace::metric_g(&g.values[v], &f.values[v])?);
    }
    let zone = |lo: usize, hi: usize| -> Result<f64> {
        let mut acc = 0.0;
        for e in mesh.edges.iter() {
            if e.weight.abs() < 1e-14 {
                continue;
            }
            let ra = ring_index(e.a, sectors);
            let rb = ring_index(e.b, sectors);
            if ra.max(rb) <= hi && ra.min(rb) >= lo {
                acc += e.weight * qspace::metric_g(&g.values[e.a], &g.values[e.b])?.powi(2);
            }
        }
        Ok(acc)
    };
    let report = CompetitorReport {
        energy_scale: energy_f,
        mollification_l2: moll_l2.sqrt(),
        max_rho_displacement,
        max_cone_adjustment,
        trace_error,
        lip_f: f.measured_lip(),
        lip_g: g.measured_lip(),
        energy_f,
        energy_g: dirichlet_energy(&g)?.total,
        zone_energies: [zone(i2, i3)?, zone(i1, i2)?, zone(0, i1)?],
    };
    Ok((g, report))
}

fn ring_index(v: usize, sectors: usize) -> usize {
    if v == 0 {
        0
    } else {
        (v - 1) / sectors + 1
    }
}

fn scale_vec(w: &[f64], s: f64) -> Vec<f64> {
    w.iter().map(|x| x * s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mollify_preserves_constants_and_linears() {
        let mesh = Mesh::unit_square(24).unwrap();
        let constant: Vec<Vec<f64>> = vec![vec![3.5, -1.0]; mesh.num_vertices()];
        let out = mollify(&mesh, &constant, 0.12).unwrap();
        for v in &out {
            assert_abs_diff_eq!(v[0], 3.5, epsilon = 1e-12);
            assert_abs_diff_eq!(v[1], -1.0, epsilon = 1e-12);
        }
        // Linear field: unchanged away from the boundary by eps.
        let linear: Vec<Vec<f64>> =
            mesh.vertices.iter().map(|p| vec![2.0 * p[0] - p[1]]).collect();
        let eps = 0.125;
        let out = mollify(&mesh, &linear, eps).unwrap();
        for (i, p) in mesh.vertices.iter().enumerate() {
            let interior = p[0] > eps + 1e-9
                && p[0] < 1.0 - eps - 1e-9
                && p[1] > eps + 1e-9
                && p[1] < 1.0 - eps - 1e-9;
            if interior {
                assert_abs_diff_eq!(out[i][0], linear[i][0], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn mollify_error_shrinks_with_eps() {
        let mesh = Mesh::unit_square(64).unwrap();
        let field: Vec<Vec<f64>> = mesh
            .vertices
            .iter()
            .map(|p| vec![(4.0 * p[0]).sin() * (3.0 * p[1]).cos()])
            .collect();
        let mut errs = Vec::new();
        for eps in [0.25, 0.125, 0.0625] {
            let out = mollify(&mesh, &field, eps).unwrap();
            let mut l2 = 0.0;
            for (i, p) in mesh.vertices.iter().enumerate() {
                let interior = p[0] > 0.26 && p[0] < 0.74 && p[1] > 0.26 && p[1] < 0.74;
                if interior {
                    l2 += mesh.vertex_area[i] * (out[i][0] - field[i][0]).powi(2);
                }
            }
            errs.push(l2.sqrt());
        }
        // The kernel is symmetric, so interior error is at least first order
        // in eps (second order in practice).
        let order = (errs[0] / errs[1]).log2();
        assert!(order >= 1.0, "errors {errs:?} -> order {order}");
    }

    #[test]
    fn truncate_removes_spike() {
        let mesh = Arc::new(Mesh::unit_square(16).unwrap());
        let spike_vertex = 8 * 17 + 8;
        let mut u = QField::constant(Arc::clone(&mesh), QPoint::scalar(&[0.0, 1.0]));
        u.values[spike_vertex] = QPoint::scalar(&[5.0, 6.0]);
        let (out, report) = lipschitz_truncate(&u, 1.0).unwrap();
        // The spike and its immediate neighbors all see a steep edge.
        assert!(report.bad_vertices.contains(&spike_vertex));
        for &b in &report.bad_vertices {
            let (bx, by) = (b % 17, b / 17);
            assert!(bx.abs_diff(8) <= 1 && by.abs_diff(8) <= 1, "vertex {b} far from the spike");
        }
        assert!(report.output_lip <= 1.0);
        assert!(qspace::metric_g(&out.values[spike_vertex], &u.values[0]).unwrap() < 1e-6);
        for v in 0..mesh.num_vertices() {
            if !report.bad_vertices.contains(&v) {
                assert_eq!(out.values[v].points, u.values[v].points);
            }
        }
        // A field already below the level is untouched.
        let (same, rep2) = lipschitz_truncate(&out, 1.0).unwrap();
        assert!(rep2.bad_vertices.is_empty());
        for v in 0..mesh.num_vertices() {
            assert_eq!(same.values[v].points, out.values[v].points);
        }
    }

    #[test]
    fn annulus_interpolation_trace_and_identity() {
        let mesh = Arc::new(Mesh::disk_polar(1.0, 16, 32).unwrap());
        let f = QField::from_fn(Arc::clone(&mesh), |p| {
            QPoint::new(1, vec![vec![p[0]], vec![-p[0]]]).unwrap()
        });
        // g = trace of f: no mismatch term, so the required C vanishes.
        let g: Vec<(usize, QPoint)> =
            mesh.boundary.iter().map(|&v| (v, f.values[v].clone())).collect();
        let (_, rep) = interpolate_annulus(&f, &g, 0.1).unwrap();
        assert!(rep.trace_mismatch < 1e-12);
        assert!(rep.required_c <= 1e-9, "required C {}", rep.required_c);

        // Perturbed boundary: trace exact, fitted C finite.
        let g2: Vec<(usize, QPoint)> = mesh
            .boundary
            .iter()
            .map(|&v| {
                let p = mesh.vertices[v];
                let mut val = f.values[v].clone();
                val.points[0][0] += 0.05 * p[1];
                (v, val)
            })
            .collect();
        let (h2, rep2) = interpolate_annulus(&f, &g2, 0.125).unwrap();
        for (v, p) in &g2 {
            assert!(qspace::metric_g(&h2.values[*v], p).unwrap() < 1e-12);
        }
        assert!(rep2.required_c.is_finite());
    }

    #[test]
    fn reverse_holder_constant_gradient() {
        // Constant density: the sweep ratios are exactly 1 and the norm
        // ratio reduces to a Lebesgue computation in closed form.
        let mesh = Arc::new(Mesh::disk_polar(1.0, 24, 48).unwrap());
        let u = QField::from_fn(Arc::clone(&mesh), |p| {
            QPoint::new(1, vec![vec![0.7 * p[0]]]).unwrap()
        });
        let rep = reverse_holder_check(&u, 0.5, 1.5, 4.0).unwrap();
        for row in &rep.rows {
            assert_abs_diff_eq!(row.ratio, 1.0, epsilon = 1e-6);
        }
        let d: f64 = 0.49;
        let area = mesh.total_area();
        let rad = mesh
            .vertices
            .iter()
            .map(|v| (v[0] * v[0] + v[1] * v[1]).sqrt())
            .fold(0.0, f64::max);
        let inner_area: f64 = mesh
            .cells
            .iter()
            .filter(|c| {
                let mut cen = [0.0, 0.0];
                for &v in &c.v {
                    cen[0] += mesh.vertices[v][0] / 3.0;
                    cen[1] += mesh.vertices[v][1] / 3.0;
                }
                (cen[0] * cen[0] + cen[1] * cen[1]).sqrt() <= 0.5 * rad
            })
            .map(|c| c.area)
            .sum();
        let expected = (d.powi(2) * inner_area).powf(0.25) / (d * area).sqrt();
        assert_abs_diff_eq!(rep.norm_ratio, expected, epsilon = 1e-6);
    }
}
