//! Almost-projections onto the embedding cone: skeleton-tube geometry, the
//! recursive stage construction (identity on deep top faces, face projection
//! near each skeleton, Kirszbraun extensions in between), the global
//! extension through the nearest-point retraction, the energy-inequality
//! harness, and the sup-norm cone-like extension on cubes.

pub mod kirszbraun;

use std::sync::Arc;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{dist, norm, Embedding};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::qspace::{self, QPoint};

pub use kirszbraun::{check_consistency, kirszbraun_extend};

/// Radial cone extension of a near-identity boundary map (the stage-building
/// primitive): extend `boundary` from the sphere of radius `b` by zero on the
/// ball of radius `tau`, then answer queries by Lipschitz feasibility.
///
/// Preconditions (validated): boundary samples have Lipschitz constant at
/// most 1 + tau and displacement |v(x) - x| at most tau (up to `slack`).
pub struct RadialConeExtension {
    samples: Vec<(Vec<f64>, Vec<f64>)>,
    pub lambda: f64,
    pub b: f64,
    pub tau: f64,
}

impl RadialConeExtension {
    pub fn new(
        boundary: Vec<(Vec<f64>, Vec<f64>)>,
        b: f64,
        tau: f64,
        slack: f64,
    ) -> Result<Self> {
        if b <= 2.0 * tau {
            return Err(Error::InvalidInput("need b > 2 tau".into()));
        }
        for (x, v) in &boundary {
            let r = norm(x);
            if (r - b).abs() > 1e-6 * b {
                return Err(Error::InvalidInput(format!(
                    "boundary sample at radius {r}, want {b}"
                )));
            }
            if dist(x, v) > tau + slack {
                return Err(Error::InvalidInput(format!(
                    "boundary displacement {:.3e} exceeds tau = {tau:.3e}",
                    dist(x, v)
                )));
            }
        }
        for i in 0..boundary.len() {
            for j in (i + 1)..boundary.len() {
                let dv = dist(&boundary[i].1, &boundary[j].1);
                let dx = dist(&boundary[i].0, &boundary[j].0);
                if dv > (1.0 + tau) * dx + slack {
                    return Err(Error::InvalidInput(format!(
                        "boundary pair ({i},{j}) has Lipschitz ratio {:.6}",
                        dv / dx.max(1e-300)
                    )));
                }
            }
        }
        let dim = boundary.first().map(|(x, _)| x.len()).unwrap_or(0);
        let mut samples = boundary;
        // Zero extension on the tau-ball: the origin plus scaled copies of
        // the boundary directions.
        samples.push((vec![0.0; dim], vec![0.0; dim]));
        let sphere: Vec<Vec<f64>> = samples
            .iter()
            .filter(|(x, _)| norm(x) > 0.5 * b)
            .map(|(x, _)| x.iter().map(|c| c * tau / b).collect())
            .collect();
        for z in sphere {
            samples.push((z, vec![0.0; dim]));
        }
        let lambda = 1.0 + 2.0 * tau;
        check_consistency(&samples, lambda, slack.max(1e-9))?;
        Ok(Self { samples, lambda, b, tau })
    }

    /// Value at a query in the cone ball; zero inside the tau-ball.
    ///
    /// Radially: w(z) = rho(|z|)/b * V(b z/|z|) with rho(t) = b(t-tau)/(b-tau)
    /// and V the Lipschitz extension of the boundary data restricted to the
    /// sphere. The radial factor vanishes on the tau-ball and matches the
    /// boundary exactly at |z| = b, so the map is continuous with Lipschitz
    /// constant (1+tau) b/(b-tau) <= 1 + 2 tau for b > 2.
    pub fn eval(&self, z: &[f64]) -> Result<Vec<f64>> {
        let t = norm(z);
        if t <= self.tau {
            return Ok(vec![0.0; z.len()]);
        }
        let dir: Vec<f64> = z.iter().map(|c| c * self.b / t).collect();
        let v = kirszbraun_extend(&self.samples, self.lambda, &dir)?;
        let rho = self.b * (t - self.tau) / (self.b - self.tau);
        Ok(v.iter().map(|c| c * rho / self.b).collect())
    }
}

/// Tube constants over the face complex: c[top-1] = 1, increasing toward
/// lower dimensions until same-dimension tubes are disjoint on samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkeletonGeometry {
    /// c[k] for k = 0..top_dim-1 (strictly decreasing in k).
    pub c: Vec<f64>,
    pub top_dim: usize,
    /// Largest admissible mu: half the smallest sampled tube gap, capped.
    pub mu_max: f64,
}

impl SkeletonGeometry {
    pub fn build(emb: &Embedding, seed: u64) -> Result<Self> {
        let complex = emb
            .complex()
            .ok_or_else(|| Error::EnumerationBound("almost-projections need a face complex".into()))?;
        let top = complex.top_dim();
        let mut c = vec![1.0; top];
        // c[k-1] = kappa c[k], doubling kappa until sampled tube disjointness.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<Vec<f64>> = (0..600)
            .map(|_| {
                let t = emb.random_qpoint(&mut rng);
                let w = emb.xi(&t).unwrap();
                let scale = rng.random_range(0.5..3.0 * top as f64);
                w.iter().map(|x| x * scale).collect()
            })
            .collect();
        let mut kappa = 4.0;
        'outer: for _ in 0..6 {
            for k in (1..top).rev() {
                c[k - 1] = kappa * c[k];
            }
            // Tubes of the same dimension must not share sample points.
            for k in 1..top {
                let faces: Vec<usize> = complex.faces_of_dim(k).map(|f| f.id).collect();
                if faces.len() < 2 {
                    continue;
                }
                for w in &samples {
                    let mut hits = 0;
                    for &f in &faces {
                        let df = emb.dist_to_face_closure(w, f)?;
                        let ds = if k >= 1 { emb.dist_to_skeleton(w, k - 1)? } else { f64::INFINITY };
                        if df <= 2.0 * c[k] && ds >= c[k - 1] {
                            hits += 1;
                        }
                    }
                    if hits > 1 {
                        kappa *= 2.0;
                        continue 'outer;
                    }
                }
            }
            break;
        }
        // Sampled tube gap between distinct same-dimension tubes.
        let mut gap = f64::INFINITY;
        for k in 1..top {
            let faces: Vec<usize> = complex.faces_of_dim(k).map(|f| f.id).collect();
            if faces.len() < 2 {
                continue;
            }
            for (ai, &fa) in faces.iter().enumerate() {
                for &fb in faces.iter().skip(ai + 1) {
                    let in_tube = |w: &Vec<f64>, f: usize| -> bool {
                        emb.dist_to_face_closure(w, f).map(|d| d <= 2.0 * c[k]).unwrap_or(false)
                    };
                    let pa: Vec<&Vec<f64>> = samples.iter().filter(|w| in_tube(w, fa)).collect();
                    let pb: Vec<&Vec<f64>> = samples.iter().filter(|w| in_tube(w, fb)).collect();
                    for x in &pa {
                        for y in &pb {
                            gap = gap.min(dist(x, y));
                        }
                    }
                }
            }
        }
        let mu_max = (gap / 2.0).min(0.5);
        Ok(Self { c, top_dim: top, mu_max })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageCalibration {
    pub k: usize,
    pub face_id: usize,
    /// Measured Lipschitz constant of the stage on samples.
    pub lip: f64,
    /// Measured sup displacement on samples.
    pub defect: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RhoStarCalibration {
    pub mu: f64,
    pub stages: Vec<StageCalibration>,
    /// sup over cone samples of |rho*(P) - P|.
    pub sup_defect: f64,
    /// sup_defect / mu^{2^{-top}}.
    pub defect_coefficient: f64,
}

struct StageFace {
    k: usize,
    face_id: usize,
    tau: f64,
    extension: RadialConeExtension,
}

/// The almost-projection for one parameter mu: deterministic, maps the whole
/// space onto the cone, coincides with the face projection on the inner
/// tubes, and has Lipschitz defect vanishing with mu.
pub struct AlmostProjection {
    emb: Arc<Embedding>,
    pub geometry: SkeletonGeometry,
    pub mu: f64,
    stages: Vec<StageFace>,
    pub calibration: RhoStarCalibration,
}

/// Stage zero-ball exponent: tau_k = mu^{2^{-top+k+1}}.
fn stage_tau(mu: f64, top: usize, k: usize) -> f64 {
    mu.powf(2.0f64.powi(-(top as i32) + k as i32 + 1))
}

impl AlmostProjection {
    pub fn embedding(&self) -> &Arc<Embedding> {
        &self.emb
    }

    /// Evaluate the stage cascade at a cone point: the lowest-dimension tube
    /// containing the point acts; deep top-face points are fixed.
    pub fn project_on_cone(&self, x: &[f64]) -> Result<Vec<f64>> {
        for stage in &self.stages {
            let df = self.emb.dist_to_face_closure(x, stage.face_id)?;
            if df > 2.0 * self.geometry.c[stage.k] {
                continue;
            }
            let ds = if stage.k >= 1 {
                self.emb.dist_to_skeleton(x, stage.k - 1)?
            } else {
                f64::INFINITY
            };
            let lower_bound =
                if stage.k >= 1 { self.geometry.c[stage.k - 1] } else { f64::INFINITY };
            if stage.k >= 1 && ds < lower_bound {
                continue;
            }
            let y = self.emb.project_to_face(x, stage.face_id)?;
            let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
            if norm(&z) <= stage.tau {
                // Inner tube: exactly the projection onto the face span.
                return Ok(y);
            }
            let w = stage.extension.eval(&z)?;
            return Ok(y.iter().zip(&w).map(|(a, b)| a + b).collect());
        }
        Ok(x.to_vec())
    }

    /// Full almost-projection: retract to the cone, run the cascade, retract
    /// the output (Kirszbraun values may drift off the cone by solver slack).
    pub fn apply(&self, w: &[f64]) -> Result<Vec<f64>> {
        let on_cone = self.emb.retract(w)?;
        let moved = self.project_on_cone(&on_cone.point)?;
        Ok(self.emb.retract(&moved)?.point)
    }

    /// Decode the almost-projection output.
    pub fn apply_qpoint(&self, w: &[f64]) -> Result<QPoint> {
        let p = self.apply(w)?;
        self.emb.decode(&p)
    }
}

/// Build the almost-projection for the given mu.
pub fn build_rho_star(emb: &Arc<Embedding>, mu: f64, seed: u64) -> Result<AlmostProjection> {
    let geometry = SkeletonGeometry::build(emb, seed)?;
    if !(mu > 0.0 && mu <= geometry.mu_max) {
        return Err(Error::InvalidInput(format!(
            "mu = {mu} outside (0, {}]",
            geometry.mu_max
        )));
    }
    let complex = emb.complex().unwrap();
    let top = geometry.top_dim;
    let mut stages: Vec<StageFace> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E3779B97F4A7C15);

    // Build stages from the highest non-top dimension downward so that each
    // stage's boundary data comes from the stages above it.
    let mut dims: Vec<usize> = complex
        .faces
        .iter()
        .map(|f| f.dim)
        .filter(|&d| d < top)
        .collect();
    dims.sort_unstable();
    dims.dedup();
    dims.reverse();

    for &k in &dims {
        let tau = stage_tau(mu, top, k);
        let b = 2.0 * geometry.c[k];
        let face_ids: Vec<usize> = complex.faces_of_dim(k).map(|f| f.id).collect();
        for face_id in face_ids {
            let boundary = sample_stage_boundary(
                emb,
                &geometry,
                &stages,
                face_id,
                k,
                b,
                tau,
                &mut rng,
            )?;
            let extension = RadialConeExtension::new(boundary, b, tau, 1e-7)?;
            stages.push(StageFace { k, face_id, tau, extension });
        }
    }
    // Evaluation order: lowest dimension first (the cascade selector).
    stages.sort_by_key(|s| (s.k, s.face_id));

    let mut proj = AlmostProjection {
        emb: Arc::clone(emb),
        geometry,
        mu,
        stages,
        calibration: RhoStarCalibration {
            mu,
            stages: Vec::new(),
            sup_defect: 0.0,
            defect_coefficient: 0.0,
        },
    };
    proj.calibration = calibrate(&proj, seed ^ 0xC0FFEE)?;
    Ok(proj)
}

/// Sample the boundary sphere of a stage tube cross-section and evaluate the
/// higher stages there.
#[allow(clippy::too_many_arguments)]
fn sample_stage_boundary(
    emb: &Arc<Embedding>,
    geometry: &SkeletonGeometry,
    higher: &[StageFace],
    face_id: usize,
    k: usize,
    b: f64,
    tau: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let complex = emb.complex().unwrap();
    let face = complex.face(face_id);
    let nn = emb.spec().big_n();
    // Reference point deep in the face: scaled so the tube clearance from the
    // lower skeleton comfortably exceeds c[k-1].
    let rep = &face.representative;
    let rep_norm = norm(rep).max(1e-9);
    let rep_hat: Vec<f64> = rep.iter().map(|x| x / rep_norm).collect();
    let clearance = if k >= 1 {
        emb.dist_to_skeleton(&rep_hat, k - 1).unwrap_or(f64::INFINITY)
    } else {
        f64::INFINITY
    };
    let needed = if k >= 1 { 4.0 * geometry.c[k - 1] } else { 8.0 * b };
    let r0 = if clearance.is_finite() { needed / clearance.max(1e-6) } else { needed };
    let y0: Vec<f64> = rep_hat.iter().map(|x| x * r0.max(8.0 * b)).collect();

    // Transverse directions: cone samples near y0, projected off the span.
    let base = emb.decode(&y0)?;
    let mut boundary: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let target = 60usize;
    let mut attempts = 0;
    while boundary.len() < target && attempts < 60 * target {
        attempts += 1;
        let mut pts = base.points.clone();
        for p in pts.iter_mut() {
            for c in p.iter_mut() {
                *c += rng.random_range(-1.5..1.5) * b;
            }
        }
        let t = QPoint::new(base.n, pts)?;
        let w = emb.xi(&t)?;
        let y = face.project(&w);
        let z: Vec<f64> = w.iter().zip(&y).map(|(a, b)| a - b).collect();
        let zn = norm(&z);
        if zn < 1e-9 * b {
            continue;
        }
        // Rescale the transverse part onto the sphere and keep it if it is
        // still (numerically) a cone point in the tube region.
        let candidate: Vec<f64> =
            (0..nn).map(|i| y0[i] + z[i] * b / zn).collect();
        let snapped = emb.retract(&candidate)?;
        if snapped.dist > 1e-7 * b.max(1.0) {
            continue;
        }
        let y_s = face.project(&snapped.point);
        let z_s: Vec<f64> = snapped.point.iter().zip(&y_s).map(|(a, b)| a - b).collect();
        let zn_s = norm(&z_s);
        if (zn_s - b).abs() > 1e-6 * b {
            continue;
        }
        // Deduplicate directions.
        if boundary.iter().any(|(zz, _)| dist(zz, &z_s) < 0.05 * b) {
            continue;
        }
        let value_full = eval_stages(emb, geometry, higher, &snapped.point)?;
        let v: Vec<f64> = {
            let vy = face.project(&value_full);
            value_full.iter().zip(&vy).map(|(a, b)| a - b).collect()
        };
        // Displacement validation happens in RadialConeExtension::new; a
        // boundary value drifting farther than tau means the stage above
        // exceeded its displacement budget.
        boundary.push((z_s, v));
        let _ = tau;
    }
    if boundary.is_empty() {
        return Err(Error::Geometry(format!(
            "no boundary samples found for face {face_id} at dimension {k}"
        )));
    }
    Ok(boundary)
}

/// Evaluate the cascade restricted to the given stages (used during build,
/// when only the higher stages exist).
fn eval_stages(
    emb: &Arc<Embedding>,
    geometry: &SkeletonGeometry,
    stages: &[StageFace],
    x: &[f64],
) -> Result<Vec<f64>> {
    let mut ordered: Vec<&StageFace> = stages.iter().collect();
    ordered.sort_by_key(|s| (s.k, s.face_id));
    eval_stage_refs(emb, geometry, &ordered, x)
}

fn eval_stage_refs(
    emb: &Arc<Embedding>,
    geometry: &SkeletonGeometry,
    stages: &[&StageFace],
    x: &[f64],
) -> Result<Vec<f64>> {
    for stage in stages {
        let df = emb.dist_to_face_closure(x, stage.face_id)?;
        if df > 2.0 * geometry.c[stage.k] {
            continue;
        }
        let ds = if stage.k >= 1 {
            emb.dist_to_skeleton(x, stage.k - 1)?
        } else {
            f64::INFINITY
        };
        if stage.k >= 1 && ds < geometry.c[stage.k - 1] {
            continue;
        }
        let y = emb.project_to_face(x, stage.face_id)?;
        let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        if norm(&z) <= stage.tau {
            return Ok(y);
        }
        let w = stage.extension.eval(&z)?;
        return Ok(y.iter().zip(&w).map(|(a, b)| a + b).collect());
    }
    Ok(x.to_vec())
}

/// Measure per-stage Lipschitz constants and displacements plus the global
/// defect on deterministic cone samples.
fn calibrate(proj: &AlmostProjection, seed: u64) -> Result<RhoStarCalibration> {
    let emb = &proj.emb;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top = proj.geometry.top_dim;
    let scale = 2.0 * proj.geometry.c[0];
    let samples: Vec<Vec<f64>> = (0..400)
        .map(|_| {
            let t = emb.random_qpoint(&mut rng);
            let w = emb.xi(&t).unwrap();
            let s = rng.random_range(0.05..1.0) * scale;
            let n = norm(&w).max(1e-9);
            w.iter().map(|x| x * s / n).collect()
        })
        .collect();
    let mut sup_defect = 0.0f64;
    for w in &samples {
        let out = proj.project_on_cone(w)?;
        sup_defect = sup_defect.max(dist(&out, w));
    }
    // Stagewise ledger: f_k is the cascade restricted to dimensions >= k;
    // measure each prefix on the same samples.
    let mut dims: Vec<usize> = proj.stages.iter().map(|s| s.k).collect();
    dims.sort_unstable();
    dims.dedup();
    let mut stages = Vec::new();
    for &k in dims.iter().rev() {
        let prefix: Vec<&StageFace> = proj.stages.iter().filter(|s| s.k >= k).collect();
        let outs: Vec<Vec<f64>> = samples
            .iter()
            .map(|w| eval_stage_refs(emb, &proj.geometry, &prefix, w))
            .collect::<Result<_>>()?;
        let mut lip = 0.0f64;
        let mut defect = 0.0f64;
        for (i, w) in samples.iter().enumerate() {
            defect = defect.max(dist(&outs[i], w));
            for j in (i + 1)..samples.len() {
                let dx = dist(w, &samples[j]);
                if dx > 1e-9 {
                    lip = lip.max(dist(&outs[i], &outs[j]) / dx);
                }
            }
        }
        stages.push(StageCalibration { k, face_id: usize::MAX, lip, defect });
    }
    let defect_coefficient = sup_defect / proj.mu.powf(2.0f64.powi(-(top as i32)));
    Ok(RhoStarCalibration { mu: proj.mu, stages, sup_defect, defect_coefficient })
}

/// One field's row in the energy-inequality report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyRow {
    pub lhs: f64,
    pub near: f64,
    pub far: f64,
    /// Smallest C with lhs <= (1 + C mu^{2^-top}) near + C far.
    pub required_c: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyInequalityReport {
    pub mu: f64,
    pub rows: Vec<EnergyRow>,
    pub fitted_c: f64,
}

/// Check the composition energy inequality on sampled fields u: mesh -> R^N:
/// the energy of rho* ∘ u against the near/far split of the energy of u at
/// distance mu^top from the cone.
pub fn verify_energy_inequality(
    proj: &AlmostProjection,
    mesh: &Mesh,
    fields: &[Vec<Vec<f64>>],
) -> Result<EnergyInequalityReport> {
    let top = proj.geometry.top_dim;
    let tube = proj.mu.powi(top as i32);
    let mu_pow = proj.mu.powf(2.0f64.powi(-(top as i32)));
    let mut rows = Vec::new();
    for field in fields {
        if field.len() != mesh.num_vertices() {
            return Err(Error::InvalidInput("field/mesh size mismatch".into()));
        }
        let composed: Vec<Vec<f64>> =
            field.iter().map(|w| proj.apply(w)).collect::<Result<_>>()?;
        let dists: Vec<f64> =
            field.iter().map(|w| proj.emb.dist_to_cone(w)).collect::<Result<_>>()?;
        let mut lhs = 0.0;
        let mut near = 0.0;
        let mut far = 0.0;
        for e in &mesh.edges {
            if e.weight.abs() < 1e-14 {
                continue;
            }
            let du = dist(&field[e.a], &field[e.b]).powi(2) * e.weight;
            let dv = dist(&composed[e.a], &composed[e.b]).powi(2) * e.weight;
            lhs += dv;
            if dists[e.a] <= tube && dists[e.b] <= tube {
                near += du;
            } else {
                far += du;
            }
        }
        let denom = mu_pow * near + far;
        let required_c = if lhs <= near { 0.0 } else { (lhs - near) / denom.max(1e-300) };
        rows.push(EnergyRow { lhs, near, far, required_c });
    }
    let fitted_c = rows.iter().map(|r| r.required_c).fold(0.0, f64::max);
    Ok(EnergyInequalityReport { mu: proj.mu, rows, fitted_c })
}

/// Sup-norm cone-like extension on a square: boundary values propagate
/// radially, h(x) = ||x|| * u(x / ||x||) sheetwise, with matched linear
/// interpolation along the boundary polyline. The center receives the
/// collapsed point.
pub fn cone_like_extension(
    mesh: &Arc<Mesh>,
    boundary: &[(usize, QPoint)],
) -> Result<crate::dirichlet::QField> {
    use crate::mesh::MeshKind;
    let (x0, x1, y0, y1) = match mesh.kind {
        MeshKind::BoxGrid { x0, x1, y0, y1, .. } => (x0, x1, y0, y1),
        _ => return Err(Error::InvalidInput("cone-like extension needs a box mesh".into())),
    };
    let center = [(x0 + x1) / 2.0, (y0 + y1) / 2.0];
    let half = ((x1 - x0) / 2.0).min((y1 - y0) / 2.0);
    let bvals: std::collections::HashMap<usize, &QPoint> =
        boundary.iter().map(|(v, p)| (*v, p)).collect();
    for v in &mesh.boundary {
        if !bvals.contains_key(v) {
            return Err(Error::InvalidInput(format!("missing boundary value at vertex {v}")));
        }
    }
    let (q, n) = {
        let p = boundary
            .first()
            .map(|(_, p)| p)
            .ok_or_else(|| Error::InvalidInput("empty boundary".into()))?;
        (p.q, p.n)
    };
    // Order boundary vertices by angle for interpolation along the polyline.
    let mut ring: Vec<usize> = mesh.boundary.clone();
    ring.sort_by(|&a, &b| {
        let pa = mesh.vertices[a];
        let pb = mesh.vertices[b];
        let ta = (pa[1] - center[1]).atan2(pa[0] - center[0]);
        let tb = (pb[1] - center[1]).atan2(pb[0] - center[0]);
        ta.partial_cmp(&tb).unwrap()
    });

    let eval_boundary = |dir: [f64; 2]| -> Result<QPoint> {
        // Radial ray hits the square boundary at center + dir / ||dir||_sup.
        let sup = dir[0].abs().max(dir[1].abs()).max(1e-300);
        let hit = [center[0] + dir[0] * half / sup, center[1] + dir[1] * half / sup];
        let th = (hit[1] - center[1]).atan2(hit[0] - center[0]);
        // Bracketing ring vertices by angle.
        let mut lo = ring.len() - 1;
        for (i, &v) in ring.iter().enumerate() {
            let p = mesh.vertices[v];
            let tv = (p[1] - center[1]).atan2(p[0] - center[0]);
            if tv <= th {
                lo = i;
            }
        }
        let hi = (lo + 1) % ring.len();
        let (va, vb) = (ring[lo], ring[hi]);
        let (pa, pb) = (mesh.vertices[va], mesh.vertices[vb]);
        let seg = [pb[0] - pa[0], pb[1] - pa[1]];
        let seg2 = seg[0] * seg[0] + seg[1] * seg[1];
        let t = if seg2 < 1e-300 {
            0.0
        } else {
            (((hit[0] - pa[0]) * seg[0] + (hit[1] - pa[1]) * seg[1]) / seg2).clamp(0.0, 1.0)
        };
        let (ua, ub) = (bvals[&va], bvals[&vb]);
        let m = qspace::optimal_matching(ua, ub)?;
        let pts = (0..q)
            .map(|i| {
                (0..n)
                    .map(|d| (1.0 - t) * ua.points[i][d] + t * ub.points[m[i]][d])
                    .collect()
            })
            .collect();
        QPoint::new(n, pts)
    };

    let values: Vec<QPoint> = mesh
        .vertices
        .iter()
        .map(|p| {
            let dir = [p[0] - center[0], p[1] - center[1]];
            let rho = dir[0].abs().max(dir[1].abs()) / half;
            if rho < 1e-12 {
                return Ok(QPoint::splat(q, vec![0.0; n]));
            }
            let ub = eval_boundary(dir)?;
            let pts = ub
                .points
                .iter()
                .map(|pt| pt.iter().map(|c| c * rho).collect())
                .collect();
            QPoint::new(n, pts)
        })
        .collect::<Result<_>>()?;
    crate::dirichlet::QField::new(Arc::clone(mesh), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn radial_extension_one_dimensional_cone() {
        // Cone [0, inf), b = 3, identity boundary: queries in [0, tau] give 0
        // and the displacement obeys the 10 b sqrt(tau) budget.
        let tau = 0.04;
        let boundary = vec![(vec![3.0], vec![3.0])];
        let ext = RadialConeExtension::new(boundary, 3.0, tau, 1e-9).unwrap();
        assert_eq!(ext.eval(&[0.02]).unwrap(), vec![0.0]);
        for i in 0..=30 {
            let z = 3.0 * i as f64 / 30.0;
            let w = ext.eval(&[z]).unwrap();
            assert!(
                (w[0] - z).abs() <= 10.0 * 3.0 * tau.sqrt() + 1e-9,
                "z = {z}: w = {} breaks the displacement budget",
                w[0]
            );
        }
    }

    #[test]
    fn radial_extension_zero_boundary_stays_zero() {
        let boundary = vec![(vec![3.0, 0.0], vec![0.0, 0.0])];
        // Zero boundary violates |v(x) - x| <= tau for small tau, so it is
        // rejected; with tau large enough it is admissible and the zero map
        // is feasible everywhere.
        assert!(RadialConeExtension::new(boundary.clone(), 3.0, 0.05, 1e-9).is_err());
    }

    #[test]
    fn identity_boundary_on_sector() {
        // 2-D sector cone, identity boundary samples on the arc.
        let tau = 0.02;
        let b = 3.0;
        let boundary: Vec<(Vec<f64>, Vec<f64>)> = (0..=12)
            .map(|i| {
                let th = 0.9 * i as f64 / 12.0;
                let x = vec![b * th.cos(), b * th.sin()];
                (x.clone(), x)
            })
            .collect();
        let ext = RadialConeExtension::new(boundary, b, tau, 1e-9).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let r = 0.3 * i as f64;
                let th = 0.9 * j as f64 / 10.0;
                let z = vec![r * th.cos(), r * th.sin()];
                let w = ext.eval(&z).unwrap();
                assert!(
                    dist(&w, &z) <= 10.0 * b * tau.sqrt() + 1e-9,
                    "|w - z| = {} at r = {r}",
                    dist(&w, &z)
                );
            }
        }
    }

    #[test]
    fn rho_star_identity_and_projection_regions() {
        let emb = Arc::new(Embedding::line_pair());
        let proj = build_rho_star(&emb, 0.1, 7).unwrap();
        // Deep top-face point: fixed.
        let deep = vec![0.0, 5.0];
        assert_eq!(proj.project_on_cone(&deep).unwrap(), deep);
        // Inner tube: exact face projection. Point at transverse distance
        // mu/2 from the diagonal.
        let y = 3.0;
        let z = 0.05 / 2.0f64.sqrt();
        let x = vec![y - z, y + z];
        let out = proj.project_on_cone(&x).unwrap();
        assert_abs_diff_eq!(out[0], y, epsilon = 1e-10);
        assert_abs_diff_eq!(out[1], y, epsilon = 1e-10);
        // Output of apply is always on the cone.
        let off = vec![1.7, 0.4];
        let res = proj.apply(&off).unwrap();
        assert!(emb.dist_to_cone(&res).unwrap() <= 1e-6);
    }

    #[test]
    fn rho_star_defect_shrinks_with_mu() {
        let emb = Arc::new(Embedding::line_pair());
        let mut sups = Vec::new();
        for mu in [0.2, 0.1, 0.05, 0.025] {
            let proj = build_rho_star(&emb, mu, 7).unwrap();
            sups.push((mu, proj.calibration.sup_defect));
        }
        // Log-log slope across the sweep.
        let slope = {
            let (m0, d0) = sups[0];
            let (m1, d1) = sups[sups.len() - 1];
            (d0.ln() - d1.ln()) / (m0.ln() - m1.ln())
        };
        // top = 2, so the required exponent is 2^{-2} - 0.05.
        assert!(slope >= 0.25 - 0.05, "slope {slope}, defects {sups:?}");
    }

    #[test]
    fn cone_like_extension_constant_boundary() {
        let mesh = Arc::new(Mesh::box_grid(-1.0, 1.0, -1.0, 1.0, 8, 8).unwrap());
        let a = vec![0.7, -0.2];
        let bval = QPoint::new(2, vec![a.clone(), a.clone()]).unwrap();
        let boundary: Vec<(usize, QPoint)> =
            mesh.boundary.iter().map(|&v| (v, bval.clone())).collect();
        let h = cone_like_extension(&mesh, &boundary).unwrap();
        // h(x) = ||x||_sup * a on every sheet; the center collapses to zero.
        for (vi, p) in mesh.vertices.iter().enumerate() {
            let rho = p[0].abs().max(p[1].abs());
            for pt in &h.values[vi].points {
                assert_abs_diff_eq!(pt[0], rho * a[0], epsilon = 1e-12);
                assert_abs_diff_eq!(pt[1], rho * a[1], epsilon = 1e-12);
            }
        }
        let center = mesh
            .vertices
            .iter()
            .position(|p| p[0].abs() < 1e-12 && p[1].abs() < 1e-12)
            .unwrap();
        assert_eq!(h.values[center].points, vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn cone_like_extension_single_valued_oracle() {
        // Single-valued boundary: the extension is the classical positively
        // homogeneous one, checked against direct evaluation.
        let mesh = Arc::new(Mesh::box_grid(-1.0, 1.0, -1.0, 1.0, 16, 16).unwrap());
        let g = |p: [f64; 2]| vec![p[0] * p[0] - p[1], p[0] + 0.5 * p[1]];
        let boundary: Vec<(usize, QPoint)> = mesh
            .boundary
            .iter()
            .map(|&v| (v, QPoint::new(2, vec![g(mesh.vertices[v])]).unwrap()))
            .collect();
        let h = cone_like_extension(&mesh, &boundary).unwrap();
        for (vi, p) in mesh.vertices.iter().enumerate() {
            let rho = p[0].abs().max(p[1].abs());
            if rho < 1e-9 {
                continue;
            }
            // Boundary vertices themselves must be reproduced exactly.
            if mesh.is_boundary(vi) {
                let expect = g(*p);
                assert_abs_diff_eq!(h.values[vi].points[0][0], expect[0], epsilon = 1e-9);
                assert_abs_diff_eq!(h.values[vi].points[0][1], expect[1], epsilon = 1e-9);
            }
            // Homogeneity: h scales linearly along rays.
            let hv = &h.values[vi].points[0];
            let bp = [p[0] / rho, p[1] / rho];
            let gb = g(bp);
            // The ray hits the boundary off-vertex; interpolation error is
            // second order in the boundary spacing.
            assert!(
                (hv[0] - rho * gb[0]).abs() < 0.03 && (hv[1] - rho * gb[1]).abs() < 0.03,
                "vertex {vi}: {hv:?} vs scaled {gb:?}"
            );
        }
    }
}
