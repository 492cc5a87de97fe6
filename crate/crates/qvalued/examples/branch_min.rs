//! Minimize the Dirichlet energy of the two-valued square-root boundary
//! trace on the unit disk and compare with the analytic value 2*pi.
//!
//! Run with: cargo run --release -p qvalued --example branch_min

use std::sync::Arc;
use std::time::Instant;

use qvalued::currents::fixtures::sqrt_branch_qpoint;
use qvalued::dirichlet::{dirichlet_energy, minimize_dirichlet, MinimizeOpts, QField};
use qvalued::embedding::Embedding;
use qvalued::mesh::Mesh;
use qvalued::QPoint;

fn main() {
    let emb = Arc::new(Embedding::standard(2, 2).unwrap());
    let mesh = Arc::new(Mesh::disk_polar(1.0, 64, 64).unwrap());
    let boundary: Vec<(usize, QPoint)> = mesh
        .boundary
        .iter()
        .map(|&v| (v, sqrt_branch_qpoint(&mesh.vertices[v], 1.0)))
        .collect();

    let interpolant = QField::from_fn(Arc::clone(&mesh), |p| sqrt_branch_qpoint(p, 1.0));
    let two_pi = 2.0 * std::f64::consts::PI;
    println!(
        "interpolant energy: {:.6} (analytic limit {:.6})",
        dirichlet_energy(&interpolant).unwrap().total,
        two_pi
    );

    let started = Instant::now();
    let opts = MinimizeOpts { max_sweeps: 6000, restarts: 1, ..Default::default() };
    let (minimizer, report) = minimize_dirichlet(&emb, &mesh, &boundary, &opts).unwrap();
    let rel = (report.total - two_pi).abs() / two_pi;
    println!(
        "minimizer energy:   {:.6} (relative error {:.4}, {:.1?})",
        report.total,
        rel,
        started.elapsed()
    );
    println!(
        "distance to the interpolant in L2: {:.6}",
        minimizer.l2_distance(&interpolant).unwrap()
    );
}
