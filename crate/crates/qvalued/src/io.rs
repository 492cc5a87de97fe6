//! File formats: structured-text (JSON) records for Q-points, fields on
//! meshes, simplicial currents, and face complexes. Fields serialize their
//! mesh descriptor and rebuild the mesh on load.

use std::path::Path;
use std::sync::Arc;

use crate::currents::SimplicialCurrent;
use crate::dirichlet::QField;
use crate::embedding::ConeComplex;
use crate::error::{Error, Result};
use crate::mesh::{Mesh, MeshKind};
use crate::qspace::QPoint;

impl Mesh {
    /// Rebuild a mesh from its descriptor.
    pub fn from_kind(kind: &MeshKind) -> Result<Mesh> {
        match kind {
            MeshKind::BoxGrid { x0, x1, y0, y1, nx, ny } => {
                Mesh::box_grid(*x0, *x1, *y0, *y1, *nx, *ny)
            }
            MeshKind::DiskPolar { radius, rings, sectors } => {
                Mesh::disk_polar(*radius, *rings, *sectors)
            }
            MeshKind::AnnulusPolar { r_inner, r_outer, rings, sectors } => {
                Mesh::annulus_polar(*r_inner, *r_outer, *rings, *sectors)
            }
            MeshKind::Explicit => Err(Error::InvalidInput(
                "explicit meshes carry no descriptor to rebuild from".into(),
            )),
        }
    }
}

pub fn save_qpoint(path: &Path, p: &QPoint) -> Result<()> {
    let canon = p.canonical();
    std::fs::write(path, serde_json::to_string_pretty(&canon)?)?;
    Ok(())
}

pub fn load_qpoint(path: &Path) -> Result<QPoint> {
    let text = std::fs::read_to_string(path)?;
    let p: QPoint = serde_json::from_str(&text)?;
    QPoint::new(p.n, p.points)
}

pub fn save_qfield(path: &Path, f: &QField) -> Result<()> {
    std::fs::write(path, serde_json::to_string(f)?)?;
    Ok(())
}

pub fn load_qfield(path: &Path) -> Result<QField> {
    let text = std::fs::read_to_string(path)?;
    let raw: QField = serde_json::from_str(&text)?;
    let mesh = Arc::new(Mesh::from_kind(&raw.mesh_kind)?);
    QField::new(mesh, raw.values)
}

pub fn save_current(path: &Path, t: &SimplicialCurrent) -> Result<()> {
    std::fs::write(path, serde_json::to_string(t)?)?;
    Ok(())
}

pub fn load_current(path: &Path) -> Result<SimplicialCurrent> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn save_complex(path: &Path, c: &ConeComplex) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(c)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qspace;

    #[test]
    fn qfield_roundtrip_rebuilds_mesh() {
        let dir = std::env::temp_dir().join("qvalued_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let mesh = Arc::new(Mesh::disk_polar(1.0, 6, 12).unwrap());
        let f = QField::from_fn(Arc::clone(&mesh), |p| {
            QPoint::new(1, vec![vec![p[0]], vec![p[1]]]).unwrap()
        });
        let path = dir.join("field.json");
        save_qfield(&path, &f).unwrap();
        let g = load_qfield(&path).unwrap();
        assert_eq!(g.mesh.num_vertices(), f.mesh.num_vertices());
        for (a, b) in f.values.iter().zip(&g.values) {
            assert!(qspace::metric_g(a, b).unwrap() < 1e-15);
        }
    }

    #[test]
    fn current_roundtrip_is_exact() {
        let dir = std::env::temp_dir().join("qvalued_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let mesh = Arc::new(Mesh::unit_square(4).unwrap());
        let t = crate::currents::fixtures::flat_sheets(&mesh, &[vec![0.25], vec![1.5]]).unwrap();
        let path = dir.join("current.json");
        save_current(&path, &t).unwrap();
        let back = load_current(&path).unwrap();
        assert_eq!(back.cells.len(), t.cells.len());
        assert_eq!(
            crate::currents::mass(&back, None),
            crate::currents::mass(&t, None)
        );
    }
}
