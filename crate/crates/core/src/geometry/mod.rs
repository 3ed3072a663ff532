//! Triangle meshes on the unit sphere: construction, subdivision, validation
//! and per-vertex feature attachment.

mod icosphere;
mod io;

use std::collections::{BTreeMap, HashMap};

pub use icosphere::{icosahedron, icosphere, subdivide, SubdivisionLevel, GOLDEN_RATIO};
pub use io::{read_features_csv, read_obj, write_features_csv, write_obj};

use crate::error::{Error, Result};
use crate::math::{cross, dot, sub, Vec3};

/// Dense per-vertex feature matrix, `rows × channels`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::Shape(
                "feature matrix needs at least one channel".into(),
            ));
        }
        if data.len() != rows * channels {
            return Err(Error::Shape(format!(
                "feature data has {} values, expected {rows}×{channels}",
                data.len()
            )));
        }
        Ok(Self {
            rows,
            channels,
            data,
        })
    }

    pub fn zeros(rows: usize, channels: usize) -> Self {
        Self {
            rows,
            channels,
            data: vec![0.0; rows * channels],
        }
    }

    /// Builds a matrix by evaluating `f(row)` for every row.
    pub fn from_fn(
        rows: usize,
        channels: usize,
        mut f: impl FnMut(usize) -> Vec<f64>,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * channels);
        for r in 0..rows {
            let row = f(r);
            if row.len() != channels {
                return Err(Error::Shape(format!(
                    "row {r} has {} values, expected {channels}",
                    row.len()
                )));
            }
            data.extend_from_slice(&row);
        }
        Self::new(rows, channels, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.channels..(r + 1) * self.channels]
    }

    #[inline]
    pub fn get(&self, row: usize, channel: usize) -> f64 {
        self.data[row * self.channels + channel]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Vertices, counter-clockwise faces and optional per-vertex features.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    features: Option<FeatureMatrix>,
}

impl TriangleMesh {
    /// Checks index range and face degeneracy.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&i| i >= n) {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} references a vertex outside 0..{n}"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} is degenerate: {f:?}"
                )));
            }
        }
        if let Some((vi, _)) = vertices
            .iter()
            .enumerate()
            .find(|(_, v)| v.iter().any(|c| !c.is_finite()))
        {
            return Err(Error::InvalidMesh(format!("vertex {vi} is not finite")));
        }
        Ok(Self {
            vertices,
            faces,
            features: None,
        })
    }

    /// Skips all checks. Used to inspect broken meshes with [`validate_mesh`].
    pub fn from_parts_unchecked(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Self {
        Self {
            vertices,
            faces,
            features: None,
        }
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn features(&self) -> Option<&FeatureMatrix> {
        self.features.as_ref()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn channel_count(&self) -> Option<usize> {
        self.features.as_ref().map(FeatureMatrix::channels)
    }

    pub fn without_features(mut self) -> Self {
        self.features = None;
        self
    }

    /// Applies `f` to every vertex position, keeping topology and features.
    pub fn map_vertices(&self, f: impl Fn(Vec3) -> Vec3) -> Self {
        Self {
            vertices: self.vertices.iter().map(|&v| f(v)).collect(),
            faces: self.faces.clone(),
            features: self.features.clone(),
        }
    }

    /// Unique undirected edges as sorted index pairs, in first-seen order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for f in &self.faces {
            for k in 0..3 {
                let key = edge_key(f[k], f[(k + 1) % 3]);
                if seen.insert(key, ()).is_none() {
                    out.push(key);
                }
            }
        }
        out
    }
}

#[inline]
pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Stores `features` on the mesh after checking row count and finiteness.
pub fn attach_features(mesh: TriangleMesh, features: FeatureMatrix) -> Result<TriangleMesh> {
    if features.rows() != mesh.num_vertices() {
        return Err(Error::FeatureRowMismatch {
            rows: features.rows(),
            vertices: mesh.num_vertices(),
        });
    }
    if let Some(pos) = features.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteFeature {
            row: pos / features.channels(),
            channel: pos % features.channels(),
        });
    }
    Ok(TriangleMesh {
        features: Some(features),
        ..mesh
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub vertex_count: usize,
    pub edge_count: usize,
    pub face_count: usize,
    pub euler_characteristic: i64,
    /// Pairs `(first, duplicate)` of faces covering the same vertex set.
    pub duplicate_faces: Vec<(usize, usize)>,
    pub degenerate_faces: Vec<usize>,
    pub out_of_range_faces: Vec<usize>,
    /// incidence count → number of edges with that many incident faces
    pub edge_incidence: BTreeMap<usize, usize>,
    pub boundary_edges: Vec<(usize, usize)>,
    pub nonmanifold_edges: Vec<(usize, usize)>,
}

impl ValidationReport {
    /// Closed 2-manifold: every edge shared by exactly two faces and no
    /// broken faces.
    pub fn is_closed_manifold(&self) -> bool {
        self.degenerate_faces.is_empty()
            && self.out_of_range_faces.is_empty()
            && self.duplicate_faces.is_empty()
            && self.boundary_edges.is_empty()
            && self.nonmanifold_edges.is_empty()
    }
}

pub fn validate_mesh(mesh: &TriangleMesh) -> ValidationReport {
    let n = mesh.num_vertices();
    let mut degenerate_faces = Vec::new();
    let mut out_of_range_faces = Vec::new();
    let mut duplicate_faces = Vec::new();
    let mut face_keys: HashMap<[usize; 3], usize> = HashMap::new();
    let mut incidence: HashMap<(usize, usize), usize> = HashMap::new();
    let mut edge_order = Vec::new();

    for (fi, f) in mesh.faces().iter().enumerate() {
        if f.iter().any(|&i| i >= n) {
            out_of_range_faces.push(fi);
        }
        if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
            degenerate_faces.push(fi);
        }
        let mut key = *f;
        key.sort_unstable();
        if let Some(&first) = face_keys.get(&key) {
            duplicate_faces.push((first, fi));
        } else {
            face_keys.insert(key, fi);
        }
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            if a == b {
                continue;
            }
            let e = edge_key(a, b);
            let count = incidence.entry(e).or_insert(0);
            if *count == 0 {
                edge_order.push(e);
            }
            *count += 1;
        }
    }

    let mut edge_incidence = BTreeMap::new();
    let mut boundary_edges = Vec::new();
    let mut nonmanifold_edges = Vec::new();
    for e in &edge_order {
        let c = incidence[e];
        *edge_incidence.entry(c).or_insert(0) += 1;
        match c {
            1 => boundary_edges.push(*e),
            2 => {}
            _ => nonmanifold_edges.push(*e),
        }
    }

    let edge_count = edge_order.len();
    ValidationReport {
        vertex_count: n,
        edge_count,
        face_count: mesh.num_faces(),
        euler_characteristic: n as i64 - edge_count as i64 + mesh.num_faces() as i64,
        duplicate_faces,
        degenerate_faces,
        out_of_range_faces,
        edge_incidence,
        boundary_edges,
        nonmanifold_edges,
    }
}

/// Faces whose normal points away from the origin (for star-shaped meshes
/// around the origin).
pub fn outward_facing(mesh: &TriangleMesh) -> bool {
    mesh.faces().iter().all(|f| {
        let [a, b, c] = f.map(|i| mesh.vertices()[i]);
        let centroid = [
            (a[0] + b[0] + c[0]) / 3.0,
            (a[1] + b[1] + c[1]) / 3.0,
            (a[2] + b[2] + c[2]) / 3.0,
        ];
        dot(cross(sub(b, a), sub(c, a)), centroid) > 0.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn attach_features_round_trips() {
        let mesh = icosahedron();
        let feats = FeatureMatrix::from_fn(12, 3, |r| vec![r as f64, -(r as f64), 0.5]).unwrap();
        let with = attach_features(mesh.clone(), feats.clone()).unwrap();
        assert_eq!(with.features(), Some(&feats));
        assert_eq!(with.vertices(), mesh.vertices());
        assert_eq!(with.faces(), mesh.faces());
    }

    #[test]
    fn attach_zero_single_channel() {
        let with = attach_features(icosahedron(), FeatureMatrix::zeros(12, 1)).unwrap();
        assert_eq!(with.channel_count(), Some(1));
        assert!(with
            .features()
            .unwrap()
            .as_slice()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn attach_rejects_row_mismatch() {
        let err = attach_features(icosahedron(), FeatureMatrix::zeros(11, 4)).unwrap_err();
        assert!(matches!(
            err,
            Error::FeatureRowMismatch {
                rows: 11,
                vertices: 12
            }
        ));
    }

    #[test]
    fn attach_rejects_nan_with_row() {
        let mut data = vec![0.0; 12 * 2];
        data[7 * 2 + 1] = f64::NAN;
        let feats = FeatureMatrix::new(12, 2, data).unwrap();
        let err = attach_features(icosahedron(), feats).unwrap_err();
        assert!(matches!(
            err,
            Error::NonFiniteFeature { row: 7, channel: 1 }
        ));
    }

    #[test]
    fn validate_icosahedron() {
        let report = validate_mesh(&icosahedron());
        assert_eq!(report.euler_characteristic, 2);
        assert_eq!(report.edge_incidence, BTreeMap::from([(2, 30)]));
        assert!(report.is_closed_manifold());
    }

    #[test]
    fn validate_reports_boundary_after_face_removal() {
        let ico = icosahedron();
        let faces = ico.faces()[1..].to_vec();
        let open = TriangleMesh::new(ico.vertices().to_vec(), faces).unwrap();
        let report = validate_mesh(&open);
        assert_eq!(report.boundary_edges.len(), 3);
        assert_eq!(report.edge_incidence.get(&1), Some(&3));
        assert!(!report.is_closed_manifold());
    }

    #[test]
    fn validate_flags_degenerate_face() {
        let mesh = TriangleMesh::from_parts_unchecked(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 0, 1], [0, 1, 2]],
        );
        let report = validate_mesh(&mesh);
        assert_eq!(report.degenerate_faces, vec![0]);
    }

    #[test]
    fn validate_flags_duplicate_face() {
        let mesh = TriangleMesh::from_parts_unchecked(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2], [1, 2, 0]],
        );
        assert_eq!(validate_mesh(&mesh).duplicate_faces, vec![(0, 1)]);
    }

    #[test]
    fn new_rejects_out_of_range() {
        assert!(TriangleMesh::new(vec![[0.0; 3]; 2], vec![[0, 1, 2]]).is_err());
    }
}
