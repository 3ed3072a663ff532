use std::collections::HashMap;

use super::{edge_key, validate_mesh, TriangleMesh};
use crate::error::{Error, Result};
use crate::math::{add, cross, dot, normalize, sub, Vec3};

pub const GOLDEN_RATIO: f64 = 1.618_033_988_749_895;

/// Number of midpoint subdivision steps applied to the icosahedron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SubdivisionLevel(u32);

impl SubdivisionLevel {
    pub const MAX: u32 = 8;

    pub fn new(level: u32) -> Result<Self> {
        if level > Self::MAX {
            return Err(Error::LevelTooLarge(level));
        }
        Ok(Self(level))
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

/// Regular icosahedron with unit circumradius. Vertex order is
/// (0,±1,±φ), (±1,±φ,0), (±φ,0,±1), sign pattern (+,+),(+,−),(−,+),(−,−).
pub fn icosahedron() -> TriangleMesh {
    let phi = GOLDEN_RATIO;
    let mut raw: Vec<Vec3> = Vec::with_capacity(12);
    for (s1, s2) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
        raw.push([0.0, s1, s2 * phi]);
    }
    for (s1, s2) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
        raw.push([s1, s2 * phi, 0.0]);
    }
    for (s1, s2) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
        raw.push([s1 * phi, 0.0, s2]);
    }
    let vertices: Vec<Vec3> = raw.iter().map(|&v| normalize(v)).collect();

    // Unnormalized edge length is exactly 2; every other vertex pair is
    // farther apart (2φ or 2√(1+φ²)).
    let is_edge = |a: usize, b: usize| {
        let d = sub(raw[a], raw[b]);
        (dot(d, d) - 4.0).abs() < 1e-9
    };
    let mut faces = Vec::with_capacity(20);
    for i in 0..12 {
        for j in i + 1..12 {
            if !is_edge(i, j) {
                continue;
            }
            for k in j + 1..12 {
                if is_edge(i, k) && is_edge(j, k) {
                    faces.push(orient_outward(&vertices, [i, j, k]));
                }
            }
        }
    }
    debug_assert_eq!(faces.len(), 20);
    TriangleMesh::from_parts_unchecked(vertices, faces)
}

fn orient_outward(vertices: &[Vec3], f: [usize; 3]) -> [usize; 3] {
    let [a, b, c] = f.map(|i| vertices[i]);
    let centroid = add(add(a, b), c);
    if dot(cross(sub(b, a), sub(c, a)), centroid) < 0.0 {
        [f[0], f[2], f[1]]
    } else {
        f
    }
}

/// Splits every face into four at edge midpoints and reprojects all
/// vertices to the unit sphere, `levels` times.
pub fn subdivide(mesh: &TriangleMesh, levels: SubdivisionLevel) -> Result<TriangleMesh> {
    if mesh.features().is_some() {
        return Err(Error::InvalidMesh(
            "cannot subdivide a mesh with features attached".into(),
        ));
    }
    if levels.get() == 0 {
        return Ok(mesh.clone());
    }
    let report = validate_mesh(mesh);
    if !report.is_closed_manifold() {
        return Err(Error::InvalidMesh(
            "subdivision requires a closed 2-manifold mesh".into(),
        ));
    }

    let mut vertices: Vec<Vec3> = mesh.vertices().iter().map(|&v| normalize(v)).collect();
    let mut faces = mesh.faces().to_vec();
    for _ in 0..levels.get() {
        let mut midpoints: HashMap<(usize, usize), usize> =
            HashMap::with_capacity(faces.len() * 3 / 2);
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vec3>| -> usize {
            *midpoints.entry(edge_key(a, b)).or_insert_with(|| {
                let m = normalize(add(vertices[a], vertices[b]));
                vertices.push(m);
                vertices.len() - 1
            })
        };
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    Ok(TriangleMesh::from_parts_unchecked(vertices, faces))
}

/// Icosahedron subdivided `level` times.
pub fn icosphere(level: SubdivisionLevel) -> TriangleMesh {
    subdivide(&icosahedron(), level).expect("icosahedron is a closed manifold")
}
