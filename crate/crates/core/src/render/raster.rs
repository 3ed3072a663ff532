//! Z-buffered triangle rasterization producing the pixel-to-face map.

use rayon::prelude::*;

use super::camera::Camera;
use crate::error::{Error, Result};
use crate::geometry::TriangleMesh;
use crate::math::{mat4_mul_point, Vec3};

/// Per-pixel visible face, perspective-correct barycentrics and view depth.
/// Row 0 is the top of the image.
#[derive(Debug, Clone, PartialEq)]
pub struct FragmentMap {
    height: usize,
    width: usize,
    face_index: Vec<i32>,
    barycentric: Vec<[f64; 3]>,
    depth: Vec<f64>,
}

impl FragmentMap {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn face_index(&self) -> &[i32] {
        &self.face_index
    }

    pub fn barycentric(&self) -> &[[f64; 3]] {
        &self.barycentric
    }

    pub fn depth(&self) -> &[f64] {
        &self.depth
    }

    #[inline]
    pub fn face_at(&self, y: usize, x: usize) -> i32 {
        self.face_index[y * self.width + x]
    }

    /// Fraction of pixels covered by some face.
    pub fn coverage(&self) -> f64 {
        let hit = self.face_index.iter().filter(|&&f| f >= 0).count();
        hit as f64 / self.face_index.len() as f64
    }
}

/// Screen-space triangle ready for scan conversion. `attrs` holds the
/// barycentric coordinates of each corner relative to the source face
/// (identity unless the face was clipped).
#[derive(Clone, Copy)]
struct Setup {
    face: i32,
    screen: [[f64; 2]; 3],
    inv_w: [f64; 3],
    attrs: [[f64; 3]; 3],
    area: f64,
    x_range: (usize, usize),
}

const IDENTITY_ATTRS: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

// Inclusive edge test slack, relative to twice the triangle's screen area.
const EDGE_EPS: f64 = 1e-12;

#[inline]
fn edge(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

/// Clips a view-space triangle (w = distance along the view axis) against
/// the near plane, carrying barycentric attributes.
fn clip_near(w: [f64; 3], pos: [Vec3; 3], near: f64) -> Vec<(Vec3, f64, [f64; 3])> {
    let verts: Vec<(Vec3, f64, [f64; 3])> =
        (0..3).map(|k| (pos[k], w[k], IDENTITY_ATTRS[k])).collect();
    let mut out = Vec::with_capacity(4);
    for k in 0..3 {
        let cur = verts[k];
        let nxt = verts[(k + 1) % 3];
        let cur_in = cur.1 >= near;
        let nxt_in = nxt.1 >= near;
        if cur_in {
            out.push(cur);
        }
        if cur_in != nxt_in {
            let t = (near - cur.1) / (nxt.1 - cur.1);
            let lerp = |a: f64, b: f64| a + t * (b - a);
            out.push((
                [
                    lerp(cur.0[0], nxt.0[0]),
                    lerp(cur.0[1], nxt.0[1]),
                    lerp(cur.0[2], nxt.0[2]),
                ],
                near,
                [
                    lerp(cur.2[0], nxt.2[0]),
                    lerp(cur.2[1], nxt.2[1]),
                    lerp(cur.2[2], nxt.2[2]),
                ],
            ));
        }
    }
    out
}

fn setup_triangles(mesh: &TriangleMesh, camera: &Camera, resolution: usize) -> Vec<Setup> {
    let view = camera.view();
    let focal = camera.focal();
    let (near, far) = (camera.near(), camera.far());
    let res = resolution as f64;
    let to_screen = |p: Vec3, w: f64| -> [f64; 2] {
        let x_ndc = focal * p[0] / w;
        let y_ndc = focal * p[1] / w;
        [(x_ndc + 1.0) * 0.5 * res, (1.0 - y_ndc) * 0.5 * res]
    };

    let view_pos: Vec<Vec3> = mesh
        .vertices()
        .iter()
        .map(|&v| {
            let p = mat4_mul_point(view, v);
            [p[0], p[1], p[2]]
        })
        .collect();

    let mut setups = Vec::with_capacity(mesh.num_faces());
    let mut push = |face: i32, corners: [(Vec3, f64, [f64; 3]); 3]| {
        let screen = corners.map(|(p, w, _)| to_screen(p, w));
        let area = edge(screen[0], screen[1], screen[2]);
        if !area.is_finite() || area == 0.0 {
            return;
        }
        let xmin = screen.iter().map(|s| s[0]).fold(f64::INFINITY, f64::min);
        let xmax = screen
            .iter()
            .map(|s| s[0])
            .fold(f64::NEG_INFINITY, f64::max);
        if xmax < 0.0 || xmin > res {
            return;
        }
        let x0 = (xmin - 0.5).ceil().max(0.0) as usize;
        let x1 = ((xmax - 0.5).floor().min(res - 1.0)).max(-1.0);
        if x1 < 0.0 || x0 > x1 as usize {
            return;
        }
        setups.push(Setup {
            face,
            screen,
            inv_w: corners.map(|(_, w, _)| 1.0 / w),
            attrs: corners.map(|(_, _, a)| a),
            area,
            x_range: (x0, x1 as usize),
        });
    };

    for (fi, f) in mesh.faces().iter().enumerate() {
        let pos = f.map(|i| view_pos[i]);
        let w = pos.map(|p| -p[2]);
        if w.iter().all(|&d| d < near) || w.iter().all(|&d| d > far) {
            continue;
        }
        let face = fi as i32;
        if w.iter().all(|&d| d >= near) {
            push(face, [0, 1, 2].map(|k| (pos[k], w[k], IDENTITY_ATTRS[k])));
        } else {
            let poly = clip_near(w, pos, near);
            for k in 1..poly.len().saturating_sub(1) {
                push(face, [poly[0], poly[k], poly[k + 1]]);
            }
        }
    }
    setups
}

/// Rasterizes `mesh` as seen from `camera` into a `resolution²` fragment map.
/// Pixels are sampled at their centers; the nearest surface wins, equal
/// depths go to the lower face index.
pub fn rasterize(mesh: &TriangleMesh, camera: &Camera, resolution: usize) -> Result<FragmentMap> {
    if mesh.num_faces() == 0 {
        return Err(Error::InvalidMesh(
            "cannot rasterize a mesh without faces".into(),
        ));
    }
    if resolution == 0 {
        return Err(Error::Config("resolution must be positive".into()));
    }
    let setups = setup_triangles(mesh, camera, resolution);

    // Bucket triangles by the pixel rows whose centers they can touch.
    let mut rows: Vec<Vec<u32>> = vec![Vec::new(); resolution];
    for (si, s) in setups.iter().enumerate() {
        let ymin = s.screen.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
        let ymax = s
            .screen
            .iter()
            .map(|p| p[1])
            .fold(f64::NEG_INFINITY, f64::max);
        let y0 = (ymin - 0.5).ceil().max(0.0);
        let y1 = (ymax - 0.5).floor().min(resolution as f64 - 1.0);
        if y1 < y0 {
            continue;
        }
        for row in &mut rows[y0 as usize..=y1 as usize] {
            row.push(si as u32);
        }
    }

    let n = resolution * resolution;
    let mut face_index = vec![-1i32; n];
    let mut barycentric = vec![[0.0f64; 3]; n];
    let mut depth = vec![f64::INFINITY; n];
    let far = camera.far();

    face_index
        .par_chunks_mut(resolution)
        .zip(barycentric.par_chunks_mut(resolution))
        .zip(depth.par_chunks_mut(resolution))
        .zip(rows.par_iter())
        .enumerate()
        .for_each(|(y, (((faces_row, bary_row), depth_row), candidates))| {
            let py = y as f64 + 0.5;
            for &si in candidates {
                let s = &setups[si as usize];
                let inv_area = 1.0 / s.area;
                let slack = EDGE_EPS;
                for x in s.x_range.0..=s.x_range.1 {
                    let p = [x as f64 + 0.5, py];
                    let l0 = edge(s.screen[1], s.screen[2], p) * inv_area;
                    let l1 = edge(s.screen[2], s.screen[0], p) * inv_area;
                    let l2 = edge(s.screen[0], s.screen[1], p) * inv_area;
                    if l0 < -slack || l1 < -slack || l2 < -slack {
                        continue;
                    }
                    let q = [l0 * s.inv_w[0], l1 * s.inv_w[1], l2 * s.inv_w[2]];
                    let qsum = q[0] + q[1] + q[2];
                    if !(qsum > 0.0) {
                        continue;
                    }
                    let z = 1.0 / qsum;
                    if z > far {
                        continue;
                    }
                    let current = depth_row[x];
                    let wins = z < current || (z == current && s.face < faces_row[x]);
                    if !wins {
                        continue;
                    }
                    let mut b = [0.0; 3];
                    for k in 0..3 {
                        let a = (q[k] / qsum).max(0.0);
                        for (j, bj) in b.iter_mut().enumerate() {
                            *bj += a * s.attrs[k][j];
                        }
                    }
                    let bsum = b[0] + b[1] + b[2];
                    depth_row[x] = z;
                    faces_row[x] = s.face;
                    bary_row[x] = [b[0] / bsum, b[1] / bsum, b[2] / bsum];
                }
            }
        });

    Ok(FragmentMap {
        height: resolution,
        width: resolution,
        face_index,
        barycentric,
        depth,
    })
}
