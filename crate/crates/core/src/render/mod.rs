//! Multi-view rendering of per-vertex features from icosahedral viewpoints.

mod camera;
mod raster;
mod stack;

use rayon::prelude::*;

pub use camera::{
    camera_rig, look_at, perspective, resolve_up, Camera, CameraRig, DEFAULT_FAR, DEFAULT_NEAR,
    DEFAULT_UP,
};
pub use raster::{rasterize, FragmentMap};
pub use stack::{ViewStack, MVR_MAGIC};

use crate::error::{Error, Result};
use crate::geometry::TriangleMesh;

/// Camera intrinsics and placement shared by every subject of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderConfig {
    pub resolution: usize,
    pub fov_y_deg: f64,
    pub distance: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            resolution: 224,
            fov_y_deg: 60.0,
            distance: 2.5,
        }
    }
}

impl RenderConfig {
    pub fn rig(&self) -> Result<CameraRig> {
        camera_rig(self.distance, self.fov_y_deg, self.resolution)
    }
}

/// C×H×W feature image: barycentric interpolation of vertex features, no
/// lighting. Background pixels are 0.
pub fn shade_features(mesh: &TriangleMesh, fragments: &FragmentMap) -> Result<Vec<f32>> {
    let mut out = vec![
        0.0f32;
        mesh.channel_count().ok_or(Error::MissingFeatures)?
            * fragments.height()
            * fragments.width()
    ];
    shade_into(mesh, fragments, &mut out)?;
    Ok(out)
}

fn shade_into(mesh: &TriangleMesh, fragments: &FragmentMap, out: &mut [f32]) -> Result<()> {
    let features = mesh.features().ok_or(Error::MissingFeatures)?;
    let channels = features.channels();
    let plane = fragments.height() * fragments.width();
    debug_assert_eq!(out.len(), channels * plane);
    let faces = mesh.faces();
    for (p, (&fi, b)) in fragments
        .face_index()
        .iter()
        .zip(fragments.barycentric())
        .enumerate()
    {
        if fi < 0 {
            for c in 0..channels {
                out[c * plane + p] = 0.0;
            }
            continue;
        }
        let [i0, i1, i2] = faces[fi as usize];
        let (r0, r1, r2) = (features.row(i0), features.row(i1), features.row(i2));
        for c in 0..channels {
            out[c * plane + p] = (b[0] * r0[c] + b[1] * r1[c] + b[2] * r2[c]) as f32;
        }
    }
    Ok(())
}

/// Renders every camera of the rig into a V×C×H×W stack.
pub fn render_views(mesh: &TriangleMesh, rig: &CameraRig) -> Result<ViewStack> {
    let channels = mesh.channel_count().ok_or(Error::MissingFeatures)?;
    if rig.is_empty() {
        return Err(Error::Config("camera rig is empty".into()));
    }
    let res = rig.resolution;
    let mut stack = ViewStack::zeros(rig.len(), channels, res);
    let view_len = stack.view_len();
    stack
        .data_mut()
        .par_chunks_mut(view_len)
        .zip(rig.cameras.par_iter())
        .try_for_each(|(out, cam)| -> Result<()> {
            let frags = rasterize(mesh, cam, res)?;
            shade_into(mesh, &frags, out)
        })?;
    Ok(stack)
}
