use crate::error::{Error, Result};
use crate::geometry::icosahedron;
use crate::math::{cross, dot, mat3_mul_vec, norm, normalize, scale, sub, Mat3, Mat4, Vec3};

pub const DEFAULT_NEAR: f64 = 0.01;
pub const DEFAULT_FAR: f64 = 10.0;

/// Default up direction for the rig; never parallel to an icosahedron vertex.
pub const DEFAULT_UP: Vec3 = [0.0, 0.0, 1.0];

const UP_DEGENERACY: f64 = 0.999;

/// Perspective pinhole camera looking at `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    position: Vec3,
    target: Vec3,
    up_hint: Vec3,
    fov_y_deg: f64,
    near: f64,
    far: f64,
    view: Mat4,
    projection: Mat4,
}

impl Camera {
    pub fn new(
        position: Vec3,
        target: Vec3,
        up_hint: Vec3,
        fov_y_deg: f64,
        near: f64,
        far: f64,
    ) -> Result<Self> {
        if !(fov_y_deg > 0.0 && fov_y_deg < 180.0) {
            return Err(Error::InvalidCamera(format!(
                "fov_y {fov_y_deg}° outside (0°, 180°)"
            )));
        }
        if !(near > 0.0 && near < far) {
            return Err(Error::InvalidCamera(format!(
                "need 0 < near < far, got {near}, {far}"
            )));
        }
        if norm(up_hint) == 0.0 {
            return Err(Error::InvalidCamera("up hint is the zero vector".into()));
        }
        let view = look_at(position, target, up_hint)?;
        Ok(Self {
            position,
            target,
            up_hint,
            fov_y_deg,
            near,
            far,
            view,
            projection: perspective(fov_y_deg, 1.0, near, far),
        })
    }

    pub fn position(&self) -> Vec3 {
        self.position
    }

    pub fn target(&self) -> Vec3 {
        self.target
    }

    pub fn up_hint(&self) -> Vec3 {
        self.up_hint
    }

    pub fn fov_y_deg(&self) -> f64 {
        self.fov_y_deg
    }

    pub fn near(&self) -> f64 {
        self.near
    }

    pub fn far(&self) -> f64 {
        self.far
    }

    pub fn view(&self) -> &Mat4 {
        &self.view
    }

    pub fn projection(&self) -> &Mat4 {
        &self.projection
    }

    /// Unit vector from the camera towards its target.
    pub fn forward(&self) -> Vec3 {
        normalize(sub(self.target, self.position))
    }

    /// `1 / tan(fov_y / 2)`, the projection's focal scale.
    pub fn focal(&self) -> f64 {
        self.projection[1][1]
    }

    /// Same intrinsics, pose transformed by the rotation `r`.
    pub fn rotated(&self, r: &Mat3) -> Result<Self> {
        Self::new(
            mat3_mul_vec(r, self.position),
            mat3_mul_vec(r, self.target),
            mat3_mul_vec(r, self.up_hint),
            self.fov_y_deg,
            self.near,
            self.far,
        )
    }
}

/// Replaces an up hint nearly parallel to `forward` with +X, or +Y if +X is
/// degenerate as well.
pub fn resolve_up(forward: Vec3, up_hint: Vec3) -> Vec3 {
    let up = normalize(up_hint);
    if dot(forward, up).abs() <= UP_DEGENERACY {
        return up;
    }
    let x = [1.0, 0.0, 0.0];
    if dot(forward, x).abs() <= UP_DEGENERACY {
        x
    } else {
        [0.0, 1.0, 0.0]
    }
}

/// Right-handed view matrix; the camera looks down its local −Z axis.
pub fn look_at(position: Vec3, target: Vec3, up_hint: Vec3) -> Result<Mat4> {
    let dir = sub(target, position);
    if norm(dir) == 0.0 {
        return Err(Error::InvalidCamera("camera position equals target".into()));
    }
    let f = normalize(dir);
    let up = resolve_up(f, up_hint);
    let s = normalize(cross(f, up));
    let u = cross(s, f);
    Ok([
        [s[0], s[1], s[2], -dot(s, position)],
        [u[0], u[1], u[2], -dot(u, position)],
        [-f[0], -f[1], -f[2], dot(f, position)],
        [0.0, 0.0, 0.0, 1.0],
    ])
}

/// OpenGL-style perspective projection (clip w = −z_view).
pub fn perspective(fov_y_deg: f64, aspect: f64, near: f64, far: f64) -> Mat4 {
    let f = 1.0 / (fov_y_deg.to_radians() / 2.0).tan();
    [
        [f / aspect, 0.0, 0.0, 0.0],
        [0.0, f, 0.0, 0.0],
        [
            0.0,
            0.0,
            (far + near) / (near - far),
            2.0 * far * near / (near - far),
        ],
        [0.0, 0.0, -1.0, 0.0],
    ]
}

/// A set of cameras sharing one square output resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraRig {
    pub cameras: Vec<Camera>,
    pub resolution: usize,
}

impl CameraRig {
    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    pub fn rotated(&self, r: &Mat3) -> Result<Self> {
        Ok(Self {
            cameras: self
                .cameras
                .iter()
                .map(|c| c.rotated(r))
                .collect::<Result<_>>()?,
            resolution: self.resolution,
        })
    }
}

/// One camera per icosahedron vertex at `radius_multiplier` × vertex,
/// looking at the origin, in canonical vertex order.
pub fn camera_rig(radius_multiplier: f64, fov_y_deg: f64, resolution: usize) -> Result<CameraRig> {
    if !(radius_multiplier > 1.0) || !radius_multiplier.is_finite() {
        return Err(Error::InvalidCamera(format!(
            "radius multiplier {radius_multiplier} must exceed 1 (camera outside the unit sphere)"
        )));
    }
    if resolution < 16 {
        return Err(Error::InvalidCamera(format!(
            "resolution {resolution} below 16"
        )));
    }
    let cameras = icosahedron()
        .vertices()
        .iter()
        .map(|&v| {
            Camera::new(
                scale(v, radius_multiplier),
                [0.0; 3],
                DEFAULT_UP,
                fov_y_deg,
                DEFAULT_NEAR,
                DEFAULT_FAR,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CameraRig {
        cameras,
        resolution,
    })
}
