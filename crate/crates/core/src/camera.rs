//! Pinhole camera algebra, ray generation, and epipolar geometry.
//!
//! Conventions, fixed once: right-handed world with +z up; the camera
//! looks down its own +z axis with x right and y down, so projection is
//! (fx X/Z + cx, fy Y/Z + cy) with pixel y growing downward. Poses are
//! world-to-camera. All camera math runs at f64.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CameraError {
    #[error("degenerate look-at: |elevation| >= 90 degrees aligns view with the up axis")]
    DegenerateUp,
    #[error("invalid intrinsics: {0}")]
    BadIntrinsics(String),
    #[error("radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("point has non-positive depth {0} in the camera frame")]
    BehindCamera(f64),
    #[error("pixel ({0}, {1}) outside image bounds {2}x{3}")]
    PixelOutOfBounds(f64, f64, usize, usize),
    #[error("camera centers coincide; epipolar geometry undefined")]
    CoincidentCenters,
    #[error("rotation is not orthonormal (max deviation {0:.2e})")]
    NotOrthonormal(f64),
    #[error("feature grid {0}x{1} does not divide image {2}x{3}")]
    GridMismatch(usize, usize, usize, usize),
}

pub type Result<T> = std::result::Result<T, CameraError>;

/// Pinhole projection parameters, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        if fx <= 0.0 || fy <= 0.0 {
            return Err(CameraError::BadIntrinsics(format!("focal lengths ({fx}, {fy})")));
        }
        if cx < 0.0 || cx >= width as f64 || cy < 0.0 || cy >= height as f64 {
            return Err(CameraError::BadIntrinsics(format!(
                "principal point ({cx}, {cy}) outside {width}x{height}"
            )));
        }
        Ok(Intrinsics { fx, fy, cx, cy, width, height })
    }

    /// Square image with the principal point at the center and a focal
    /// length equal to the image side (about 53 degrees full field).
    pub fn square(side: usize) -> Intrinsics {
        Intrinsics {
            fx: side as f64,
            fy: side as f64,
            cx: side as f64 / 2.0,
            cy: side as f64 / 2.0,
            width: side,
            height: side,
        }
    }

    /// Rescale to a different resolution, preserving the field of view.
    pub fn scaled_to(&self, width: usize, height: usize) -> Intrinsics {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Intrinsics {
            fx: self.fx * sx,
            fy: self.fy * sy,
            cx: self.cx * sx,
            cy: self.cy * sy,
            width,
            height,
        }
    }
}

/// World-to-camera rigid transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl CameraPose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let dev = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if dev > 1e-6 || (rotation.determinant() - 1.0).abs() > 1e-6 {
            return Err(CameraError::NotOrthonormal(dev));
        }
        Ok(CameraPose { rotation, translation })
    }

    pub fn identity() -> CameraPose {
        CameraPose { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    /// Camera center in world coordinates: c = -R^T t.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    /// World point into the camera frame.
    pub fn to_camera(&self, point: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * point + self.translation
    }

    /// Camera-frame direction into world coordinates.
    pub fn direction_to_world(&self, dir: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * dir
    }
}

/// A ray in world coordinates with unit direction.
#[derive(Debug, Clone, Copy)]
pub struct Ray {
    pub origin: Vector3<f64>,
    pub direction: Vector3<f64>,
}

impl Ray {
    pub fn new(origin: Vector3<f64>, direction: Vector3<f64>) -> Ray {
        let n = direction.norm();
        debug_assert!(n > 0.0);
        Ray { origin, direction: direction / n }
    }

    pub fn point_at(&self, t: f64) -> Vector3<f64> {
        self.origin + self.direction * t
    }
}

/// Orbit camera: center at radius * (cos e cos a, cos e sin a, sin e),
/// optical axis aimed at the world origin, +z as the up reference.
pub fn look_at_pose(azimuth_deg: f64, elevation_deg: f64, radius: f64) -> Result<CameraPose> {
    if radius <= 0.0 {
        return Err(CameraError::BadRadius(radius));
    }
    if elevation_deg.abs() >= 90.0 {
        return Err(CameraError::DegenerateUp);
    }
    let az = azimuth_deg.to_radians();
    let el = elevation_deg.to_radians();
    let center = radius * Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
    let forward = (-center).normalize();
    let up = Vector3::z();
    // x right, y down, z forward; right-handed
    let x_axis = forward.cross(&up).normalize();
    let y_axis = forward.cross(&x_axis);
    let rotation = Matrix3::from_rows(&[x_axis.transpose(), y_axis.transpose(), forward.transpose()]);
    let translation = -(rotation * center);
    CameraPose::new(rotation, translation)
}

/// Project a world point through a pose and intrinsics. Errors when the
/// point is at or behind the camera plane.
pub fn project(point: &Vector3<f64>, pose: &CameraPose, intr: &Intrinsics) -> Result<[f64; 2]> {
    let pc = pose.to_camera(point);
    if pc.z <= 0.0 {
        return Err(CameraError::BehindCamera(pc.z));
    }
    Ok([intr.fx * pc.x / pc.z + intr.cx, intr.fy * pc.y / pc.z + intr.cy])
}

/// World-space ray through a pixel. The pixel must lie inside the image.
pub fn ray_for_pixel(pixel: [f64; 2], pose: &CameraPose, intr: &Intrinsics) -> Result<Ray> {
    let [px, py] = pixel;
    if px < 0.0 || px > intr.width as f64 || py < 0.0 || py > intr.height as f64 {
        return Err(CameraError::PixelOutOfBounds(px, py, intr.width, intr.height));
    }
    let dir_cam = Vector3::new((px - intr.cx) / intr.fx, (py - intr.cy) / intr.fy, 1.0);
    let dir_world = pose.direction_to_world(&dir_cam);
    Ok(Ray::new(pose.center(), dir_world))
}

/// Transform mapping camera-i coordinates into camera-j coordinates.
pub fn relative_pose(pose_i: &CameraPose, pose_j: &CameraPose) -> CameraPose {
    let rotation = pose_j.rotation * pose_i.rotation.transpose();
    let translation = pose_j.translation - rotation * pose_i.translation;
    CameraPose { rotation, translation }
}

fn cross_matrix(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Fundamental matrix for the ordered pair (i, j): for pixels x_i, x_j of
/// one world point, x_j^T F x_i = 0. Normalized to unit Frobenius norm
/// with a canonical sign (largest-magnitude entry positive), so that
/// F(i,j) equals F(j,i)^T exactly.
pub fn fundamental_matrix(
    pose_i: &CameraPose,
    pose_j: &CameraPose,
    intr_i: &Intrinsics,
    intr_j: &Intrinsics,
) -> Result<Matrix3<f64>> {
    let rel = relative_pose(pose_i, pose_j);
    if rel.translation.norm() < 1e-12 {
        return Err(CameraError::CoincidentCenters);
    }
    let essential = cross_matrix(&rel.translation) * rel.rotation;
    let k_i = Matrix3::new(intr_i.fx, 0.0, intr_i.cx, 0.0, intr_i.fy, intr_i.cy, 0.0, 0.0, 1.0);
    let k_j = Matrix3::new(intr_j.fx, 0.0, intr_j.cx, 0.0, intr_j.fy, intr_j.cy, 0.0, 0.0, 1.0);
    let k_j_inv_t = k_j
        .try_inverse()
        .ok_or_else(|| CameraError::BadIntrinsics("singular K".into()))?
        .transpose();
    let k_i_inv = k_i
        .try_inverse()
        .ok_or_else(|| CameraError::BadIntrinsics("singular K".into()))?;
    let mut f = k_j_inv_t * essential * k_i_inv;
    f /= f.norm();
    // canonical sign: largest-|entry| positive
    let mut best = (0, 0);
    let mut best_abs = 0.0;
    for r in 0..3 {
        for c in 0..3 {
            if f[(r, c)].abs() > best_abs {
                best_abs = f[(r, c)].abs();
                best = (r, c);
            }
        }
    }
    if f[best] < 0.0 {
        f = -f;
    }
    Ok(f)
}

/// Perpendicular distance (pixels) from a point to the epipolar line of
/// `pixel_i` in view j.
pub fn epipolar_distance(f: &Matrix3<f64>, pixel_i: [f64; 2], pixel_j: [f64; 2]) -> f64 {
    let line = f * Vector3::new(pixel_i[0], pixel_i[1], 1.0);
    let denom = (line.x * line.x + line.y * line.y).sqrt();
    if denom < 1e-300 {
        return f64::INFINITY;
    }
    (line.x * pixel_j[0] + line.y * pixel_j[1] + line.z).abs() / denom
}

/// Additive attention bias between the feature grids of two views.
///
/// Entry [p, q] weights key cell q of view j by the Gaussian of its
/// perpendicular distance to the epipolar line of query cell p of view i:
/// w * exp(-d^2 / (2 sigma^2)). `sigma` is expressed in feature-grid
/// cells; distances are measured in full-resolution pixels and rescaled.
/// Coincident camera centers produce an all-zero map with the
/// `degenerate` flag set instead of an error.
#[derive(Debug, Clone)]
pub struct EpipolarBiasMap {
    /// Row-major (grid_h * grid_w) x (grid_h * grid_w) weights, query-major.
    pub weights: Vec<f64>,
    pub grid_w: usize,
    pub grid_h: usize,
    pub sigma: f64,
    pub weight: f64,
    pub degenerate: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn epipolar_bias(
    pose_i: &CameraPose,
    pose_j: &CameraPose,
    intr_i: &Intrinsics,
    intr_j: &Intrinsics,
    grid_w: usize,
    grid_h: usize,
    sigma: f64,
    weight: f64,
) -> Result<EpipolarBiasMap> {
    if grid_w == 0
        || grid_h == 0
        || intr_i.width % grid_w != 0
        || intr_i.height % grid_h != 0
        || intr_j.width % grid_w != 0
        || intr_j.height % grid_h != 0
    {
        return Err(CameraError::GridMismatch(grid_w, grid_h, intr_i.width, intr_i.height));
    }
    if sigma <= 0.0 {
        return Err(CameraError::BadIntrinsics(format!("sigma must be positive, got {sigma}")));
    }
    let n = grid_w * grid_h;
    let f = match fundamental_matrix(pose_i, pose_j, intr_i, intr_j) {
        Ok(f) => f,
        Err(CameraError::CoincidentCenters) => {
            return Ok(EpipolarBiasMap {
                weights: vec![0.0; n * n],
                grid_w,
                grid_h,
                sigma,
                weight,
                degenerate: true,
            })
        }
        Err(e) => return Err(e),
    };
    // Cell centers mapped back to full-image pixel coordinates.
    let cell_j = (intr_j.width / grid_w) as f64;
    let centers = |intr: &Intrinsics, cw: usize, ch: usize| -> Vec<[f64; 2]> {
        let sx = intr.width as f64 / cw as f64;
        let sy = intr.height as f64 / ch as f64;
        let mut out = Vec::with_capacity(cw * ch);
        for gy in 0..ch {
            for gx in 0..cw {
                out.push([(gx as f64 + 0.5) * sx, (gy as f64 + 0.5) * sy]);
            }
        }
        out
    };
    let centers_i = centers(intr_i, grid_w, grid_h);
    let centers_j = centers(intr_j, grid_w, grid_h);
    let mut weights = vec![0.0; n * n];
    let inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
    for (p, ci) in centers_i.iter().enumerate() {
        let line = f * Vector3::new(ci[0], ci[1], 1.0);
        let denom = (line.x * line.x + line.y * line.y).sqrt();
        for (q, cj) in centers_j.iter().enumerate() {
            if denom < 1e-300 {
                continue;
            }
            let d_px = (line.x * cj[0] + line.y * cj[1] + line.z).abs() / denom;
            let d_cells = d_px / cell_j;
            weights[p * n + q] = weight * (-d_cells * d_cells * inv_two_sigma2).exp();
        }
    }
    Ok(EpipolarBiasMap { weights, grid_w, grid_h, sigma, weight, degenerate: false })
}

/// Camera metadata persisted next to each rendered view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraMeta {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub radius: f64,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraMeta {
    pub fn new(azimuth_deg: f64, elevation_deg: f64, radius: f64, intr: &Intrinsics) -> CameraMeta {
        CameraMeta {
            azimuth_deg,
            elevation_deg,
            radius,
            fx: intr.fx,
            fy: intr.fy,
            cx: intr.cx,
            cy: intr.cy,
            width: intr.width,
            height: intr.height,
        }
    }

    pub fn intrinsics(&self) -> Result<Intrinsics> {
        Intrinsics::new(self.fx, self.fy, self.cx, self.cy, self.width, self.height)
    }

    pub fn pose(&self) -> Result<CameraPose> {
        look_at_pose(self.azimuth_deg, self.elevation_deg, self.radius)
    }
}
