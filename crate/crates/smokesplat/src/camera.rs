//! Pinhole cameras with world-to-camera rigid poses.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CameraError {
    #[error("rotation is not orthonormal with determinant +1 (max deviation {0:.2e})")]
    NotRotation(f64),
    #[error("invalid intrinsics: {0}")]
    BadIntrinsics(String),
}

/// Pinhole intrinsics plus a world-to-camera rigid pose. The camera looks
/// along +z in its own frame; pixel centers sit at `(x + 0.5, y + 0.5)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraView {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// World-to-camera rotation.
    pub rotation: Matrix3<f64>,
    /// Translation in the camera frame: `p_cam = R p_world + t`.
    pub translation: Vector3<f64>,
    pub width: usize,
    pub height: usize,
}

const ORTHONORMAL_TOL: f64 = 1e-6;

impl CameraView {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        width: usize,
        height: usize,
    ) -> Result<Self, CameraError> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(CameraError::BadIntrinsics(format!(
                "focal lengths must be positive, got fx={fx} fy={fy}"
            )));
        }
        if !(cx >= 0.0 && cx < width as f64 && cy >= 0.0 && cy < height as f64) {
            return Err(CameraError::BadIntrinsics(format!(
                "principal point ({cx}, {cy}) outside {width}x{height} raster"
            )));
        }
        let gram = rotation.transpose() * rotation;
        let mut dev: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((gram[(i, j)] - target).abs());
            }
        }
        dev = dev.max((rotation.determinant() - 1.0).abs());
        if dev > ORTHONORMAL_TOL {
            return Err(CameraError::NotRotation(dev));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            rotation,
            translation,
            width,
            height,
        })
    }

    /// Camera with `eye` looking at `target`, `up` as the vertical hint.
    #[allow(clippy::too_many_arguments)]
    pub fn look_at(
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
        fx: f64,
        fy: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, CameraError> {
        let forward = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| CameraError::BadIntrinsics("eye coincides with target".into()))?;
        let right = forward
            .cross(&up)
            .try_normalize(1e-12)
            .ok_or_else(|| CameraError::BadIntrinsics("up is collinear with view axis".into()))?;
        let down = forward.cross(&right); // +y points down in image space
        let rotation = Matrix3::from_rows(&[
            right.transpose(),
            down.transpose(),
            forward.transpose(),
        ]);
        let translation = -rotation * eye;
        Self::new(
            fx,
            fy,
            width as f64 / 2.0,
            height as f64 / 2.0,
            rotation,
            translation,
            width,
            height,
        )
    }

    #[inline]
    pub fn world_to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Camera center in world coordinates, `-Rᵀ t`.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    /// Optical axis direction in world coordinates (camera +z).
    pub fn view_direction(&self) -> Vector3<f64> {
        self.rotation.transpose() * Vector3::new(0.0, 0.0, 1.0)
    }

    /// Projects a camera-frame point to pixel coordinates; `None` behind
    /// the near plane.
    pub fn project_camera_point(&self, p_cam: &Vector3<f64>, z_near: f64) -> Option<(f64, f64)> {
        if p_cam.z <= z_near {
            return None;
        }
        Some((
            self.fx * p_cam.x / p_cam.z + self.cx,
            self.fy * p_cam.y / p_cam.z + self.cy,
        ))
    }

    /// True when a world point projects inside the raster in front of the
    /// near plane.
    pub fn sees(&self, p_world: &Vector3<f64>, z_near: f64) -> bool {
        let p_cam = self.world_to_camera(p_world);
        match self.project_camera_point(&p_cam, z_near) {
            Some((u, v)) => {
                u >= 0.0 && u < self.width as f64 && v >= 0.0 && v < self.height as f64
            }
            None => false,
        }
    }
}
