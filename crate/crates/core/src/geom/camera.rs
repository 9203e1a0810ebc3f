use nalgebra::{Matrix3, Point3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::RigidTransform;
use crate::error::{Error, Result};

/// Ideal pinhole camera, OpenCV axis convention (+x right, +y down, +z forward).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PinholeCamera {
    /// World-to-camera transform (`camera_from_world`).
    pub pose: RigidTransform,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl PinholeCamera {
    pub fn new(
        pose: RigidTransform,
        fx: f64,
        fy: f64,
        principal_point: (f64, f64),
        width: u32,
        height: u32,
    ) -> Result<Self> {
        let cam = Self {
            pose,
            fx,
            fy,
            cx: principal_point.0,
            cy: principal_point.1,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidInput("focal lengths must be positive".into()));
        }
        if !(self.cx >= 0.0
            && self.cy >= 0.0
            && self.cx <= self.width as f64
            && self.cy <= self.height as f64)
        {
            return Err(Error::InvalidInput("principal point outside image".into()));
        }
        Ok(())
    }

    /// Camera at `eye` looking at `target`, with `up` mapped to image-up.
    pub fn look_at(
        eye: Point3<f64>,
        target: Point3<f64>,
        up: Vector3<f64>,
        focal: f64,
        width: u32,
        height: u32,
    ) -> Result<Self> {
        let forward = (target - eye).normalize();
        let right = forward.cross(&up);
        if right.norm() < 1e-9 {
            return Err(Error::InvalidInput("look_at: up parallel to view direction".into()));
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        let rot = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let pose = RigidTransform::new(rot, -(rot * eye.coords))?;
        Self::new(
            pose,
            focal,
            focal,
            (width as f64 / 2.0, height as f64 / 2.0),
            width,
            height,
        )
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Point3<f64> {
        Point3::from(-(self.pose.rotation().transpose() * self.pose.translation()))
    }

    /// Optical axis (+z of the camera) in world coordinates.
    pub fn optical_axis(&self) -> Vector3<f64> {
        self.pose.rotation().row(2).transpose()
    }

    /// Pixel coordinates of a world point in front of the camera.
    pub fn project(&self, p: &Point3<f64>) -> Option<Vector2<f64>> {
        let c = self.pose.apply(p);
        if c.z <= 0.0 {
            return None;
        }
        Some(Vector2::new(
            self.fx * c.x / c.z + self.cx,
            self.fy * c.y / c.z + self.cy,
        ))
    }

    pub fn in_image(&self, p: &Point3<f64>) -> bool {
        self.project(p).is_some_and(|uv| {
            uv.x >= 0.0 && uv.y >= 0.0 && uv.x <= self.width as f64 && uv.y <= self.height as f64
        })
    }

    /// Same intrinsics, world moved by `world_from_new`: returns a camera whose
    /// pose is `camera_from_world ∘ world_from_new`.
    pub fn viewing_frame(&self, world_from_new: &RigidTransform) -> PinholeCamera {
        PinholeCamera {
            pose: self.pose.compose(world_from_new),
            ..*self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn look_at_projects_target_to_center() {
        let cam = PinholeCamera::look_at(
            Point3::new(1.0, 0.0, 0.3),
            Point3::new(0.0, 0.0, 0.3),
            Vector3::z(),
            800.0,
            1600,
            1200,
        )
        .unwrap();
        let uv = cam.project(&Point3::new(0.0, 0.0, 0.3)).unwrap();
        assert!((uv - Vector2::new(800.0, 600.0)).norm() < 1e-9);
        // point above target appears higher in the image (smaller v)
        let up = cam.project(&Point3::new(0.0, 0.0, 0.4)).unwrap();
        assert!(up.y < 600.0);
        assert!((cam.center() - Point3::new(1.0, 0.0, 0.3)).norm() < 1e-12);
        assert!((cam.optical_axis() + Vector3::x()).norm() < 1e-12);
    }

    #[test]
    fn behind_camera_not_projected() {
        let cam = PinholeCamera::look_at(
            Point3::new(1.0, 0.0, 0.0),
            Point3::origin(),
            Vector3::z(),
            500.0,
            640,
            480,
        )
        .unwrap();
        assert!(cam.project(&Point3::new(2.0, 0.0, 0.0)).is_none());
        assert!(!cam.in_image(&Point3::new(0.0, 5.0, 0.0)));
    }

    #[test]
    fn rejects_bad_intrinsics() {
        assert!(PinholeCamera::new(RigidTransform::identity(), 0.0, 1.0, (1.0, 1.0), 2, 2).is_err());
        assert!(PinholeCamera::new(RigidTransform::identity(), 1.0, 1.0, (5.0, 1.0), 2, 2).is_err());
    }
}
