//! Geometric kernels shared by the rest of the crate: rigid transforms,
//! principal axes, oriented boxes, moment ellipses and segment-based
//! visibility against triangle occluders.
//!
//! Everything here is a pure function of its inputs.

mod camera;
mod ellipse;
mod pca;
mod points;
mod transform;
mod visibility;

pub use camera::PinholeCamera;
pub use ellipse::{fit_ellipse, EllipseFit};
pub use pca::{canonical_sign, fit_obb, pca, OrientedBox, Pca};
pub use points::{Frame, PointSet};
pub use transform::{rotation_between, wrap_angle, RigidTransform, ORTHONORMAL_TOL};
pub use visibility::{
    ray_visibility, segment_hits_triangle, OccluderSet, SurfaceSample, Triangle,
};
