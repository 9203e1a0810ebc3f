use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};

use super::PointSet;
use crate::error::{Error, Result};

const SIGN_TIE: f64 = 1e-12;

/// Principal axes of a point set.
#[derive(Clone, Debug, PartialEq)]
pub struct Pca {
    pub mean: Point3<f64>,
    /// Orthonormal, right-handed; `axes[0]` is the principal direction.
    pub axes: [Vector3<f64>; 3],
    /// Eigenvalues of the sample covariance, descending.
    pub variances: [f64; 3],
}

/// Flips `v` so it points toward +z; vectors in the xy-plane point toward +x,
/// and vectors along y toward +y.
pub fn canonical_sign(v: Vector3<f64>) -> Vector3<f64> {
    for c in [v.z, v.x, v.y] {
        if c > SIGN_TIE {
            return v;
        }
        if c < -SIGN_TIE {
            return -v;
        }
    }
    v
}

pub fn pca(points: &PointSet) -> Result<Pca> {
    let pts = points.points();
    if pts.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "PCA needs at least 3 points, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mean = points.centroid().expect("non-empty");
    let mut cov = Matrix3::zeros();
    for p in pts {
        let d = p - mean;
        cov += d * d.transpose();
    }
    cov /= n - 1.0;

    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let first = canonical_sign(eig.eigenvectors.column(order[0]).normalize());
    let second_raw: Vector3<f64> = eig.eigenvectors.column(order[1]).into();
    // re-orthogonalize against the first axis before fixing the sign
    let second = canonical_sign((second_raw - first * first.dot(&second_raw)).normalize());
    let third = first.cross(&second);

    let variances = order.map(|i| eig.eigenvalues[i].max(0.0));
    Ok(Pca {
        mean,
        axes: [first, second, third],
        variances,
    })
}

/// Box from principal axes and projection extents.
#[derive(Clone, Debug, PartialEq)]
pub struct OrientedBox {
    pub center: Point3<f64>,
    /// Orthonormal; `axes[k]` spans `extents[k]`.
    pub axes: [Vector3<f64>; 3],
    /// Full side lengths in meters, descending.
    pub extents: [f64; 3],
}

impl OrientedBox {
    pub fn contains(&self, p: &Point3<f64>, tol: f64) -> bool {
        let d = p - self.center;
        (0..3).all(|k| d.dot(&self.axes[k]).abs() <= self.extents[k] / 2.0 + tol)
    }

    /// Unit normal of the plane spanned by the two longest axes, oriented toward +z.
    pub fn plane_normal(&self) -> Vector3<f64> {
        canonical_sign(self.axes[2])
    }

    pub fn volume(&self) -> f64 {
        self.extents.iter().product()
    }
}

pub fn fit_obb(points: &PointSet) -> Result<OrientedBox> {
    let frame = pca(points)?;
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points.points() {
        let d = p - frame.mean;
        for k in 0..3 {
            let s = d.dot(&frame.axes[k]);
            lo[k] = lo[k].min(s);
            hi[k] = hi[k].max(s);
        }
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| (hi[b] - lo[b]).total_cmp(&(hi[a] - lo[a])));

    let mut center = frame.mean.coords;
    for k in 0..3 {
        center += frame.axes[k] * ((lo[k] + hi[k]) / 2.0);
    }
    let a0 = frame.axes[order[0]];
    let a1 = frame.axes[order[1]];
    Ok(OrientedBox {
        center: Point3::from(center),
        axes: [a0, a1, a0.cross(&a1)],
        extents: order.map(|k| hi[k] - lo[k]),
    })
}
