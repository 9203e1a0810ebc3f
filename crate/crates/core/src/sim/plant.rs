use nalgebra::{Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Triangle;

/// Flat-bottomed pot with its base center at the frame origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pot {
    pub radius: f64,
    pub height: f64,
    /// Soil surface height.
    pub soil_height: f64,
}

/// Vertical main stem rising from the soil to `top`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stem {
    pub radius: f64,
    pub top: f64,
}

/// A leaf blade on a single revolute petiole hinge.
///
/// Local blade frame: `u` runs along the petiole away from the stem, `v`
/// across the blade and `w` along the blade normal. The blade occupies
/// `u ∈ [petiole, petiole + 2a]` with an elliptical outline and a dome
/// profile `w = sag·(1 − ξ² − η²)` where `ξ = (u − petiole − a)/a` and
/// `η = v/b`. World placement is `pivot + Rz(azimuth)·Ry(−pitch)·local`, so a
/// positive pitch raises the tip.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafBody {
    pub pivot: Point3<f64>,
    pub azimuth: f64,
    pub rest_pitch: f64,
    pub petiole: f64,
    pub semi_major: f64,
    pub semi_minor: f64,
    pub sag: f64,
    /// Joint range relative to the rest pitch, radians.
    pub limits: [f64; 2],
    /// Current joint angle relative to the rest pitch, radians.
    pub angle: f64,
}

impl LeafBody {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.pivot.x,
            self.pivot.y,
            self.pivot.z,
            self.azimuth,
            self.rest_pitch,
            self.petiole,
            self.semi_major,
            self.semi_minor,
            self.sag,
            self.limits[0],
            self.limits[1],
            self.angle,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidInput("leaf parameters must be finite".into()));
        }
        if !(self.semi_major > 0.0 && self.semi_minor > 0.0 && self.petiole >= 0.0) {
            return Err(Error::InvalidInput("leaf blade dimensions must be positive".into()));
        }
        if !(self.limits[0] <= 0.0 && self.limits[1] >= 0.0) {
            return Err(Error::InvalidInput("joint limits must bracket the rest pose".into()));
        }
        if self.angle < self.limits[0] - 1e-12 || self.angle > self.limits[1] + 1e-12 {
            return Err(Error::InvalidInput("joint angle outside limits".into()));
        }
        Ok(())
    }

    pub fn pitch(&self) -> f64 {
        self.rest_pitch + self.angle
    }

    pub fn length(&self) -> f64 {
        2.0 * self.semi_major
    }

    pub fn orientation_at(&self, pitch: f64) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Vector3::z_axis(), self.azimuth)
            * Rotation3::from_axis_angle(&Vector3::y_axis(), -pitch)
    }

    pub fn rest_orientation(&self) -> Rotation3<f64> {
        self.orientation_at(self.rest_pitch)
    }

    /// Positive rotation about this axis raises the tip.
    pub fn hinge_axis(&self) -> Vector3<f64> {
        Vector3::new(self.azimuth.sin(), -self.azimuth.cos(), 0.0)
    }

    /// Horizontal unit vector along the petiole.
    pub fn heading(&self) -> Vector3<f64> {
        Vector3::new(self.azimuth.cos(), self.azimuth.sin(), 0.0)
    }

    /// Blade axis through the midrib at the current pitch.
    pub fn direction(&self) -> Vector3<f64> {
        self.orientation_at(self.pitch()) * Vector3::x()
    }

    pub fn normal(&self) -> Vector3<f64> {
        self.orientation_at(self.pitch()) * Vector3::z()
    }

    pub fn dome(&self, xi: f64, eta: f64) -> f64 {
        self.sag * (1.0 - xi * xi - eta * eta)
    }

    /// Local coordinates of the blade point at normalized `(ξ, η)`.
    pub fn local_point(&self, xi: f64, eta: f64) -> Vector3<f64> {
        Vector3::new(
            self.petiole + self.semi_major * (1.0 + xi),
            self.semi_minor * eta,
            self.dome(xi, eta),
        )
    }

    pub fn world_point_at(&self, pitch: f64, local: &Vector3<f64>) -> Point3<f64> {
        self.pivot + self.orientation_at(pitch) * local
    }

    pub fn world_point(&self, xi: f64, eta: f64) -> Point3<f64> {
        self.world_point_at(self.pitch(), &self.local_point(xi, eta))
    }

    /// Blade mesh at the current pitch: a `res × res` square grid mapped to
    /// the unit disc by the concentric map, two triangles per cell.
    pub fn blade_triangles(&self, res: usize, source: u32) -> Vec<Triangle> {
        let n = res.max(1);
        let grid: Vec<Point3<f64>> = (0..=n)
            .flat_map(|j| (0..=n).map(move |i| (i, j)))
            .map(|(i, j)| {
                let x = -1.0 + 2.0 * i as f64 / n as f64;
                let y = -1.0 + 2.0 * j as f64 / n as f64;
                let (xi, eta) = concentric_disc(x, y);
                self.world_point(xi, eta)
            })
            .collect();
        let at = |i: usize, j: usize| grid[j * (n + 1) + i];
        let mut tris = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (p00, p10, p11, p01) = (at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1));
                tris.push(Triangle::new(p00, p10, p11, source));
                tris.push(Triangle::new(p00, p11, p01, source));
            }
        }
        tris
    }

    /// Mesh vertices and triangle centroids, used for swept-volume tests.
    pub fn probe_points(&self, res: usize) -> Vec<Point3<f64>> {
        let tris = self.blade_triangles(res, 0);
        let mut pts: Vec<Point3<f64>> = tris.iter().map(|t| t.centroid()).collect();
        pts.extend(tris.iter().flat_map(|t| t.vertices));
        pts
    }

    /// Area-weighted centroid of the blade mesh.
    pub fn blade_centroid(&self, res: usize) -> Point3<f64> {
        let tris = self.blade_triangles(res, 0);
        let (mut sum, mut area) = (Vector3::zeros(), 0.0);
        for t in &tris {
            let a = t.area();
            sum += t.centroid().coords * a;
            area += a;
        }
        Point3::from(sum / area)
    }

    /// Where the vertical line through `ring` meets the blade at `pitch`.
    pub fn probe(&self, pitch: f64, ring: &Point3<f64>) -> Probe {
        let rel = ring - self.pivot;
        let d = rel.dot(&self.heading());
        let v = rel.x * -self.azimuth.sin() + rel.y * self.azimuth.cos();
        let eta = v / self.semi_minor;
        if eta.abs() >= 1.0 {
            return Probe::Beside;
        }
        let half = (1.0 - eta * eta).sqrt();
        let (s, c) = pitch.sin_cos();
        // horizontal reach of the blade point at normalized ξ, minus d
        let reach = |xi: f64| {
            let l = self.local_point(xi, eta);
            l.x * c - l.z * s - d
        };
        let base = reach(-half);
        if base > 0.0 {
            return Probe::Inward;
        }
        if reach(half) < 0.0 {
            return Probe::Beyond;
        }
        const SCAN: usize = 64;
        let mut lo = -half;
        let mut hi = half;
        for k in 1..=SCAN {
            let xi = -half + 2.0 * half * k as f64 / SCAN as f64;
            if reach(xi) >= 0.0 {
                hi = xi;
                break;
            }
            lo = xi;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if reach(mid) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let xi = 0.5 * (lo + hi);
        let l = self.local_point(xi, eta);
        Probe::On {
            xi,
            eta,
            height: l.x * s + l.z * c,
            target: rel.z,
        }
    }
}

/// Result of dropping a vertical line from the tool ring onto a blade.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Probe {
    /// Laterally outside the blade outline.
    Beside,
    /// Between the stem and the blade base.
    Inward,
    /// Past the blade tip.
    Beyond,
    /// Over the blade; `height` is the blade surface and `target` the ring,
    /// both relative to the pivot.
    On {
        xi: f64,
        eta: f64,
        height: f64,
        target: f64,
    },
}

/// Shirley–Chiu concentric map from `[-1, 1]²` to the unit disc.
pub fn concentric_disc(x: f64, y: f64) -> (f64, f64) {
    use std::f64::consts::FRAC_PI_4;
    if x == 0.0 && y == 0.0 {
        return (0.0, 0.0);
    }
    let (r, phi) = if x.abs() > y.abs() {
        (x, FRAC_PI_4 * (y / x))
    } else {
        (y, 2.0 * FRAC_PI_4 - FRAC_PI_4 * (x / y))
    };
    (r * phi.cos(), r * phi.sin())
}

/// Ground-truth plant: pot, stem and hinged leaves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KinematicPlant {
    pub pot: Pot,
    pub stem: Stem,
    pub leaves: Vec<LeafBody>,
}

impl KinematicPlant {
    pub fn validate(&self) -> Result<()> {
        if !(self.pot.radius > 0.0 && self.pot.height > 0.0) {
            return Err(Error::InvalidInput("pot dimensions must be positive".into()));
        }
        if !(self.stem.radius > 0.0 && self.stem.top > self.pot.soil_height) {
            return Err(Error::InvalidInput("stem must rise above the soil".into()));
        }
        self.leaves.iter().try_for_each(LeafBody::validate)
    }

    pub fn leaf(&self, index: usize) -> Result<&LeafBody> {
        self.leaves.get(index).ok_or(Error::UnknownLeaf(index))
    }

    pub fn angles(&self) -> Vec<f64> {
        self.leaves.iter().map(|l| l.angle).collect()
    }

    /// Copy of the plant with every joint at its rest angle.
    pub fn at_rest(&self) -> KinematicPlant {
        let mut p = self.clone();
        for l in &mut p.leaves {
            l.angle = 0.0;
        }
        p
    }

    pub fn with_angles(&self, angles: &[f64]) -> Result<KinematicPlant> {
        if angles.len() != self.leaves.len() {
            return Err(Error::InvalidInput("angle count does not match leaf count".into()));
        }
        let mut p = self.clone();
        for (l, a) in p.leaves.iter_mut().zip(angles) {
            l.angle = *a;
        }
        p.validate()?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    pub(crate) fn flat_leaf() -> LeafBody {
        LeafBody {
            pivot: Point3::new(0.0, 0.0, 0.3),
            azimuth: 0.0,
            rest_pitch: 0.0,
            petiole: 0.02,
            semi_major: 0.05,
            semi_minor: 0.03,
            sag: 0.0,
            limits: [-1.3, 1.3],
            angle: 0.0,
        }
    }

    #[test]
    fn concentric_map_stays_in_disc_and_hits_boundary() {
        for i in 0..=8 {
            for j in 0..=8 {
                let x = -1.0 + i as f64 / 4.0;
                let y = -1.0 + j as f64 / 4.0;
                let (a, b) = concentric_disc(x, y);
                let r = (a * a + b * b).sqrt();
                assert!(r <= 1.0 + 1e-12);
                if x.abs() == 1.0 || y.abs() == 1.0 {
                    assert!((r - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn mesh_has_128_triangles_and_area_converges() {
        let leaf = flat_leaf();
        let tris = leaf.blade_triangles(8, 0);
        assert_eq!(tris.len(), 128);
        let area: f64 = tris.iter().map(|t| t.area()).sum();
        let exact = std::f64::consts::PI * 0.05 * 0.03;
        assert!(area < exact && area > 0.97 * exact, "{area} vs {exact}");
        // consistent winding: every normal points along +w
        assert!(tris.iter().all(|t| t.normal().z > 0.99));
    }

    #[test]
    fn pitch_raises_tip() {
        let mut leaf = flat_leaf();
        leaf.angle = 0.5;
        let tip = leaf.world_point(1.0, 0.0);
        assert!(tip.z > 0.3);
        assert!((leaf.hinge_axis() - Vector3::new(0.0, -1.0, 0.0)).norm() < 1e-12);
        let r = Rotation3::from_axis_angle(
            &nalgebra::Unit::new_normalize(leaf.hinge_axis()),
            0.5,
        );
        assert!((r * Vector3::x() - leaf.direction()).norm() < 1e-12);
    }

    #[test]
    fn probe_flat_leaf() {
        let leaf = flat_leaf();
        let ring = Point3::new(0.07, 0.0, 0.25);
        match leaf.probe(0.0, &ring) {
            Probe::On { xi, height, target, .. } => {
                assert!(xi.abs() < 1e-9);
                assert!(height.abs() < 1e-12);
                assert!((target + 0.05).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        // at 45° the same horizontal position meets the blade further out
        match leaf.probe(FRAC_PI_2 / 2.0, &ring) {
            Probe::On { xi, height, .. } => {
                let u = 0.07 / (FRAC_PI_2 / 2.0).cos();
                assert!((xi - (u - 0.07) / 0.05).abs() < 1e-9);
                assert!((height - 0.07).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(leaf.probe(0.0, &Point3::new(0.07, 0.05, 0.3)), Probe::Beside);
        assert_eq!(leaf.probe(0.0, &Point3::new(0.01, 0.0, 0.3)), Probe::Inward);
        assert_eq!(leaf.probe(0.0, &Point3::new(0.2, 0.0, 0.3)), Probe::Beyond);
    }
}
