use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinate frame a point set is expressed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// Origin at the pot's bottom center, +z along the growth direction.
    Plant,
    /// Turntable top, rotating with the table.
    Table,
    /// Fixed laboratory frame.
    World,
}

/// Ordered points in meters, tagged with their frame.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    frame: Frame,
    points: Vec<Point3<f64>>,
}

impl PointSet {
    pub fn new(frame: Frame, points: Vec<Point3<f64>>) -> Result<Self> {
        if let Some(i) = points
            .iter()
            .position(|p| !p.coords.iter().all(|c| c.is_finite()))
        {
            return Err(Error::InvalidInput(format!("point {i} has a non-finite coordinate")));
        }
        Ok(Self { frame, points })
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Option<Point3<f64>> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self
            .points
            .iter()
            .fold(nalgebra::Vector3::zeros(), |acc, p| acc + p.coords);
        Some(Point3::from(sum / self.points.len() as f64))
    }

    pub fn min_z(&self) -> Option<f64> {
        self.points.iter().map(|p| p.z).reduce(f64::min)
    }

    pub fn max_z(&self) -> Option<f64> {
        self.points.iter().map(|p| p.z).reduce(f64::max)
    }

    pub fn transformed(&self, t: &super::RigidTransform) -> PointSet {
        PointSet {
            frame: self.frame,
            points: self.points.iter().map(|p| t.apply(p)).collect(),
        }
    }

    pub fn into_points(self) -> Vec<Point3<f64>> {
        self.points
    }
}
