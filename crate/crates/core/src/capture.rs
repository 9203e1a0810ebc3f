//! Pose math for turntable captures.
//!
//! A marker fixed to the turntable is observed by each camera at every table
//! angle, giving one `camera_from_table` pose per (camera, angle). A second
//! marker on the plant then registers the plant to the table. Marker
//! detection is simulated: observations are ground-truth poses with an
//! isotropic rotation perturbation of standard deviation `σ / f` radians.

use std::collections::BTreeMap;

use nalgebra::{Unit, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{PinholeCamera, RigidTransform};
use crate::twin::VersionProbe;

pub const MANIFEST_VERSION: &str = "phytocap/1";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurntableModel {
    pub step_deg: f64,
    /// Per-turn repeatability bound, degrees.
    pub jitter_deg: f64,
    /// Rotation axis in the table frame.
    pub axis: [f64; 3],
    pub world_from_table: RigidTransform,
}

impl TurntableModel {
    pub fn new(step_deg: f64, jitter_deg: f64) -> Result<Self> {
        let t = Self {
            step_deg,
            jitter_deg,
            axis: [0.0, 0.0, 1.0],
            world_from_table: RigidTransform::identity(),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_deg > 0.0 && self.step_deg.is_finite()) {
            return Err(Error::InvalidInput("turntable step must be positive".into()));
        }
        if !(self.jitter_deg >= 0.0) {
            return Err(Error::InvalidInput("jitter bound must be >= 0".into()));
        }
        if (Vector3::from(self.axis).norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput("turntable axis must be unit".into()));
        }
        Ok(())
    }

    /// Number of distinct stops in one revolution.
    pub fn angle_count(&self) -> u32 {
        let n = 360.0 / self.step_deg;
        let rounded = n.round();
        if (n - rounded).abs() < 1e-9 {
            rounded as u32
        } else {
            n.ceil() as u32
        }
    }

    /// Whether the step divides 360°.
    pub fn full_revolution(&self) -> bool {
        let n = 360.0 / self.step_deg;
        (n - n.round()).abs() < 1e-9
    }

    /// Nominal angle of stop `index`, radians.
    pub fn angle(&self, index: u32) -> f64 {
        (index as f64 * self.step_deg).to_radians()
    }

    /// `world_from_table` with the table turned to stop `index` plus `jitter` radians.
    pub fn world_from_turned_table(&self, index: u32, jitter: f64) -> RigidTransform {
        let turn = RigidTransform::from_axis_angle(
            &Vector3::from(self.axis),
            self.angle(index) + jitter,
            Vector3::zeros(),
        );
        self.world_from_table.compose(&turn)
    }

    fn sample_jitter<R: Rng>(&self, rng: &mut R) -> f64 {
        let bound = self.jitter_deg.to_radians();
        let u: f64 = rng.random_range(-1.0..=1.0);
        u * bound
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiducialObservation {
    pub marker_id: u32,
    pub camera_id: u32,
    pub angle_index: u32,
    pub camera_from_marker: RigidTransform,
    /// Corner reprojection noise, pixels.
    pub sigma_px: f64,
}

/// `camera_from_table` per (camera id, angle index).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TableCalibration {
    pub poses: BTreeMap<(u32, u32), RigidTransform>,
}

impl TableCalibration {
    pub fn get(&self, camera_id: u32, angle_index: u32) -> Option<&RigidTransform> {
        self.poses.get(&(camera_id, angle_index))
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn count_for_camera(&self, camera_id: u32) -> usize {
        self.poses.keys().filter(|(c, _)| *c == camera_id).count()
    }
}

/// Chains each table-marker observation with the marker's mounting offset.
///
/// When a (camera, angle) pair was observed more than once the observation
/// with the smallest noise is used. Pairs never observed stay absent.
pub fn calibrate_turntable(
    observations: &[FiducialObservation],
    table_from_marker: &RigidTransform,
) -> Result<TableCalibration> {
    if observations.is_empty() {
        return Err(Error::NoObservations);
    }
    let marker_from_table = table_from_marker.inverse();
    let mut best: BTreeMap<(u32, u32), &FiducialObservation> = BTreeMap::new();
    for obs in observations {
        best.entry((obs.camera_id, obs.angle_index))
            .and_modify(|cur| {
                if obs.sigma_px < cur.sigma_px {
                    *cur = obs;
                }
            })
            .or_insert(obs);
    }
    Ok(TableCalibration {
        poses: best
            .into_iter()
            .map(|(k, obs)| (k, obs.camera_from_marker.compose(&marker_from_table)))
            .collect(),
    })
}

/// `table_from_plant = camera_from_table⁻¹ ∘ camera_from_plant`.
pub fn register_plant(
    plant_marker: &FiducialObservation,
    calibration: &TableCalibration,
    plant_from_marker: &RigidTransform,
) -> Result<RigidTransform> {
    let camera_from_table = calibration
        .get(plant_marker.camera_id, plant_marker.angle_index)
        .ok_or(Error::MissingCalibration {
            camera_id: plant_marker.camera_id,
            angle_index: plant_marker.angle_index,
        })?;
    let camera_from_plant = plant_marker
        .camera_from_marker
        .compose(&plant_from_marker.inverse());
    Ok(camera_from_table.inverse().compose(&camera_from_plant))
}

/// Applies the detection noise model: the marker orientation is rotated by a
/// random rotation vector with per-axis standard deviation `sigma_px / focal`.
pub fn perturb_observation<R: Rng>(
    camera_from_marker: &RigidTransform,
    sigma_px: f64,
    focal_px: f64,
    rng: &mut R,
) -> RigidTransform {
    if sigma_px <= 0.0 {
        return *camera_from_marker;
    }
    let normal = Normal::new(0.0, sigma_px / focal_px).expect("finite std");
    let rv = Vector3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng));
    let delta = UnitQuaternion::from_scaled_axis(rv).to_rotation_matrix();
    RigidTransform::new(delta.matrix() * camera_from_marker.rotation(), *camera_from_marker.translation())
        .expect("rotation product stays orthonormal")
}

/// Simulated table-marker observations at the nominal stops (no jitter).
/// Each (camera, stop) detection is dropped with probability `dropout`.
pub fn simulate_table_observations<R: Rng>(
    table: &TurntableModel,
    cameras: &[PinholeCamera],
    table_from_marker: &RigidTransform,
    sigma_px: f64,
    dropout: f64,
    rng: &mut R,
) -> Vec<FiducialObservation> {
    let mut out = Vec::new();
    for k in 0..table.angle_count() {
        let world_from_table = table.world_from_turned_table(k, 0.0);
        for (c, cam) in cameras.iter().enumerate() {
            let dropped = rng.random::<f64>() < dropout;
            let truth = cam.pose.compose(&world_from_table).compose(table_from_marker);
            let observed = perturb_observation(&truth, sigma_px, cam.fx, rng);
            if dropped {
                continue;
            }
            out.push(FiducialObservation {
                marker_id: 0,
                camera_id: c as u32,
                angle_index: k,
                camera_from_marker: observed,
                sigma_px,
            });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub camera_id: u32,
    pub angle_index: u32,
    /// `camera_from_table` for this view; the plant frame follows via
    /// `plant_to_table`.
    pub pose: RigidTransform,
    pub image: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableBlock {
    pub step_deg: f64,
    pub jitter_deg: f64,
    /// Set when the step does not divide 360°.
    pub partial: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaptureManifest {
    pub version: String,
    pub table: TableBlock,
    pub entries: Vec<ManifestEntry>,
    /// Serialized as `table_from_plant`.
    pub plant_to_table: RigidTransform,
}

impl CaptureManifest {
    pub fn entries_for_camera(&self, camera_id: u32) -> usize {
        self.entries.iter().filter(|e| e.camera_id == camera_id).count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: VersionProbe = serde_json::from_str(text)?;
        if probe.version != MANIFEST_VERSION {
            return Err(Error::VersionMismatch {
                expected: MANIFEST_VERSION.into(),
                found: probe.version,
            });
        }
        Ok(serde_json::from_str(text)?)
    }
}

/// Enumerates (camera, stop) views with their poses. One jitter value is
/// drawn per turn; each view is dropped with probability `dropout`.
pub fn synthesize_views<R: Rng>(
    table: &TurntableModel,
    cameras: &[PinholeCamera],
    dropout: f64,
    table_from_plant: RigidTransform,
    rng: &mut R,
) -> CaptureManifest {
    let mut entries = Vec::new();
    for k in 0..table.angle_count() {
        let jitter = table.sample_jitter(rng);
        let world_from_table = table.world_from_turned_table(k, jitter);
        for (c, cam) in cameras.iter().enumerate() {
            if rng.random::<f64>() < dropout {
                continue;
            }
            entries.push(ManifestEntry {
                camera_id: c as u32,
                angle_index: k,
                pose: cam.pose.compose(&world_from_table),
                image: None,
            });
        }
    }
    CaptureManifest {
        version: MANIFEST_VERSION.into(),
        table: TableBlock {
            step_deg: table.step_deg,
            jitter_deg: table.jitter_deg,
            partial: !table.full_revolution(),
        },
        entries,
        plant_to_table: table_from_plant,
    }
}

/// Rotation about `axis` (unit) by `angle`, as a transform.
pub fn axis_rotation(axis: &Vector3<f64>, angle: f64) -> RigidTransform {
    RigidTransform::from_rotation(
        nalgebra::Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle),
        Vector3::zeros(),
    )
}
