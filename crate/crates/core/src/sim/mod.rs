//! Kinematic plant simulator.
//!
//! Leaves are rigid dome-shaped blades on single revolute petiole hinges. A
//! ring-shaped tool follows a waypoint trajectory; at each waypoint the
//! target blade settles onto the ring (lift) or is held under it (push).
//! Coverage is evaluated by ray casting from area-weighted blade samples to
//! the camera against every body in the scene.
//!
//! Simulator functions are pure: a plant state is a value and a rollout
//! returns the new state instead of mutating the input.

mod generate;
mod plant;
mod rollout;
mod scene;

pub use generate::{
    generate_plant, ClusterKind, ClusterTruth, GeneratedPlant, GeneratorSpec, GroundTruth,
    LeafTruth, PlantFile,
};
pub use plant::{concentric_disc, KinematicPlant, LeafBody, Pot, Probe, Stem};
pub use rollout::{execute_sequence, random_pose_error, Outcome, RolloutResult};
pub use scene::{evaluate_coverage, CoverageScene, ToolPose};

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const SIM_VERSION: &str = "phytosim/1";

/// Which side of a blade is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Face {
    Top,
    Bottom,
}

/// Discretization and tool-geometry parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Blade grid cells per side; the mesh has `2·res²` triangles.
    pub blade_resolution: usize,
    /// Each blade triangle is split into `k²` equal-area coverage samples.
    pub sample_subdivision: usize,
    /// Samples sit this far off the blade along the face normal.
    pub sample_offset: f64,
    /// Radial width of the tool ring beyond its inner radius.
    pub ring_width: f64,
    pub ring_segments: usize,
    /// Pitch scan step for the contact solve, radians.
    pub contact_step: f64,
    /// Half-thickness of the swept tool disc for snag tests.
    pub snag_thickness: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            blade_resolution: 8,
            sample_subdivision: 2,
            sample_offset: 1e-3,
            ring_width: 3e-3,
            ring_segments: 32,
            contact_step: 0.25f64.to_radians(),
            snag_thickness: 2e-3,
        }
    }
}

/// A plant at rest plus simulator settings.
#[derive(Clone, Debug, PartialEq)]
pub struct Simulator {
    pub plant: KinematicPlant,
    pub config: SimConfig,
}

impl Simulator {
    pub fn new(plant: KinematicPlant, config: SimConfig) -> Result<Self> {
        plant.validate()?;
        Ok(Self { plant, config })
    }

    /// Index of the leaf whose blade centroid is nearest to `center`.
    pub fn match_leaf(&self, center: &Point3<f64>) -> Option<usize> {
        self.plant
            .leaves
            .iter()
            .enumerate()
            .map(|(i, l)| (i, (l.blade_centroid(self.config.blade_resolution) - center).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    }
}
