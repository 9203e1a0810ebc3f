use std::collections::BTreeSet;

use nalgebra::{Point3, Unit, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{KinematicPlant, LeafBody, Probe, SimConfig, ToolPose};
use crate::error::{Error, Result};
use crate::geom::RigidTransform;
use crate::inspect::{Mode, TaskPrimitiveSequence};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Manipulated,
    SlippedOff,
    NeighborSnag,
    NoContact,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RolloutResult {
    pub leaf: usize,
    pub final_angles: Vec<f64>,
    /// Whether the ring held the target blade at each waypoint.
    pub contact_trace: Vec<bool>,
    pub outcome: Outcome,
    /// Non-target leaves the swept ring ran into.
    pub snagged: Vec<usize>,
    /// Tool at the last waypoint, pose error included.
    pub tool: ToolPose,
    /// Plant state after the last waypoint.
    pub state: KinematicPlant,
}

/// How a blade responds to the ring at one waypoint.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Response {
    /// Ring not touching; the blade stays at its base pitch.
    Free,
    /// Blade held at this absolute pitch.
    Held(f64),
    /// Ring ran off the blade or the hinge hit its limit.
    Slip,
}

/// Settles `leaf` against a ring at `ring`, starting from pitch `base`.
///
/// Lift: smallest pitch ≥ base whose surface at the ring is at or above it.
/// Push: largest pitch ≤ base whose surface at the ring is at or below it.
fn settle(leaf: &LeafBody, base: f64, ring: &Point3<f64>, mode: Mode, step: f64) -> Response {
    let dir = match mode {
        Mode::Lift => 1.0,
        Mode::Push => -1.0,
    };
    // signed gap: positive once the blade has cleared the ring
    let gap = |pitch: f64| match leaf.probe(pitch, ring) {
        Probe::On { height, target, .. } => Some(dir * (height - target)),
        _ => None,
    };
    match gap(base) {
        Some(g) if g < 0.0 => {}
        _ => return Response::Free,
    }
    let limit = leaf.rest_pitch + if dir > 0.0 { leaf.limits[1] } else { leaf.limits[0] };
    let mut lo = base;
    loop {
        if (limit - lo) * dir <= 0.0 {
            return Response::Slip;
        }
        let hi = if (limit - (lo + dir * step)) * dir < 0.0 {
            limit
        } else {
            lo + dir * step
        };
        match gap(hi) {
            Some(g) if g >= 0.0 => {
                let (mut a, mut b) = (lo, hi);
                for _ in 0..60 {
                    let m = 0.5 * (a + b);
                    match gap(m) {
                        Some(g) if g >= 0.0 => b = m,
                        _ => a = m,
                    }
                }
                return Response::Held(b);
            }
            Some(_) => lo = hi,
            None => return Response::Slip,
        }
    }
}

/// Whether any probe point of `leaf` lies in the disc of radius `radius`
/// swept from `a` to `b`.
fn swept_disc_hits(leaf: &LeafBody, a: &Point3<f64>, b: &Point3<f64>, radius: f64, thickness: f64, res: usize) -> bool {
    let dz = b.z - a.z;
    leaf.probe_points(res).iter().any(|p| {
        let t = if dz.abs() > 1e-12 {
            ((p.z - a.z) / dz).clamp(0.0, 1.0)
        } else {
            0.5
        };
        let c = a + (b - a) * t;
        if (p.z - c.z).abs() > thickness {
            return false;
        }
        Vector3::new(p.x - c.x, p.y - c.y, 0.0).norm() <= radius
    })
}

/// Runs a tool trajectory against `leaf` of `plant`.
///
/// `pose_error` is a plant-frame perturbation left-composed onto every tool
/// pose. Joint angles start from the input state; the input is not modified.
pub fn execute_sequence(
    plant: &KinematicPlant,
    leaf: usize,
    seq: &TaskPrimitiveSequence,
    pose_error: &RigidTransform,
    cfg: &SimConfig,
) -> Result<RolloutResult> {
    let target = *plant.leaf(leaf)?;
    if seq.waypoints.is_empty() {
        return Err(Error::InvalidInput("sequence has no waypoints".into()));
    }
    let base: Vec<f64> = plant.leaves.iter().map(LeafBody::pitch).collect();
    let mut state = plant.clone();
    let tools: Vec<RigidTransform> = seq.waypoints.iter().map(|w| pose_error.compose(w)).collect();
    let outer = seq.tool_radius + cfg.ring_width;

    let mut trace = Vec::with_capacity(tools.len());
    let mut snagged = BTreeSet::new();
    let mut slipped = false;
    for (k, tool) in tools.iter().enumerate() {
        let ring = Point3::from(*tool.translation());
        if k > 0 {
            let prev = Point3::from(*tools[k - 1].translation());
            for (j, other) in state.leaves.iter().enumerate() {
                if j != leaf
                    && !snagged.contains(&j)
                    && swept_disc_hits(other, &prev, &ring, outer, cfg.snag_thickness, cfg.blade_resolution)
                {
                    snagged.insert(j);
                }
            }
        }
        for &j in &snagged {
            let body = plant.leaves[j];
            let pitch = match settle(&body, base[j], &ring, seq.mode, cfg.contact_step) {
                Response::Held(p) => p,
                Response::Free | Response::Slip => base[j],
            };
            state.leaves[j].angle = pitch - body.rest_pitch;
        }
        let held = if slipped {
            false
        } else {
            match settle(&target, base[leaf], &ring, seq.mode, cfg.contact_step) {
                Response::Held(p) => {
                    state.leaves[leaf].angle = p - target.rest_pitch;
                    true
                }
                Response::Free => {
                    state.leaves[leaf].angle = target.angle;
                    false
                }
                Response::Slip => {
                    slipped = true;
                    state.leaves[leaf].angle = target.angle;
                    false
                }
            }
        };
        trace.push(held);
    }

    let touched = trace.iter().any(|&h| h);
    let outcome = if !snagged.is_empty() {
        Outcome::NeighborSnag
    } else if slipped {
        Outcome::SlippedOff
    } else if !touched {
        Outcome::NoContact
    } else if *trace.last().unwrap_or(&false) {
        Outcome::Manipulated
    } else {
        Outcome::SlippedOff
    };
    Ok(RolloutResult {
        leaf,
        final_angles: state.angles(),
        contact_trace: trace,
        outcome,
        snagged: snagged.into_iter().collect(),
        tool: ToolPose {
            pose: *tools.last().expect("non-empty"),
            radius: seq.tool_radius,
        },
        state,
    })
}

/// Rigid perturbation with exactly `translation` meters and `angle` radians,
/// in a uniformly random direction and about a uniformly random axis.
pub fn random_pose_error<R: Rng>(translation: f64, angle: f64, rng: &mut R) -> RigidTransform {
    let unit = |rng: &mut R| loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return Unit::new_normalize(v);
        }
    };
    let axis = unit(rng);
    let dir = unit(rng);
    RigidTransform::from_axis_angle(&axis, angle, dir.into_inner() * translation)
}
