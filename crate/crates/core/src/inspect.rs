//! Inspection planning: turntable alignment, tool placement and lift/push
//! trajectories, scored by simulated view coverage.

use nalgebra::{Point3, Rotation3, Unit, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{
    ray_visibility, rotation_between, wrap_angle, OccluderSet, PinholeCamera, RigidTransform,
    SurfaceSample,
};
use crate::sim::{
    execute_sequence, CoverageScene, Face, Outcome, SimConfig, Simulator, ToolPose, SIM_VERSION,
};
use crate::twin::{ComponentFeature, DigitalTwin, VersionProbe};

pub const PLAN_VERSION: &str = "phytoplan/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Lift,
    Push,
}

impl Mode {
    /// Face the manipulation is meant to expose.
    pub fn face(self) -> Face {
        match self {
            Mode::Lift => Face::Bottom,
            Mode::Push => Face::Top,
        }
    }

    fn sign(self) -> f64 {
        match self {
            Mode::Lift => 1.0,
            Mode::Push => -1.0,
        }
    }
}

/// Vertical cylinder the tool ring must stay clear of.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeepOut {
    pub radius: f64,
    pub z_min: f64,
    pub z_max: f64,
}

/// Reachable box for the tool center, plus keep-out cylinders around the
/// pot and stem. Plant frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub keep_out: Vec<KeepOut>,
}

impl Default for Workspace {
    fn default() -> Self {
        Self {
            min: [-0.4, -0.4, 0.0],
            max: [0.4, 0.4, 0.9],
            keep_out: vec![
                KeepOut {
                    radius: 0.085,
                    z_min: 0.0,
                    z_max: 0.13,
                },
                KeepOut {
                    radius: 0.006,
                    z_min: 0.0,
                    z_max: f64::INFINITY,
                },
            ],
        }
    }
}

/// Fixed inspection camera: level, 0.75 m from the turntable axis.
pub fn default_camera() -> PinholeCamera {
    PinholeCamera::look_at(
        Point3::new(0.75, 0.0, 0.42),
        Point3::new(0.0, 0.0, 0.42),
        Vector3::z(),
        800.0,
        1600,
        1200,
    )
    .expect("valid default camera")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InspectionConfig {
    /// Alignment margin ε, degrees.
    pub margin_deg: f64,
    /// Tool rotation φ over the trajectory, degrees.
    pub tool_rotation_deg: f64,
    /// Tool travel as a fraction of the longest box extent.
    pub lift_fraction: [f64; 2],
    pub fraction_step: f64,
    pub min_leaf_length: f64,
    pub success_threshold: f64,
    pub camera: PinholeCamera,
    pub ring_radius: f64,
    /// Gap between ring and leaf at the prepare pose.
    pub clearance: f64,
    pub waypoints: usize,
    /// Leaves whose outward axis rises more than this are pushed.
    pub push_pitch_deg: f64,
    pub mode_override: Option<Mode>,
    pub workspace: Workspace,
    pub sim: SimConfig,
}

impl Default for InspectionConfig {
    fn default() -> Self {
        Self {
            margin_deg: 5.0,
            tool_rotation_deg: 30.0,
            lift_fraction: [0.65, 0.90],
            fraction_step: 0.05,
            min_leaf_length: 0.05,
            success_threshold: 0.75,
            camera: default_camera(),
            ring_radius: 0.015,
            clearance: 0.01,
            waypoints: 10,
            push_pitch_deg: 20.0,
            mode_override: None,
            workspace: Workspace::default(),
            sim: SimConfig::default(),
        }
    }
}

impl InspectionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        let [lo, hi] = self.lift_fraction;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return bad("lift fraction range must satisfy 0 < low <= high <= 1");
        }
        if !(self.fraction_step > 0.0) {
            return bad("fraction_step must be positive");
        }
        if !(self.success_threshold > 0.0 && self.success_threshold <= 1.0) {
            return bad("success_threshold must lie in (0, 1]");
        }
        if !(self.margin_deg > 0.0 && self.margin_deg < 90.0) {
            return bad("margin_deg must lie in (0, 90)");
        }
        if !(self.min_leaf_length >= 0.0) {
            return bad("min_leaf_length must be >= 0");
        }
        if !(self.ring_radius > 0.0 && self.clearance >= 0.0) {
            return bad("ring_radius must be positive and clearance >= 0");
        }
        if self.waypoints < 2 {
            return bad("at least two waypoints are required");
        }
        if !self.tool_rotation_deg.is_finite() || !self.push_pitch_deg.is_finite() {
            return bad("angles must be finite");
        }
        if self.sim.blade_resolution == 0 || self.sim.sample_subdivision == 0 {
            return bad("simulator resolutions must be positive");
        }
        self.camera
            .validate()
            .map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Candidate lift fractions from low to high in `fraction_step` steps.
    pub fn fractions(&self) -> Vec<f64> {
        let [lo, hi] = self.lift_fraction;
        let n = ((hi - lo) / self.fraction_step + 1e-9).floor() as usize;
        (0..=n).map(|k| lo + k as f64 * self.fraction_step).collect()
    }
}

/// Turntable angle bringing the leaf axis toward the camera.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    /// Turntable rotation, radians in `(-π, π]`.
    pub theta: f64,
    /// Horizontal angle between the turned leaf axis and the direction to
    /// the camera, radians.
    pub residual: f64,
    /// Horizontal angle between the optical axis and the turned leaf center
    /// as seen from the camera, radians.
    pub center_offset: f64,
}

/// Unit horizontal part of `v`, or `None` when `v` is (nearly) vertical.
fn horizontal(v: &Vector3<f64>) -> Option<Vector2<f64>> {
    let h = Vector2::new(v.x, v.y);
    let n = h.norm();
    (n > 1e-12).then(|| h / n)
}

fn heading(v: &Vector2<f64>) -> f64 {
    v.y.atan2(v.x)
}

/// Leaf axis oriented away from the stem.
pub fn outward_direction(feature: &ComponentFeature) -> Vector3<f64> {
    let q = feature.direction;
    let c = Vector2::new(feature.center.x, feature.center.y);
    if Vector2::new(q.x, q.y).dot(&c) < 0.0 {
        -q
    } else {
        q
    }
}

fn center_offset(center: &Point3<f64>, camera: &PinholeCamera, theta: f64) -> f64 {
    let axis = camera.optical_axis();
    let eye = camera.center();
    let c = Rotation3::from_axis_angle(&Vector3::z_axis(), theta) * center.coords;
    let to_c = Vector2::new(c.x - eye.x, c.y - eye.y);
    let a = Vector2::new(axis.x, axis.y);
    (a.x * to_c.y - a.y * to_c.x).atan2(a.dot(&to_c)).abs()
}

/// Turntable angle that points the leaf's horizontal axis at the camera.
///
/// The unconstrained optimum is closed form. When it leaves the turned leaf
/// center more than `margin` off the optical axis, the nearest angle that
/// brings the center within `margin` is used instead, provided the axis
/// residual stays within `margin`.
pub fn rotation_alignment(feature: &ComponentFeature, camera: &PinholeCamera, margin: f64) -> Result<Alignment> {
    let q = outward_direction(feature);
    let elevation = q.z.abs().asin();
    let qh = match horizontal(&q) {
        Some(h) if elevation <= std::f64::consts::FRAC_PI_2 - margin => h,
        _ => {
            return Err(Error::Unalignable {
                residual_deg: elevation.to_degrees(),
            })
        }
    };
    let toward = horizontal(&-camera.optical_axis())
        .ok_or_else(|| Error::InvalidInput("camera optical axis is vertical".into()))?;
    let theta0 = wrap_angle(heading(&toward) - heading(&qh));
    let offset0 = center_offset(&feature.center, camera, theta0);
    if offset0 <= margin {
        return Ok(Alignment {
            theta: theta0,
            residual: 0.0,
            center_offset: offset0,
        });
    }
    // walk away from the optimum on both sides until the center constraint holds
    let step = 0.1f64.to_radians();
    let mut best: Option<(f64, f64)> = None;
    for side in [1.0, -1.0] {
        let mut prev = 0.0;
        let mut k = 1;
        while k as f64 * step <= margin + step {
            let delta = side * k as f64 * step;
            if center_offset(&feature.center, camera, theta0 + delta) <= margin {
                let (mut lo, mut hi) = (prev, delta);
                for _ in 0..50 {
                    let mid = 0.5 * (lo + hi);
                    if center_offset(&feature.center, camera, theta0 + mid) <= margin {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                if best.is_none_or(|(_, r)| hi.abs() < r) {
                    best = Some((hi, hi.abs()));
                }
                break;
            }
            prev = delta;
            k += 1;
        }
    }
    match best {
        Some((delta, residual)) if residual <= margin => Ok(Alignment {
            theta: wrap_angle(theta0 + delta),
            residual,
            center_offset: center_offset(&feature.center, camera, theta0 + delta),
        }),
        _ => Err(Error::Unalignable {
            residual_deg: offset0.to_degrees(),
        }),
    }
}

/// Prepare pose (`plant_from_tool`): ring under (lift) or over (push) the
/// leaf center, ring plane parallel to the leaf plane.
pub fn tool_positioning(feature: &ComponentFeature, mode: Mode, config: &InspectionConfig) -> Result<RigidTransform> {
    let mut n = feature.normal;
    if n.norm() < 1e-12 {
        n = Vector3::z();
    }
    if n.z < 0.0 {
        n = -n;
    }
    let n = n.normalize();
    let offset = config.ring_radius + config.clearance;
    let c = feature.center;
    let position = Vector3::new(c.x, c.y, c.z - mode.sign() * offset);
    let pose = RigidTransform::from_rotation(rotation_between(&Vector3::z(), &n), position);
    check_workspace(&position, config)?;
    Ok(pose)
}

fn check_workspace(p: &Vector3<f64>, config: &InspectionConfig) -> Result<()> {
    let ws = &config.workspace;
    for i in 0..3 {
        if p[i] < ws.min[i] || p[i] > ws.max[i] {
            return Err(Error::OutOfWorkspace(format!(
                "tool at ({:.3}, {:.3}, {:.3}) outside the reachable box",
                p.x, p.y, p.z
            )));
        }
    }
    let reach = config.ring_radius + config.sim.ring_width;
    let r = (p.x * p.x + p.y * p.y).sqrt();
    for k in &ws.keep_out {
        if r < k.radius + reach && p.z >= k.z_min && p.z <= k.z_max {
            return Err(Error::OutOfWorkspace(format!(
                "tool ring within {:.3} m of a keep-out cylinder of radius {:.3} m",
                r, k.radius
            )));
        }
    }
    Ok(())
}

/// The three task primitives for one leaf.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskPrimitiveSequence {
    pub mode: Mode,
    /// Turntable rotation, radians.
    pub theta: f64,
    pub prepare: RigidTransform,
    /// Tool poses (`plant_from_tool`), first at the prepare pose.
    pub waypoints: Vec<RigidTransform>,
    pub tool_radius: f64,
    pub lift_fraction: f64,
}

impl TaskPrimitiveSequence {
    /// Mode-dependent direction of travel and monotone heights.
    pub fn validate(&self) -> Result<()> {
        if self.waypoints.len() < 2 {
            return Err(Error::InvalidInput("trajectory needs at least two waypoints".into()));
        }
        let s = self.mode.sign();
        let z: Vec<f64> = self.waypoints.iter().map(|w| w.translation().z).collect();
        if z.windows(2).any(|w| s * (w[1] - w[0]) < 0.0) {
            return Err(Error::InvalidInput("waypoints not monotone in z".into()));
        }
        if s * (z[z.len() - 1] - z[0]) <= 0.0 {
            return Err(Error::InvalidInput("trajectory does not move in the mode direction".into()));
        }
        Ok(())
    }

    pub fn delta_z(&self) -> f64 {
        self.waypoints.last().map_or(0.0, |w| w.translation().z) - self.prepare.translation().z
    }
}

/// Straight vertical travel of `fraction × length` from the prepare pose,
/// with the ring turning linearly to `φ` about the leaf hinge.
pub fn plan_manipulation(
    feature: &ComponentFeature,
    mode: Mode,
    theta: f64,
    prepare: &RigidTransform,
    fraction: f64,
    config: &InspectionConfig,
) -> Result<TaskPrimitiveSequence> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!("lift fraction {fraction} outside (0, 1]")));
    }
    let length = feature.shape.length;
    if length < config.min_leaf_length {
        return Err(Error::LeafTooSmall {
            length,
            minimum: config.min_leaf_length,
        });
    }
    let dz = mode.sign() * fraction * length;
    let q = outward_direction(feature);
    let hinge = horizontal(&q)
        .map(|h| Vector3::new(h.x, h.y, 0.0).cross(&Vector3::z()))
        .unwrap_or_else(Vector3::x);
    let hinge = Unit::new_normalize(hinge);
    let phi = mode.sign() * config.tool_rotation_deg.to_radians();
    let n = config.waypoints;
    let start = *prepare.translation();
    let waypoints = (0..n)
        .map(|k| {
            let s = k as f64 / (n - 1) as f64;
            let turn = Rotation3::from_axis_angle(&hinge, phi * s);
            RigidTransform::new(
                turn.matrix() * prepare.rotation(),
                start + Vector3::new(0.0, 0.0, dz * s),
            )
            .expect("product of rotations")
        })
        .collect();
    Ok(TaskPrimitiveSequence {
        mode,
        theta,
        prepare: *prepare,
        waypoints,
        tool_radius: config.ring_radius,
        lift_fraction: fraction,
    })
}

/// Area-weighted visible fraction of a leaf surface.
pub fn view_coverage(samples: &[SurfaceSample], occluders: &OccluderSet, camera: &PinholeCamera) -> Result<f64> {
    let area: f64 = samples.iter().map(|s| s.weight).sum();
    if !(area > 0.0) {
        return Err(Error::InvalidInput("leaf surface has zero area".into()));
    }
    ray_visibility(samples, occluders, camera)
}

/// Mode from leaf attitude: steeply rising leaves are pushed, others lifted.
pub fn choose_mode(feature: &ComponentFeature, config: &InspectionConfig) -> Mode {
    if let Some(m) = config.mode_override {
        return m;
    }
    let pitch = outward_direction(feature).z.clamp(-1.0, 1.0).asin();
    if pitch > config.push_pitch_deg.to_radians() {
        Mode::Push
    } else {
        Mode::Lift
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    Unalignable,
    LeafTooSmall,
    OutOfWorkspace,
    /// No candidate beat the coverage with the tool parked at the prepare pose.
    NoImprovement,
}

/// One leaf's plan, as stored in the plan file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InspectionPlan {
    pub leaf_id: u32,
    /// Matching simulator leaf, when a simulator was available.
    pub sim_leaf: Option<usize>,
    pub mode: Option<Mode>,
    pub theta_deg: Option<f64>,
    pub lift_fraction: Option<f64>,
    pub tool_radius: f64,
    pub prepare: Option<RigidTransform>,
    pub waypoints: Vec<RigidTransform>,
    pub predicted_coverage: Option<f64>,
    pub baseline_coverage: Option<f64>,
    pub skip_reason: Option<SkipReason>,
    pub skip_detail: Option<String>,
}

impl InspectionPlan {
    fn skipped(leaf_id: u32, reason: SkipReason, detail: String, config: &InspectionConfig) -> Self {
        Self {
            leaf_id,
            sim_leaf: None,
            mode: None,
            theta_deg: None,
            lift_fraction: None,
            tool_radius: config.ring_radius,
            prepare: None,
            waypoints: Vec::new(),
            predicted_coverage: None,
            baseline_coverage: None,
            skip_reason: Some(reason),
            skip_detail: Some(detail),
        }
    }

    pub fn is_skipped(&self) -> bool {
        self.skip_reason.is_some()
    }

    pub fn sequence(&self) -> Option<TaskPrimitiveSequence> {
        if self.is_skipped() {
            return None;
        }
        Some(TaskPrimitiveSequence {
            mode: self.mode?,
            theta: self.theta_deg?.to_radians(),
            prepare: self.prepare?,
            waypoints: self.waypoints.clone(),
            tool_radius: self.tool_radius,
            lift_fraction: self.lift_fraction?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        match (self.is_skipped(), self.predicted_coverage) {
            (true, None) if self.waypoints.is_empty() && self.prepare.is_none() => Ok(()),
            (false, Some(c)) if (0.0..=1.0).contains(&c) => self
                .sequence()
                .ok_or_else(|| Error::InvalidInput(format!("plan for leaf {} is incomplete", self.leaf_id)))?
                .validate(),
            _ => Err(Error::InvalidInput(format!(
                "plan for leaf {}: coverage must be present exactly when not skipped",
                self.leaf_id
            ))),
        }
    }
}

/// Coverage of the sequence's target face after rolling it out.
pub fn rollout_coverage(
    sim: &Simulator,
    leaf: usize,
    seq: &TaskPrimitiveSequence,
    pose_error: &RigidTransform,
    camera: &PinholeCamera,
) -> Result<(Outcome, f64)> {
    let r = execute_sequence(&sim.plant, leaf, seq, pose_error, &sim.config)?;
    let scene = CoverageScene::new(&r.state, Some(&r.tool), leaf, seq.mode.face(), &sim.config)?;
    Ok((r.outcome, scene.coverage_at(camera, seq.theta)?))
}

/// Coverage with the plant at rest and the tool parked at `prepare`.
pub fn baseline_coverage(
    sim: &Simulator,
    leaf: usize,
    mode: Mode,
    prepare: &RigidTransform,
    theta: f64,
    config: &InspectionConfig,
) -> Result<f64> {
    let tool = ToolPose {
        pose: *prepare,
        radius: config.ring_radius,
    };
    CoverageScene::new(&sim.plant, Some(&tool), leaf, mode.face(), &sim.config)?
        .coverage_at(&config.camera, theta)
}

/// Aligns, positions and scores every candidate lift fraction in the
/// simulator, keeping the best. Ties go to the smallest travel.
pub fn optimize_plan(
    feature: &ComponentFeature,
    twin: &DigitalTwin,
    sim: &Simulator,
    config: &InspectionConfig,
) -> Result<InspectionPlan> {
    config.validate()?;
    match twin.component(feature.id) {
        Some(c) if c.class.is_leaf() => {}
        _ => return Err(Error::UnknownComponent(feature.id)),
    }
    let skip = |reason, e: Error| Ok(InspectionPlan::skipped(feature.id, reason, e.to_string(), config));
    if feature.shape.length < config.min_leaf_length {
        let e = Error::LeafTooSmall {
            length: feature.shape.length,
            minimum: config.min_leaf_length,
        };
        return skip(SkipReason::LeafTooSmall, e);
    }
    let align = match rotation_alignment(feature, &config.camera, config.margin_deg.to_radians()) {
        Ok(a) => a,
        Err(e @ Error::Unalignable { .. }) => return skip(SkipReason::Unalignable, e),
        Err(e) => return Err(e),
    };
    let mode = choose_mode(feature, config);
    let prepare = match tool_positioning(feature, mode, config) {
        Ok(p) => p,
        Err(e @ Error::OutOfWorkspace(_)) => return skip(SkipReason::OutOfWorkspace, e),
        Err(e) => return Err(e),
    };
    let leaf = sim.match_leaf(&feature.center).ok_or(Error::UnknownLeaf(0))?;
    let camera = config.camera;
    let baseline = baseline_coverage(sim, leaf, mode, &prepare, align.theta, config)?;

    let mut best: Option<(TaskPrimitiveSequence, f64)> = None;
    for fraction in config.fractions() {
        let seq = plan_manipulation(feature, mode, align.theta, &prepare, fraction, config)?;
        let (_, c) = rollout_coverage(sim, leaf, &seq, &RigidTransform::identity(), &camera)?;
        if best.as_ref().is_none_or(|(_, b)| c > *b) {
            best = Some((seq, c));
        }
    }
    let (seq, c) = best.expect("at least one candidate fraction");
    if c < baseline {
        let mut plan = InspectionPlan::skipped(
            feature.id,
            SkipReason::NoImprovement,
            format!("best candidate {c:.3} below baseline {baseline:.3}"),
            config,
        );
        plan.sim_leaf = Some(leaf);
        plan.baseline_coverage = Some(baseline);
        return Ok(plan);
    }
    Ok(InspectionPlan {
        leaf_id: feature.id,
        sim_leaf: Some(leaf),
        mode: Some(mode),
        theta_deg: Some(seq.theta.to_degrees()),
        lift_fraction: Some(seq.lift_fraction),
        tool_radius: seq.tool_radius,
        prepare: Some(seq.prepare),
        waypoints: seq.waypoints,
        predicted_coverage: Some(c),
        baseline_coverage: Some(baseline),
        skip_reason: None,
        skip_detail: None,
    })
}

/// Plans every leaf of the twin, in id order.
pub fn plan_plant(twin: &DigitalTwin, sim: &Simulator, config: &InspectionConfig) -> Result<Vec<InspectionPlan>> {
    twin.leaf_ids()
        .into_iter()
        .map(|id| optimize_plan(twin.component(id).expect("leaf id"), twin, sim, config))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub version: String,
    pub camera: PinholeCamera,
    pub success_threshold: f64,
    pub plans: Vec<InspectionPlan>,
}

impl PlanFile {
    pub fn new(plans: Vec<InspectionPlan>, config: &InspectionConfig) -> Self {
        Self {
            version: PLAN_VERSION.into(),
            camera: config.camera,
            success_threshold: config.success_threshold,
            plans,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: VersionProbe = serde_json::from_str(text)?;
        if probe.version != PLAN_VERSION {
            return Err(Error::VersionMismatch {
                expected: PLAN_VERSION.into(),
                found: probe.version,
            });
        }
        let file: PlanFile = serde_json::from_str(text)?;
        file.plans.iter().try_for_each(InspectionPlan::validate)?;
        Ok(file)
    }
}

/// Outcome of executing one plan in the simulator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutRecord {
    pub leaf_id: u32,
    pub sim_leaf: usize,
    pub mode: Mode,
    pub outcome: Outcome,
    pub coverage: f64,
    pub observed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutReport {
    pub version: String,
    pub pose_error: RigidTransform,
    pub records: Vec<RolloutRecord>,
    /// Leaves that were not executed, with their skip reasons.
    pub skipped: Vec<(u32, SkipReason)>,
}

impl RolloutReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: VersionProbe = serde_json::from_str(text)?;
        if probe.version != SIM_VERSION {
            return Err(Error::VersionMismatch {
                expected: SIM_VERSION.into(),
                found: probe.version,
            });
        }
        Ok(serde_json::from_str(text)?)
    }
}

/// Executes every non-skipped plan with the given tool pose error.
pub fn execute_plans(file: &PlanFile, sim: &Simulator, pose_error: &RigidTransform) -> Result<RolloutReport> {
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for plan in &file.plans {
        if let Some(reason) = plan.skip_reason {
            skipped.push((plan.leaf_id, reason));
            continue;
        }
        let seq = plan.sequence().ok_or_else(|| {
            Error::InvalidInput(format!("plan for leaf {} is incomplete", plan.leaf_id))
        })?;
        let leaf = plan.sim_leaf.ok_or(Error::UnknownLeaf(plan.leaf_id as usize))?;
        let (outcome, coverage) = rollout_coverage(sim, leaf, &seq, pose_error, &file.camera)?;
        records.push(RolloutRecord {
            leaf_id: plan.leaf_id,
            sim_leaf: leaf,
            mode: seq.mode,
            outcome,
            coverage,
            observed: coverage >= file.success_threshold,
        });
    }
    Ok(RolloutReport {
        version: SIM_VERSION.into(),
        pose_error: *pose_error,
        records,
        skipped,
    })
}
