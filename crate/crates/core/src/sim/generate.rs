use std::f64::consts::{PI, TAU};

use nalgebra::{Point3, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{KinematicPlant, LeafBody, Pot, Stem, SIM_VERSION};
use crate::detect::Cluster;
use crate::error::{Error, Result};
use crate::geom::{Frame, PointSet};
use crate::twin::VersionProbe;

/// Ranges for procedural plants. Every `[lo, hi]` pair is sampled uniformly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub leaf_count: [usize; 2],
    /// Blade length (tip to base), meters.
    pub leaf_length: [f64; 2],
    /// Blade width over length.
    pub aspect: [f64; 2],
    /// Dome height as a fraction of blade length.
    pub sag_fraction: [f64; 2],
    pub petiole: [f64; 2],
    /// Rest pitch of ordinary leaves, degrees (positive raises the tip).
    pub pitch_deg: [f64; 2],
    /// Probability that a leaf grows steeply upward instead.
    pub upward_probability: f64,
    pub upward_pitch_deg: [f64; 2],
    /// Height of the lowest pivot above the pot rim.
    pub first_leaf_clearance: f64,
    pub leaf_spacing: [f64; 2],
    pub noise_clusters: [usize; 2],
    pub noise_points: [usize; 2],
    pub points_per_leaf: usize,
    pub pot_radius: f64,
    pub pot_height: f64,
    pub stem_radius: f64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            leaf_count: [8, 12],
            leaf_length: [0.06, 0.14],
            aspect: [0.4, 0.7],
            sag_fraction: [0.0, 0.15],
            petiole: [0.01, 0.03],
            pitch_deg: [-25.0, 10.0],
            upward_probability: 0.15,
            upward_pitch_deg: [25.0, 40.0],
            first_leaf_clearance: 0.12,
            leaf_spacing: [0.02, 0.035],
            noise_clusters: [0, 2],
            noise_points: [20, 60],
            points_per_leaf: 3000,
            pot_radius: 0.08,
            pot_height: 0.12,
            stem_radius: 0.005,
        }
    }
}

fn check_range<T: PartialOrd + Copy + std::fmt::Debug>(name: &str, r: [T; 2], lo: T, hi: T) -> Result<()> {
    if !(r[0] <= r[1]) {
        return Err(Error::InvalidSpec(format!("{name}: min {:?} exceeds max {:?}", r[0], r[1])));
    }
    if !(r[0] >= lo && r[1] <= hi) {
        return Err(Error::InvalidSpec(format!("{name}: {r:?} outside [{lo:?}, {hi:?}]")));
    }
    Ok(())
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        check_range("leaf_count", self.leaf_count, 1, 64)?;
        check_range("leaf_length", self.leaf_length, 1e-3, 1.0)?;
        check_range("aspect", self.aspect, 0.05, 1.0)?;
        check_range("sag_fraction", self.sag_fraction, 0.0, 0.5)?;
        check_range("petiole", self.petiole, 0.0, 0.5)?;
        check_range("pitch_deg", self.pitch_deg, -60.0, 60.0)?;
        check_range("upward_pitch_deg", self.upward_pitch_deg, -60.0, 60.0)?;
        check_range("leaf_spacing", self.leaf_spacing, 0.0, 1.0)?;
        check_range("noise_clusters", self.noise_clusters, 0, 64)?;
        check_range("noise_points", self.noise_points, 1, 99)?;
        if !(0.0..=1.0).contains(&self.upward_probability) {
            return Err(Error::InvalidSpec("upward_probability must lie in [0, 1]".into()));
        }
        if self.points_per_leaf < 100 {
            return Err(Error::InvalidSpec("points_per_leaf must be at least 100".into()));
        }
        if !(self.pot_radius > 0.0 && self.pot_height > 0.0 && self.stem_radius > 0.0) {
            return Err(Error::InvalidSpec("pot and stem dimensions must be positive".into()));
        }
        if !(self.first_leaf_clearance > 0.0) {
            return Err(Error::InvalidSpec("first_leaf_clearance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterKind {
    Leaf,
    PotWall,
    PotBase,
    Soil,
    Stem,
    Bud,
    Noise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterTruth {
    pub label: i64,
    pub kind: ClusterKind,
    pub leaf: Option<usize>,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafTruth {
    pub index: usize,
    pub label: i64,
    /// True blade surface area, m².
    pub area: f64,
    /// Midrib arc length, m.
    pub length: f64,
    /// Arc length across the blade middle, m.
    pub width: f64,
    /// Area-weighted surface centroid.
    pub centroid: Point3<f64>,
    pub pivot_height: f64,
    /// Unit blade axis at rest, pointing away from the stem.
    pub direction: Vector3<f64>,
    pub sag: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub version: String,
    pub seed: u64,
    pub leaves: Vec<LeafTruth>,
    pub clusters: Vec<ClusterTruth>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantFile {
    pub version: String,
    pub seed: u64,
    pub spec: GeneratorSpec,
    pub plant: KinematicPlant,
}

fn check_version(text: &str) -> Result<()> {
    let probe: VersionProbe = serde_json::from_str(text)?;
    if probe.version != SIM_VERSION {
        return Err(Error::VersionMismatch {
            expected: SIM_VERSION.into(),
            found: probe.version,
        });
    }
    Ok(())
}

impl PlantFile {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        check_version(text)?;
        let file: PlantFile = serde_json::from_str(text)?;
        file.plant.validate()?;
        Ok(file)
    }
}

impl GroundTruth {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        check_version(text)?;
        Ok(serde_json::from_str(text)?)
    }

    pub fn leaf_by_label(&self, label: i64) -> Option<&LeafTruth> {
        self.leaves.iter().find(|l| l.label == label)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedPlant {
    pub seed: u64,
    pub spec: GeneratorSpec,
    pub plant: KinematicPlant,
    pub truth: GroundTruth,
    /// Labeled point cloud, sorted by label.
    pub clusters: Vec<Cluster>,
}

impl GeneratedPlant {
    pub fn plant_file(&self) -> PlantFile {
        PlantFile {
            version: SIM_VERSION.into(),
            seed: self.seed,
            spec: self.spec.clone(),
            plant: self.plant.clone(),
        }
    }
}

fn uniform<R: Rng>(rng: &mut R, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..=r[1])
    }
}

/// Surface integrals over the dome blade by the midpoint rule in polar
/// `(ρ, t)` coordinates of the normalized disc.
fn blade_integrals(leaf: &LeafBody) -> (f64, Vector3<f64>) {
    let (a, b, s) = (leaf.semi_major, leaf.semi_minor, leaf.sag);
    if s == 0.0 {
        return (PI * a * b, Vector3::new(leaf.petiole + a, 0.0, 0.0));
    }
    const NR: usize = 200;
    const NT: usize = 256;
    let (mut area, mut moment) = (0.0, Vector3::zeros());
    for i in 0..NR {
        let rho = (i as f64 + 0.5) / NR as f64;
        for j in 0..NT {
            let t = TAU * (j as f64 + 0.5) / NT as f64;
            let (xi, eta) = (rho * t.cos(), rho * t.sin());
            let wu = -2.0 * s * xi / a;
            let wv = -2.0 * s * eta / b;
            let da = (1.0 + wu * wu + wv * wv).sqrt() * a * b * rho / (NR * NT) as f64 * TAU;
            area += da;
            moment += leaf.local_point(xi, eta) * da;
        }
    }
    (area, moment / area)
}

/// Arc length of `w = s(1 − x²)` over `x ∈ [−1, 1]` scaled by `half`.
fn dome_arc(half: f64, sag: f64) -> f64 {
    let k = 2.0 * sag / half;
    if k == 0.0 {
        2.0 * half
    } else {
        half * ((1.0 + k * k).sqrt() + k.asinh() / k)
    }
}

fn leaf_points<R: Rng>(leaf: &LeafBody, n: usize, rng: &mut R) -> Vec<Point3<f64>> {
    let (a, b, s) = (leaf.semi_major, leaf.semi_minor, leaf.sag);
    let bound = (1.0 + (2.0 * s / a).powi(2) + (2.0 * s / b).powi(2)).sqrt();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let xi: f64 = rng.random_range(-1.0..1.0);
        let eta: f64 = rng.random_range(-1.0..1.0);
        if xi * xi + eta * eta > 1.0 {
            continue;
        }
        let density = (1.0 + (2.0 * s * xi / a).powi(2) + (2.0 * s * eta / b).powi(2)).sqrt();
        if rng.random::<f64>() * bound > density {
            continue;
        }
        out.push(leaf.world_point(xi, eta));
    }
    out
}

fn disc_point<R: Rng>(rng: &mut R, radius: f64) -> (f64, f64) {
    loop {
        let x: f64 = rng.random_range(-1.0..1.0);
        let y: f64 = rng.random_range(-1.0..1.0);
        if x * x + y * y <= 1.0 {
            return (radius * x, radius * y);
        }
    }
}

fn cylinder_points<R: Rng>(rng: &mut R, radius: f64, z: [f64; 2], n: usize) -> Vec<Point3<f64>> {
    (0..n)
        .map(|_| {
            let t = rng.random_range(0.0..TAU);
            Point3::new(radius * t.cos(), radius * t.sin(), uniform(rng, z))
        })
        .collect()
}

const POT_WALL_POINTS: usize = 2000;
const POT_BASE_POINTS: usize = 600;
const SOIL_POINTS: usize = 1200;
const STEM_POINTS: usize = 1200;
const BUD_POINTS: usize = 300;
/// Soil points scatter this far below the nominal soil surface.
const SOIL_ROUGHNESS: f64 = 0.004;
const SOIL_DEPTH: f64 = 0.01;
const STEM_HEADROOM: f64 = 0.02;
const BUD_RADIUS: f64 = 0.012;
const PITCH_LIMIT: f64 = 75.0;

/// Builds a seeded random plant, its ground truth and its labeled cloud.
pub fn generate_plant(seed: u64, spec: &GeneratorSpec) -> Result<GeneratedPlant> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let golden = PI * (3.0 - 5f64.sqrt());
    let count = rng.random_range(spec.leaf_count[0]..=spec.leaf_count[1]);
    let az0 = rng.random_range(0.0..TAU);
    let soil_height = spec.pot_height - SOIL_DEPTH;

    let mut leaves = Vec::with_capacity(count);
    let mut z = spec.pot_height + spec.first_leaf_clearance;
    for i in 0..count {
        if i > 0 {
            z += uniform(&mut rng, spec.leaf_spacing);
        }
        let azimuth = (az0 + golden * i as f64).rem_euclid(TAU);
        let upward = rng.random::<f64>() < spec.upward_probability;
        let pitch = if upward {
            uniform(&mut rng, spec.upward_pitch_deg)
        } else {
            uniform(&mut rng, spec.pitch_deg)
        }
        .to_radians();
        let length = uniform(&mut rng, spec.leaf_length);
        let a = length / 2.0;
        let b = a * uniform(&mut rng, spec.aspect);
        let sag = uniform(&mut rng, spec.sag_fraction) * length;
        let petiole = uniform(&mut rng, spec.petiole);
        let limit = PITCH_LIMIT.to_radians();
        leaves.push(LeafBody {
            pivot: Point3::new(
                spec.stem_radius * azimuth.cos(),
                spec.stem_radius * azimuth.sin(),
                z,
            ),
            azimuth,
            rest_pitch: pitch,
            petiole,
            semi_major: a,
            semi_minor: b,
            sag,
            limits: [-limit - pitch, limit - pitch],
            angle: 0.0,
        });
    }
    let leaf_top = leaves
        .iter()
        .flat_map(|l| l.probe_points(16))
        .map(|p| p.z)
        .fold(f64::NEG_INFINITY, f64::max);
    let plant = KinematicPlant {
        pot: Pot {
            radius: spec.pot_radius,
            height: spec.pot_height,
            soil_height,
        },
        stem: Stem {
            radius: spec.stem_radius,
            top: leaf_top + STEM_HEADROOM,
        },
        leaves,
    };

    // point clouds, in a fixed body order before label shuffling
    let mut bodies: Vec<(ClusterKind, Option<usize>, Vec<Point3<f64>>)> = Vec::new();
    for (i, leaf) in plant.leaves.iter().enumerate() {
        bodies.push((ClusterKind::Leaf, Some(i), leaf_points(leaf, spec.points_per_leaf, &mut rng)));
    }
    bodies.push((
        ClusterKind::PotWall,
        None,
        cylinder_points(&mut rng, spec.pot_radius, [0.0, spec.pot_height], POT_WALL_POINTS),
    ));
    let base = (0..POT_BASE_POINTS)
        .map(|_| {
            let (x, y) = disc_point(&mut rng, spec.pot_radius);
            Point3::new(x, y, 0.0)
        })
        .collect();
    bodies.push((ClusterKind::PotBase, None, base));
    let soil = (0..SOIL_POINTS)
        .map(|_| {
            let (x, y) = disc_point(&mut rng, spec.pot_radius);
            Point3::new(x, y, soil_height - rng.random_range(0.0..SOIL_ROUGHNESS))
        })
        .collect();
    bodies.push((ClusterKind::Soil, None, soil));
    bodies.push((
        ClusterKind::Stem,
        None,
        cylinder_points(&mut rng, spec.stem_radius, [soil_height, plant.stem.top], STEM_POINTS),
    ));
    let bud_center = Point3::new(0.0, 0.0, plant.stem.top + BUD_RADIUS);
    let bud = (0..BUD_POINTS)
        .map(|_| {
            let v = loop {
                let v = Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                let n = v.norm();
                if n > 1e-3 && n <= 1.0 {
                    break v / n;
                }
            };
            bud_center + v * BUD_RADIUS
        })
        .collect();
    bodies.push((ClusterKind::Bud, None, bud));
    let n_noise = rng.random_range(spec.noise_clusters[0]..=spec.noise_clusters[1]);
    let (z_lo, z_hi) = (
        plant.leaves[0].pivot.z,
        plant.leaves.last().map(|l| l.pivot.z).unwrap_or(z),
    );
    for _ in 0..n_noise {
        let t = rng.random_range(0.0..TAU);
        let r = rng.random_range(0.05..0.2);
        let c = Point3::new(r * t.cos(), r * t.sin(), uniform(&mut rng, [z_lo, z_hi.max(z_lo)]));
        let n = rng.random_range(spec.noise_points[0]..=spec.noise_points[1]);
        let pts = (0..n)
            .map(|_| {
                c + Vector3::new(
                    rng.random_range(-0.006..0.006),
                    rng.random_range(-0.006..0.006),
                    rng.random_range(-0.006..0.006),
                )
            })
            .collect();
        bodies.push((ClusterKind::Noise, None, pts));
    }

    let mut labels: Vec<i64> = (0..bodies.len() as i64).collect();
    labels.shuffle(&mut rng);

    let mut truth_clusters = Vec::with_capacity(bodies.len());
    let mut clusters = Vec::with_capacity(bodies.len());
    for ((kind, leaf, pts), label) in bodies.into_iter().zip(&labels) {
        truth_clusters.push(ClusterTruth {
            label: *label,
            kind,
            leaf,
            points: pts.len(),
        });
        clusters.push(Cluster::new(*label, PointSet::new(Frame::Plant, pts)?)?);
    }
    clusters.sort_by_key(|c| c.label);
    truth_clusters.sort_by_key(|c| c.label);

    let leaf_truth = plant
        .leaves
        .iter()
        .enumerate()
        .map(|(i, leaf)| {
            let (area, local_centroid) = blade_integrals(leaf);
            let label = truth_clusters
                .iter()
                .find(|c| c.leaf == Some(i))
                .map(|c| c.label)
                .expect("every leaf has a cluster");
            LeafTruth {
                index: i,
                label,
                area,
                length: dome_arc(leaf.semi_major, leaf.sag),
                width: dome_arc(leaf.semi_minor, leaf.sag),
                centroid: leaf.world_point_at(leaf.rest_pitch, &local_centroid),
                pivot_height: leaf.pivot.z,
                direction: leaf.rest_orientation() * Vector3::x(),
                sag: leaf.sag,
            }
        })
        .collect();

    Ok(GeneratedPlant {
        seed,
        spec: spec.clone(),
        plant,
        truth: GroundTruth {
            version: SIM_VERSION.into(),
            seed,
            leaves: leaf_truth,
            clusters: truth_clusters,
        },
        clusters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::{detect_leaves, DetectionConfig};

    #[test]
    fn deterministic_per_seed() {
        let spec = GeneratorSpec::default();
        let a = generate_plant(7, &spec).unwrap();
        let b = generate_plant(7, &spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.truth.to_json().unwrap(), b.truth.to_json().unwrap());
        let c = generate_plant(8, &spec).unwrap();
        assert_ne!(a.plant, c.plant);
    }

    #[test]
    fn flat_leaf_area_is_exact() {
        let spec = GeneratorSpec {
            sag_fraction: [0.0, 0.0],
            ..GeneratorSpec::default()
        };
        let g = generate_plant(3, &spec).unwrap();
        for (t, l) in g.truth.leaves.iter().zip(&g.plant.leaves) {
            assert_eq!(t.area, PI * l.semi_major * l.semi_minor);
            assert_eq!(t.length, 2.0 * l.semi_major);
            assert_eq!(t.width, 2.0 * l.semi_minor);
        }
    }

    #[test]
    fn curved_area_matches_closed_form_for_circular_dome() {
        // for a = b the dome is a paraboloid of revolution with a closed-form area
        let leaf = LeafBody {
            pivot: Point3::origin(),
            azimuth: 0.0,
            rest_pitch: 0.0,
            petiole: 0.0,
            semi_major: 0.05,
            semi_minor: 0.05,
            sag: 0.02,
            limits: [-1.0, 1.0],
            angle: 0.0,
        };
        let (area, _) = blade_integrals(&leaf);
        let (r, h) = (0.05f64, 0.02f64);
        let exact = PI * r / (6.0 * h * h) * ((r * r + 4.0 * h * h).powf(1.5) - r.powi(3));
        assert!((area - exact).abs() / exact < 1e-4, "{area} vs {exact}");
    }

    #[test]
    fn dome_arc_matches_numeric() {
        let (half, sag) = (0.05, 0.015);
        let n = 100_000;
        let mut len = 0.0;
        for i in 0..n {
            let x0 = -1.0 + 2.0 * i as f64 / n as f64;
            let x1 = x0 + 2.0 / n as f64;
            let dz = sag * (x1 * x1 - x0 * x0);
            len += ((half * (x1 - x0)).powi(2) + dz * dz).sqrt();
        }
        assert!((dome_arc(half, sag) - len).abs() < 1e-9);
    }

    #[test]
    fn detection_recovers_generated_leaves() {
        for seed in 0..10 {
            let g = generate_plant(seed, &GeneratorSpec::default()).unwrap();
            let r = detect_leaves(&g.clusters, &DetectionConfig::default());
            let mut found = r.leaf_labels();
            found.sort();
            let mut truth: Vec<i64> = g.truth.leaves.iter().map(|l| l.label).collect();
            truth.sort();
            assert_eq!(found, truth, "seed {seed}");
        }
    }

    #[test]
    fn invalid_ranges_rejected() {
        let spec = GeneratorSpec {
            leaf_count: [12, 8],
            ..GeneratorSpec::default()
        };
        assert!(matches!(generate_plant(1, &spec), Err(Error::InvalidSpec(_))));
        let spec = GeneratorSpec {
            points_per_leaf: 50,
            ..GeneratorSpec::default()
        };
        assert!(matches!(generate_plant(1, &spec), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn files_round_trip() {
        let g = generate_plant(11, &GeneratorSpec::default()).unwrap();
        let pf = g.plant_file();
        assert_eq!(PlantFile::from_json(&pf.to_json().unwrap()).unwrap(), pf);
        assert_eq!(GroundTruth::from_json(&g.truth.to_json().unwrap()).unwrap(), g.truth);
        let bad = pf.to_json().unwrap().replace(SIM_VERSION, "phytosim/9");
        assert!(matches!(PlantFile::from_json(&bad), Err(Error::VersionMismatch { .. })));
    }
}
