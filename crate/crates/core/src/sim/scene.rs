use std::f64::consts::TAU;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::{Face, KinematicPlant, SimConfig};
use crate::error::{Error, Result};
use crate::geom::{ray_visibility, OccluderSet, PinholeCamera, RigidTransform, SurfaceSample, Triangle};

pub const STEM_SOURCE: u32 = 1_000_000;
pub const POT_SOURCE: u32 = 1_000_001;
pub const SOIL_SOURCE: u32 = 1_000_002;
pub const TOOL_SOURCE: u32 = 1_000_003;

/// Height of the apical bud above the stem top.
pub const BUD_HEIGHT: f64 = 0.024;

const ROUND_SEGMENTS: usize = 24;

/// Ring tool: `pose` is `plant_from_tool`, the ring lies in the tool's xy
/// plane around its origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolPose {
    pub pose: RigidTransform,
    pub radius: f64,
}

impl ToolPose {
    pub fn center(&self) -> Point3<f64> {
        Point3::from(*self.pose.translation())
    }

    pub fn triangles(&self, width: f64, segments: usize) -> Vec<Triangle> {
        let n = segments.max(3);
        let (r0, r1) = (self.radius, self.radius + width);
        let ring = |r: f64, k: usize| {
            let t = TAU * k as f64 / n as f64;
            self.pose.apply(&Point3::new(r * t.cos(), r * t.sin(), 0.0))
        };
        let mut out = Vec::with_capacity(2 * n);
        for k in 0..n {
            let (a, b, c, d) = (ring(r0, k), ring(r1, k), ring(r1, k + 1), ring(r0, k + 1));
            out.push(Triangle::new(a, b, c, TOOL_SOURCE));
            out.push(Triangle::new(a, c, d, TOOL_SOURCE));
        }
        out
    }
}

fn cylinder(radius: f64, z0: f64, z1: f64, source: u32) -> Vec<Triangle> {
    let at = |k: usize, z: f64| {
        let t = TAU * k as f64 / ROUND_SEGMENTS as f64;
        Point3::new(radius * t.cos(), radius * t.sin(), z)
    };
    (0..ROUND_SEGMENTS)
        .flat_map(|k| {
            [
                Triangle::new(at(k, z0), at(k + 1, z0), at(k + 1, z1), source),
                Triangle::new(at(k, z0), at(k + 1, z1), at(k, z1), source),
            ]
        })
        .collect()
}

fn disc(radius: f64, z: f64, source: u32) -> Vec<Triangle> {
    let c = Point3::new(0.0, 0.0, z);
    let at = |k: usize| {
        let t = TAU * k as f64 / ROUND_SEGMENTS as f64;
        Point3::new(radius * t.cos(), radius * t.sin(), z)
    };
    (0..ROUND_SEGMENTS)
        .map(|k| Triangle::new(c, at(k), at(k + 1), source))
        .collect()
}

/// Every occluding triangle of the plant state plus the tool, if present.
/// Leaf `i` carries source id `i`.
pub fn scene_triangles(plant: &KinematicPlant, tool: Option<&ToolPose>, cfg: &SimConfig) -> Vec<Triangle> {
    let mut tris = Vec::new();
    for (i, leaf) in plant.leaves.iter().enumerate() {
        tris.extend(leaf.blade_triangles(cfg.blade_resolution, i as u32));
    }
    tris.extend(cylinder(
        plant.stem.radius,
        plant.pot.soil_height,
        plant.stem.top + BUD_HEIGHT,
        STEM_SOURCE,
    ));
    tris.extend(cylinder(plant.pot.radius, 0.0, plant.pot.height, POT_SOURCE));
    tris.extend(disc(plant.pot.radius, plant.pot.soil_height, SOIL_SOURCE));
    if let Some(t) = tool {
        tris.extend(t.triangles(cfg.ring_width, cfg.ring_segments));
    }
    tris
}

/// Equal-area samples on one face of a leaf blade, offset off the surface so
/// that the blade itself hides its other face.
pub fn face_samples(plant: &KinematicPlant, leaf: usize, face: Face, cfg: &SimConfig) -> Result<Vec<SurfaceSample>> {
    let body = plant.leaf(leaf)?;
    let up = body.normal();
    let sign = match face {
        Face::Top => 1.0,
        Face::Bottom => -1.0,
    };
    let k = cfg.sample_subdivision.max(1);
    let mut out = Vec::with_capacity(body_triangle_count(cfg) * k * k);
    for tri in body.blade_triangles(cfg.blade_resolution, leaf as u32) {
        let mut n = tri.normal();
        if n.dot(&up) < 0.0 {
            n = -n;
        }
        let offset = n * (sign * cfg.sample_offset);
        let weight = tri.area() / (k * k) as f64;
        let [a, b, c] = tri.vertices;
        let e1 = (b - a) / k as f64;
        let e2 = (c - a) / k as f64;
        let node = |i: usize, j: usize| a + e1 * i as f64 + e2 * j as f64;
        let mut push = |p: Point3<f64>, q: Point3<f64>, r: Point3<f64>| {
            let centroid = Point3::from((p.coords + q.coords + r.coords) / 3.0);
            out.push(SurfaceSample {
                point: centroid + offset,
                weight,
                source: None,
            });
        };
        for i in 0..k {
            for j in 0..k - i {
                push(node(i, j), node(i + 1, j), node(i, j + 1));
                if i + j + 1 < k {
                    push(node(i + 1, j), node(i + 1, j + 1), node(i, j + 1));
                }
            }
        }
    }
    Ok(out)
}

fn body_triangle_count(cfg: &SimConfig) -> usize {
    2 * cfg.blade_resolution * cfg.blade_resolution
}

/// Samples and occluders for one leaf face in a fixed plant state.
///
/// Rotating the turntable moves only the camera relative to the plant, so a
/// scene can be reused for any number of camera poses.
#[derive(Clone, Debug)]
pub struct CoverageScene {
    pub samples: Vec<SurfaceSample>,
    pub occluders: OccluderSet,
}

impl CoverageScene {
    pub fn new(
        plant: &KinematicPlant,
        tool: Option<&ToolPose>,
        leaf: usize,
        face: Face,
        cfg: &SimConfig,
    ) -> Result<Self> {
        let samples = face_samples(plant, leaf, face, cfg)?;
        let occluders = OccluderSet::new(scene_triangles(plant, tool, cfg));
        Ok(Self { samples, occluders })
    }

    /// Visible fraction of the face for a camera expressed in the plant frame.
    pub fn coverage(&self, camera: &PinholeCamera) -> Result<f64> {
        ray_visibility(&self.samples, &self.occluders, camera)
    }

    /// Visible fraction with the plant turned by `theta` on the turntable.
    pub fn coverage_at(&self, camera: &PinholeCamera, theta: f64) -> Result<f64> {
        self.coverage(&camera.viewing_frame(&RigidTransform::rotation_z(theta)))
    }
}

/// Visible fraction of one leaf face, with every other body as an occluder.
pub fn evaluate_coverage(
    plant: &KinematicPlant,
    tool: Option<&ToolPose>,
    leaf: usize,
    face: Face,
    camera: &PinholeCamera,
    cfg: &SimConfig,
) -> Result<f64> {
    if leaf >= plant.leaves.len() {
        return Err(Error::UnknownLeaf(leaf));
    }
    CoverageScene::new(plant, tool, leaf, face, cfg)?.coverage(camera)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::segment_hits_triangle;
    use crate::sim::{LeafBody, Pot, Stem};
    use nalgebra::Vector3;

    fn leaf(z: f64, azimuth: f64, a: f64, b: f64) -> LeafBody {
        LeafBody {
            pivot: Point3::new(0.005 * azimuth.cos(), 0.005 * azimuth.sin(), z),
            azimuth,
            rest_pitch: 0.0,
            petiole: 0.02,
            semi_major: a,
            semi_minor: b,
            sag: 0.0,
            limits: [-1.3, 1.3],
            angle: 0.0,
        }
    }

    fn plant(leaves: Vec<LeafBody>) -> KinematicPlant {
        KinematicPlant {
            pot: Pot {
                radius: 0.08,
                height: 0.12,
                soil_height: 0.11,
            },
            stem: Stem { radius: 0.005, top: 0.5 },
            leaves,
        }
    }

    fn camera_at(z: f64) -> PinholeCamera {
        PinholeCamera::look_at(
            Point3::new(0.075, 0.0, z),
            Point3::new(0.075, 0.0, 0.3),
            Vector3::x(),
            400.0,
            1000,
            1000,
        )
        .unwrap()
    }

    #[test]
    fn single_leaf_faces() {
        let p = plant(vec![leaf(0.3, 0.0, 0.05, 0.03)]);
        let cfg = SimConfig::default();
        let cov = |face, z| evaluate_coverage(&p, None, 0, face, &camera_at(z), &cfg).unwrap();
        assert!(cov(Face::Bottom, 0.16) >= 0.99);
        assert!(cov(Face::Top, 0.16) <= 0.01);
        assert!(cov(Face::Top, 0.45) >= 0.99);
        assert!(cov(Face::Bottom, 0.45) <= 0.01);
        assert_eq!(face_samples(&p, 0, Face::Top, &cfg).unwrap().len(), 512);
        assert!(matches!(
            evaluate_coverage(&p, None, 3, Face::Top, &camera_at(0.45), &cfg),
            Err(Error::UnknownLeaf(3))
        ));
    }

    fn brute_force(samples: &[SurfaceSample], tris: &[Triangle], camera: &PinholeCamera) -> f64 {
        let eye = camera.center();
        let total: f64 = samples.iter().map(|s| s.weight).sum();
        let seen: f64 = samples
            .iter()
            .filter(|s| camera.in_image(&s.point))
            .filter(|s| !tris.iter().any(|t| segment_hits_triangle(&s.point, &eye, t)))
            .map(|s| s.weight)
            .sum();
        seen / total
    }

    #[test]
    fn overlap_matches_dense_brute_force() {
        // a wider leaf above, turned 20° so it shades part of the lower one
        let p = plant(vec![leaf(0.3, 0.0, 0.05, 0.03), leaf(0.33, 0.35, 0.045, 0.03)]);
        let cfg = SimConfig::default();
        let camera = camera_at(0.6);
        let coarse = evaluate_coverage(&p, None, 0, Face::Top, &camera, &cfg).unwrap();
        let dense_cfg = SimConfig {
            sample_subdivision: 7,
            ..cfg
        };
        let dense = face_samples(&p, 0, Face::Top, &dense_cfg).unwrap();
        assert!(dense.len() >= 10 * 512);
        let oracle = brute_force(&dense, &scene_triangles(&p, None, &cfg), &camera);
        assert!(coarse > 0.2 && coarse < 0.9, "{coarse}");
        assert!((coarse - oracle).abs() <= 0.02, "{coarse} vs {oracle}");
    }

    #[test]
    fn tool_ring_is_an_occluder() {
        let p = plant(vec![leaf(0.3, 0.0, 0.05, 0.03)]);
        let cfg = SimConfig::default();
        let tool = ToolPose {
            pose: RigidTransform::from_translation(Vector3::new(0.075, 0.0, 0.32)),
            radius: 0.015,
        };
        let camera = camera_at(0.45);
        let without = evaluate_coverage(&p, None, 0, Face::Top, &camera, &cfg).unwrap();
        let with = evaluate_coverage(&p, Some(&tool), 0, Face::Top, &camera, &cfg).unwrap();
        assert!(with < without);
        assert_eq!(tool.triangles(0.003, 32).len(), 64);
    }

    #[test]
    fn turning_the_table_matches_turning_the_plant() {
        let theta = 0.7;
        let p = plant(vec![leaf(0.3, 0.0, 0.05, 0.03), leaf(0.33, 2.0, 0.05, 0.03)]);
        let turned = plant(vec![leaf(0.3, theta, 0.05, 0.03), leaf(0.33, 2.0 + theta, 0.05, 0.03)]);
        let cfg = SimConfig::default();
        let camera =
            PinholeCamera::look_at(Point3::new(0.3, 0.1, 0.5), Point3::new(0.0, 0.0, 0.3), Vector3::z(), 600.0, 1200, 900)
                .unwrap();
        let scene = CoverageScene::new(&p, None, 0, Face::Top, &cfg).unwrap();
        let a = scene.coverage_at(&camera, theta).unwrap();
        let b = evaluate_coverage(&turned, None, 0, Face::Top, &camera, &cfg).unwrap();
        assert!((a - b).abs() <= 2.0 / 512.0, "{a} vs {b}");
        assert_eq!(scene.coverage_at(&camera, 0.0).unwrap(), scene.coverage(&camera).unwrap());
    }
}
