use nalgebra::{Point3, Vector3};

use super::PinholeCamera;
use crate::error::{Error, Result};

/// Occluding triangle tagged with the body it belongs to.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triangle {
    pub vertices: [Point3<f64>; 3],
    pub source: u32,
}

impl Triangle {
    pub fn new(a: Point3<f64>, b: Point3<f64>, c: Point3<f64>, source: u32) -> Self {
        Self {
            vertices: [a, b, c],
            source,
        }
    }

    pub fn area(&self) -> f64 {
        let [a, b, c] = &self.vertices;
        (b - a).cross(&(c - a)).norm() / 2.0
    }

    /// Unit normal by counter-clockwise winding; zero for degenerate triangles.
    pub fn normal(&self) -> Vector3<f64> {
        let [a, b, c] = &self.vertices;
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            Vector3::zeros()
        }
    }

    pub fn centroid(&self) -> Point3<f64> {
        let [a, b, c] = &self.vertices;
        Point3::from((a.coords + b.coords + c.coords) / 3.0)
    }
}

/// Area-weighted surface sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceSample {
    pub point: Point3<f64>,
    pub weight: f64,
    /// Occluders with this source id are ignored for this sample.
    pub source: Option<u32>,
}

/// Fraction of the open segment kept clear at each end so that a sample
/// lying exactly on a triangle does not count as blocked by it.
const SEGMENT_EPS: f64 = 1e-9;

/// Whether triangle `tri` intersects the open segment `from → to`.
pub fn segment_hits_triangle(from: &Point3<f64>, to: &Point3<f64>, tri: &Triangle) -> bool {
    let dir = to - from;
    let [v0, v1, v2] = &tri.vertices;
    let e1 = v1 - v0;
    let e2 = v2 - v0;
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-18 {
        return false;
    }
    let inv = 1.0 / det;
    let s = from - v0;
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return false;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return false;
    }
    let t = e2.dot(&q) * inv;
    t > SEGMENT_EPS && t < 1.0 - SEGMENT_EPS
}

#[derive(Clone, Copy, Debug)]
struct Node {
    min: [f64; 3],
    max: [f64; 3],
    /// Leaf: first triangle index. Inner: index of the left child (right = left + 1).
    start: u32,
    /// Triangles in a leaf; zero for inner nodes.
    count: u32,
}

const LEAF_SIZE: usize = 4;

/// Static triangle set with a bounding-volume hierarchy for segment queries.
#[derive(Clone, Debug)]
pub struct OccluderSet {
    triangles: Vec<Triangle>,
    nodes: Vec<Node>,
}

impl OccluderSet {
    pub fn new(mut triangles: Vec<Triangle>) -> Self {
        let mut nodes = Vec::with_capacity(2 * triangles.len() / LEAF_SIZE + 1);
        if !triangles.is_empty() {
            let len = triangles.len();
            nodes.push(Node {
                min: [0.0; 3],
                max: [0.0; 3],
                start: 0,
                count: 0,
            });
            build(&mut triangles, &mut nodes, 0, 0, len);
        }
        Self { triangles, nodes }
    }

    pub fn empty() -> Self {
        Self::new(Vec::new())
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Whether any triangle not tagged `exclude` crosses the open segment.
    pub fn segment_blocked(&self, from: &Point3<f64>, to: &Point3<f64>, exclude: Option<u32>) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let dir = to - from;
        let inv = [1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z];
        let o = [from.x, from.y, from.z];
        let mut stack = [0u32; 64];
        let mut top = 1;
        stack[0] = 0;
        while top > 0 {
            top -= 1;
            let node = &self.nodes[stack[top] as usize];
            if !slab_hit(&node.min, &node.max, &o, &inv) {
                continue;
            }
            if node.count > 0 {
                let s = node.start as usize;
                for tri in &self.triangles[s..s + node.count as usize] {
                    if Some(tri.source) != exclude && segment_hits_triangle(from, to, tri) {
                        return true;
                    }
                }
            } else {
                stack[top] = node.start;
                stack[top + 1] = node.start + 1;
                top += 2;
            }
        }
        false
    }
}

fn slab_hit(min: &[f64; 3], max: &[f64; 3], o: &[f64; 3], inv: &[f64; 3]) -> bool {
    let mut t0: f64 = 0.0;
    let mut t1: f64 = 1.0;
    for k in 0..3 {
        let a = (min[k] - o[k]) * inv[k];
        let b = (max[k] - o[k]) * inv[k];
        // NaN from 0 * inf means the segment lies in the slab plane; keep it
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if lo.is_nan() || hi.is_nan() {
            if o[k] < min[k] || o[k] > max[k] {
                return false;
            }
            continue;
        }
        t0 = t0.max(lo);
        t1 = t1.min(hi);
        if t0 > t1 {
            return false;
        }
    }
    true
}

fn bounds(tris: &[Triangle]) -> ([f64; 3], [f64; 3]) {
    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    for t in tris {
        for v in &t.vertices {
            for k in 0..3 {
                min[k] = min[k].min(v[k]);
                max[k] = max[k].max(v[k]);
            }
        }
    }
    // pad so that axis-aligned flat triangles still have a slab to hit
    for k in 0..3 {
        min[k] -= 1e-12;
        max[k] += 1e-12;
    }
    (min, max)
}

fn build(tris: &mut [Triangle], nodes: &mut Vec<Node>, idx: usize, start: usize, end: usize) {
    let (min, max) = bounds(&tris[start..end]);
    let n = end - start;
    if n <= LEAF_SIZE {
        nodes[idx] = Node {
            min,
            max,
            start: start as u32,
            count: n as u32,
        };
        return;
    }
    // split the centroid range on its longest axis at the median
    let mut cmin = [f64::INFINITY; 3];
    let mut cmax = [f64::NEG_INFINITY; 3];
    for t in &tris[start..end] {
        let c = t.centroid();
        for k in 0..3 {
            cmin[k] = cmin[k].min(c[k]);
            cmax[k] = cmax[k].max(c[k]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (cmax[a] - cmin[a]).total_cmp(&(cmax[b] - cmin[b])))
        .unwrap_or(0);
    let mid = n / 2;
    tris[start..end].select_nth_unstable_by(mid, |a, b| {
        a.centroid()[axis].total_cmp(&b.centroid()[axis])
    });
    let left = nodes.len();
    let blank = Node {
        min: [0.0; 3],
        max: [0.0; 3],
        start: 0,
        count: 0,
    };
    nodes.push(blank);
    nodes.push(blank);
    nodes[idx] = Node {
        min,
        max,
        start: left as u32,
        count: 0,
    };
    build(tris, nodes, left, start, start + mid);
    build(tris, nodes, left + 1, start + mid, end);
}

/// Area-weighted fraction of samples that project inside the image and have an
/// unobstructed open segment to the camera center.
///
/// Surface orientation is not considered: a sample facing away from the
/// camera counts as visible unless some triangle blocks it.
pub fn ray_visibility(
    samples: &[SurfaceSample],
    occluders: &OccluderSet,
    camera: &PinholeCamera,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("visibility needs at least one sample".into()));
    }
    if samples.iter().any(|s| !(s.weight >= 0.0) || !s.weight.is_finite()) {
        return Err(Error::InvalidInput("sample weights must be finite and non-negative".into()));
    }
    let total: f64 = samples.iter().map(|s| s.weight).sum();
    if total <= 0.0 {
        return Err(Error::InvalidInput("total sample weight is zero".into()));
    }
    let eye = camera.center();
    let visible: f64 = samples
        .iter()
        .filter(|s| s.weight > 0.0 && camera.in_image(&s.point))
        .filter(|s| !occluders.segment_blocked(&s.point, &eye, s.source))
        .map(|s| s.weight)
        .sum();
    // an empty f64 sum is -0.0
    if visible > 0.0 {
        Ok((visible / total).min(1.0))
    } else {
        Ok(0.0)
    }
}
