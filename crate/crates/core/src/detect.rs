//! Zero-shot leaf detection over labeled segment clusters.
//!
//! Rejects the three clusters reaching lowest (pot, pot texture, soil), the
//! two reaching highest (stem and its top), and every cluster with fewer than
//! 100 points. Whatever remains is a leaf.

use std::collections::BTreeSet;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{pca, PointSet};
use crate::twin::ComponentClass;

/// One segment of a labeled point cloud.
#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    pub label: i64,
    pub points: PointSet,
}

impl Cluster {
    pub fn new(label: i64, points: PointSet) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput(format!("cluster {label} has no points")));
        }
        Ok(Self { label, points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Leaf,
    RejectedBottom,
    RejectedTallest,
    RejectedNoise,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DetectionConfig {
    pub noise_min_points: usize,
    pub bottom_count: usize,
    pub tallest_count: usize,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            noise_min_points: 100,
            bottom_count: 3,
            tallest_count: 2,
        }
    }
}

/// Per-cluster verdicts, in input order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DetectionResult {
    pub verdicts: Vec<(i64, Verdict)>,
}

impl DetectionResult {
    pub fn leaf_labels(&self) -> Vec<i64> {
        self.verdicts
            .iter()
            .filter(|(_, v)| *v == Verdict::Leaf)
            .map(|(l, _)| *l)
            .collect()
    }

    pub fn verdict(&self, label: i64) -> Option<Verdict> {
        self.verdicts.iter().find(|(l, _)| *l == label).map(|(_, v)| *v)
    }

    /// Class for accepted clusters; `None` for rejected ones.
    pub fn class_of(&self, label: i64) -> Option<ComponentClass> {
        match self.verdict(label)? {
            Verdict::Leaf => Some(ComponentClass::LeafTop),
            _ => None,
        }
    }

    pub fn count(&self, verdict: Verdict) -> usize {
        self.verdicts.iter().filter(|(_, v)| *v == verdict).count()
    }
}

pub fn detect_leaves(clusters: &[Cluster], config: &DetectionConfig) -> DetectionResult {
    let extent = |c: &Cluster, lowest: bool| {
        if lowest {
            c.points.min_z().unwrap_or(f64::INFINITY)
        } else {
            c.points.max_z().unwrap_or(f64::NEG_INFINITY)
        }
    };

    let mut by_bottom: Vec<&Cluster> = clusters.iter().collect();
    by_bottom.sort_by(|a, b| {
        extent(a, true)
            .total_cmp(&extent(b, true))
            .then(a.label.cmp(&b.label))
    });
    let bottom: BTreeSet<i64> = by_bottom
        .iter()
        .take(config.bottom_count)
        .map(|c| c.label)
        .collect();

    let mut by_top: Vec<&Cluster> = clusters.iter().collect();
    by_top.sort_by(|a, b| {
        extent(b, false)
            .total_cmp(&extent(a, false))
            .then(a.label.cmp(&b.label))
    });
    let tallest: BTreeSet<i64> = by_top
        .iter()
        .take(config.tallest_count)
        .map(|c| c.label)
        .collect();

    let verdicts = clusters
        .iter()
        .map(|c| {
            let v = if bottom.contains(&c.label) {
                Verdict::RejectedBottom
            } else if tallest.contains(&c.label) {
                Verdict::RejectedTallest
            } else if c.len() < config.noise_min_points {
                Verdict::RejectedNoise
            } else {
                Verdict::Leaf
            };
            (c.label, v)
        })
        .collect();
    DetectionResult { verdicts }
}

/// Center and principal direction of a cluster.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterPose {
    pub center: Point3<f64>,
    pub direction: Vector3<f64>,
}

pub fn featureize(cluster: &Cluster) -> Result<ClusterPose> {
    let p = pca(&cluster.points)?;
    Ok(ClusterPose {
        center: p.mean,
        direction: p.axes[0],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Frame;

    fn column(label: i64, n: usize, z0: f64, z1: f64, x: f64) -> Cluster {
        let pts = (0..n)
            .map(|i| {
                let t = i as f64 / (n.max(2) - 1) as f64;
                Point3::new(x + 0.001 * (i % 7) as f64, 0.001 * (i % 5) as f64, z0 + t * (z1 - z0))
            })
            .collect();
        Cluster::new(label, PointSet::new(Frame::Plant, pts).unwrap()).unwrap()
    }

    #[test]
    fn noise_cluster_rejected() {
        let clusters = vec![
            column(0, 200, 0.0, 0.1, 0.0),
            column(1, 200, 0.0, 0.05, 0.1),
            column(2, 200, 0.09, 0.1, 0.0),
            column(3, 200, 0.1, 0.6, 0.0),
            column(4, 200, 0.55, 0.62, 0.0),
            column(5, 200, 0.3, 0.32, 0.1),
            column(6, 99, 0.4, 0.42, 0.1),
        ];
        let r = detect_leaves(&clusters, &DetectionConfig::default());
        assert_eq!(r.verdict(6), Some(Verdict::RejectedNoise));
        assert_eq!(r.leaf_labels(), vec![5]);
        assert_eq!(r.count(Verdict::RejectedBottom), 3);
        assert_eq!(r.count(Verdict::RejectedTallest), 2);
    }

    #[test]
    fn union_semantics_with_four_clusters() {
        // label 0 is both bottommost and tallest
        let clusters = vec![
            column(0, 300, 0.0, 1.0, 0.0),
            column(1, 300, 0.1, 0.2, 0.0),
            column(2, 300, 0.2, 0.3, 0.0),
            column(3, 300, 0.5, 0.6, 0.0),
        ];
        let r = detect_leaves(&clusters, &DetectionConfig::default());
        assert_eq!(r.verdict(0), Some(Verdict::RejectedBottom));
        assert_eq!(r.verdict(1), Some(Verdict::RejectedBottom));
        assert_eq!(r.verdict(2), Some(Verdict::RejectedBottom));
        assert_eq!(r.verdict(3), Some(Verdict::RejectedTallest));
        assert!(r.leaf_labels().is_empty());
        assert_eq!(r.verdicts.len(), 4);
    }

    #[test]
    fn ties_broken_by_label() {
        let clusters: Vec<_> = (0..5).map(|l| column(4 - l, 150, 0.0, 0.1, 0.0)).collect();
        let r = detect_leaves(&clusters, &DetectionConfig::default());
        for l in 0..3 {
            assert_eq!(r.verdict(l), Some(Verdict::RejectedBottom));
        }
        // the two tallest by label are already bottom-rejected
        assert_eq!(r.leaf_labels(), vec![4, 3]);
    }

    #[test]
    fn featureize_centroid_and_degenerate() {
        let pts = (0..400)
            .map(|i| {
                let a = i as f64 * 2.399_963;
                let r = 0.03 * ((i as f64 + 0.5) / 400.0).sqrt();
                Point3::new(0.1 + 1.5 * r * a.cos(), r * a.sin(), 0.3)
            })
            .collect();
        let c = Cluster::new(1, PointSet::new(Frame::Plant, pts).unwrap()).unwrap();
        let f = featureize(&c).unwrap();
        assert!((f.center - Point3::new(0.1, 0.0, 0.3)).norm() < 1e-3);
        assert!(f.direction.x.abs() > 0.99);

        let two = PointSet::new(Frame::Plant, vec![Point3::origin(), Point3::new(0.0, 0.0, 1.0)]).unwrap();
        let c2 = Cluster::new(2, two).unwrap();
        assert!(matches!(featureize(&c2), Err(Error::DegenerateInput(_))));
    }
}
