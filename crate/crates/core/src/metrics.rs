//! Leaf phenotype metrics: height, area, length and width.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::Vector2;

use crate::detect::Cluster;
use crate::error::{Error, Result};
use crate::geom::{fit_ellipse, fit_obb, OrientedBox};
use crate::twin::{ComponentFeature, DigitalTwin};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeafMetrics {
    /// Centroid height above the pot bottom, m.
    pub height: f64,
    /// m²
    pub area: f64,
    pub length: f64,
    pub width: f64,
}

/// Height of a component's center above the pot bottom (the frame origin).
pub fn leaf_height(feature: &ComponentFeature) -> f64 {
    feature.center.z
}

/// Ellipse area of the cluster projected onto the plane of its two longest
/// box axes.
pub fn leaf_area(cluster: &Cluster) -> Result<f64> {
    let obb = fit_obb(&cluster.points)?;
    area_in_box(cluster, &obb)
}

fn area_in_box(cluster: &Cluster, obb: &OrientedBox) -> Result<f64> {
    let flat: Vec<Vector2<f64>> = cluster
        .points
        .points()
        .iter()
        .map(|p| {
            let d = p - obb.center;
            Vector2::new(d.dot(&obb.axes[0]), d.dot(&obb.axes[1]))
        })
        .collect();
    Ok(fit_ellipse(&flat)?.area())
}

/// Longest and second-longest box extents.
pub fn leaf_length_width(cluster: &Cluster) -> Result<(f64, f64)> {
    let obb = fit_obb(&cluster.points)?;
    Ok((obb.extents[0], obb.extents[1]))
}

/// All metrics for one leaf cluster; height is the cluster centroid z.
pub fn leaf_metrics(cluster: &Cluster) -> Result<LeafMetrics> {
    let obb = fit_obb(&cluster.points)?;
    let area = area_in_box(cluster, &obb)?;
    let height = cluster.points.centroid().map(|c| c.z).unwrap_or(0.0);
    Ok(LeafMetrics {
        height,
        area,
        length: obb.extents[0],
        width: obb.extents[1],
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub leaf_id: u32,
    pub metrics: std::result::Result<LeafMetrics, String>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aggregate {
    pub mean: LeafMetrics,
    /// Population standard deviation.
    pub std: LeafMetrics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlantReport {
    pub plant_id: String,
    pub rows: Vec<ReportRow>,
}

impl PlantReport {
    pub fn leaf_count(&self) -> usize {
        self.rows.len()
    }

    /// Mean and population standard deviation over rows that computed cleanly.
    pub fn aggregate(&self) -> Option<Aggregate> {
        let ok: Vec<&LeafMetrics> = self.rows.iter().filter_map(|r| r.metrics.as_ref().ok()).collect();
        if ok.is_empty() {
            return None;
        }
        let n = ok.len() as f64;
        let stat = |f: fn(&LeafMetrics) -> f64| {
            let mean = ok.iter().map(|m| f(m)).sum::<f64>() / n;
            let var = ok.iter().map(|m| (f(m) - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        };
        let (hm, hs) = stat(|m| m.height);
        let (am, as_) = stat(|m| m.area);
        let (lm, ls) = stat(|m| m.length);
        let (wm, ws) = stat(|m| m.width);
        Some(Aggregate {
            mean: LeafMetrics {
                height: hm,
                area: am,
                length: lm,
                width: wm,
            },
            std: LeafMetrics {
                height: hs,
                area: as_,
                length: ls,
                width: ws,
            },
        })
    }

    /// CSV in centimeters / cm². Leaves whose metrics failed are written with
    /// empty metric cells and the reason listed in the header comments.
    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::new();
        out.push_str("# units: cm, cm2; MEAN/STD rows are mean and population standard deviation over all detected leaves\n");
        for r in &self.rows {
            if let Err(e) = &r.metrics {
                let _ = writeln!(out, "# leaf {} flagged: {}", r.leaf_id, e);
            }
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["plant_id", "leaf_id", "height_cm", "area_cm2", "length_cm", "width_cm"])?;
        let cells = |m: &LeafMetrics| {
            [
                format!("{:.4}", m.height * 100.0),
                format!("{:.4}", m.area * 1e4),
                format!("{:.4}", m.length * 100.0),
                format!("{:.4}", m.width * 100.0),
            ]
        };
        for r in &self.rows {
            let values = match &r.metrics {
                Ok(m) => cells(m),
                Err(_) => Default::default(),
            };
            let id = r.leaf_id.to_string();
            w.write_record([self.plant_id.as_str(), id.as_str()].into_iter().chain(values.iter().map(String::as_str)))?;
        }
        if let Some(agg) = self.aggregate() {
            for (tag, m) in [("MEAN", &agg.mean), ("STD", &agg.std)] {
                let values = cells(m);
                w.write_record([self.plant_id.as_str(), tag].into_iter().chain(values.iter().map(String::as_str)))?;
            }
        }
        let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        out.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
        Ok(out)
    }
}

/// Per-leaf metrics for every leaf of the twin, looked up by source cluster
/// label. Failures become flagged rows.
pub fn plant_report(plant_id: &str, twin: &DigitalTwin, clusters: &[Cluster]) -> PlantReport {
    let by_label: BTreeMap<i64, &Cluster> = clusters.iter().map(|c| (c.label, c)).collect();
    let rows = twin
        .components()
        .iter()
        .filter(|c| c.class.is_leaf())
        .map(|c| {
            let metrics = match c.source_label.and_then(|l| by_label.get(&l)) {
                None => Err("no cluster for leaf".to_string()),
                Some(cluster) => leaf_metrics(cluster)
                    .map(|m| LeafMetrics {
                        height: leaf_height(c),
                        ..m
                    })
                    .map_err(|e| e.to_string()),
            };
            ReportRow {
                leaf_id: c.id,
                metrics,
            }
        })
        .collect();
    PlantReport {
        plant_id: plant_id.to_string(),
        rows,
    }
}
