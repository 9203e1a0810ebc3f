//! Cluster → twin pipeline: detection, per-leaf features and metrics, indexing.

use crate::detect::{detect_leaves, featureize, Cluster, DetectionConfig, DetectionResult};
use crate::error::Result;
use crate::geom::fit_obb;
use crate::metrics::{leaf_area, plant_report, PlantReport};
use crate::twin::{build_twin, ClassifiedCluster, DigitalTwin, PartialFeature, Provenance, ShapeParams};

#[derive(Clone, Debug)]
pub struct TwinBuild {
    pub twin: DigitalTwin,
    pub detection: DetectionResult,
    pub report: PlantReport,
}

pub fn twin_from_clusters(
    plant_id: &str,
    clusters: &[Cluster],
    config: &DetectionConfig,
    provenance: Provenance,
) -> Result<TwinBuild> {
    let detection = detect_leaves(clusters, config);
    let mut classified = Vec::new();
    for cluster in clusters {
        let Some(class) = detection.class_of(cluster.label) else {
            continue;
        };
        let pose = featureize(cluster)?;
        let obb = fit_obb(&cluster.points)?;
        // an area that cannot be fitted is reported as a flagged row later
        let area = leaf_area(cluster).unwrap_or(0.0);
        classified.push(ClassifiedCluster {
            label: cluster.label,
            class,
            feature: PartialFeature {
                center: pose.center,
                direction: pose.direction,
                normal: obb.plane_normal(),
                shape: ShapeParams {
                    area,
                    length: obb.extents[0],
                    width: obb.extents[1],
                },
            },
        });
    }
    let twin = build_twin(&classified, provenance)?;
    let report = plant_report(plant_id, &twin, clusters);
    Ok(TwinBuild {
        twin,
        detection,
        report,
    })
}
