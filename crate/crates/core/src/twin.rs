//! Indexed plant component model.
//!
//! A [`DigitalTwin`] is the ordered set of plant components, each carrying a
//! center, a principal direction, a semantic class and three shape
//! parameters (area, length, width), plus observations attached per
//! component. Components are indexed `1..=N` from the bottom of the plant to
//! the top.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TWIN_VERSION: &str = "phytotwin/1";

const UNIT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentClass {
    LeafTop,
    LeafBottom,
    SideStem,
    MainStem,
    /// Rejected clusters; never stored in a twin.
    Pot,
    Soil,
    Noise,
}

impl ComponentClass {
    pub fn is_rejected(self) -> bool {
        matches!(self, Self::Pot | Self::Soil | Self::Noise)
    }

    pub fn is_leaf(self) -> bool {
        matches!(self, Self::LeafTop | Self::LeafBottom)
    }
}

/// Shape parameters of a component: area in m², length and width in m.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ShapeParams {
    pub area: f64,
    pub length: f64,
    pub width: f64,
}

impl ShapeParams {
    fn validate(&self) -> Result<()> {
        let ok = [self.area, self.length, self.width]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0);
        if !ok {
            return Err(Error::InvalidInput("shape parameters must be finite and >= 0".into()));
        }
        if self.width > self.length {
            return Err(Error::InvalidInput(format!(
                "width {} exceeds length {}",
                self.width, self.length
            )));
        }
        Ok(())
    }
}

/// Geometry computed for a cluster before it is indexed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartialFeature {
    pub center: Point3<f64>,
    pub direction: Vector3<f64>,
    /// Normal of the component's best-fit plane, +z oriented.
    pub normal: Vector3<f64>,
    pub shape: ShapeParams,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifiedCluster {
    pub label: i64,
    pub class: ComponentClass,
    pub feature: PartialFeature,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComponentFeature {
    pub id: u32,
    pub center: Point3<f64>,
    /// Unit principal direction.
    pub direction: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub class: ComponentClass,
    pub shape: ShapeParams,
    /// Cluster label the component was built from.
    pub source_label: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameDecl {
    pub origin: String,
    pub up: String,
    pub units: String,
}

impl Default for FrameDecl {
    fn default() -> Self {
        Self {
            origin: "pot_bottom_center".into(),
            up: "+z".into(),
            units: "m".into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// Capture manifest the reconstruction came from, if any.
    pub capture_manifest: Option<String>,
    /// Point cloud the twin was built from.
    pub source: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationKind {
    UndersideImage,
    OversideImage,
    MetricReport,
    PlanRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub kind: AnnotationKind,
    /// External payload (e.g. an image), relative to the export directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub values: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub labels: BTreeMap<String, String>,
    /// Logical timestamp supplied by the caller.
    pub timestamp: u64,
}

impl AnnotationRecord {
    pub fn new(kind: AnnotationKind, timestamp: u64) -> Self {
        Self {
            kind,
            path: None,
            values: BTreeMap::new(),
            labels: BTreeMap::new(),
            timestamp,
        }
    }

    pub fn with_path(mut self, path: impl Into<String>) -> Self {
        self.path = Some(path.into());
        self
    }

    pub fn with_value(mut self, key: impl Into<String>, v: f64) -> Self {
        self.values.insert(key.into(), v);
        self
    }

    pub fn with_label(mut self, key: impl Into<String>, v: impl Into<String>) -> Self {
        self.labels.insert(key.into(), v.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DigitalTwin {
    frame: FrameDecl,
    components: Vec<ComponentFeature>,
    annotations: BTreeMap<u32, Vec<AnnotationRecord>>,
    provenance: Provenance,
}

fn ordering_key(a: &Point3<f64>, b: &Point3<f64>) -> std::cmp::Ordering {
    a.z.total_cmp(&b.z)
        .then(a.x.total_cmp(&b.x))
        .then(a.y.total_cmp(&b.y))
}

/// Indexes classified clusters bottom-to-top, dropping rejected classes.
pub fn build_twin(clusters: &[ClassifiedCluster], provenance: Provenance) -> Result<DigitalTwin> {
    let mut kept: Vec<&ClassifiedCluster> =
        clusters.iter().filter(|c| !c.class.is_rejected()).collect();
    if kept.is_empty() {
        return Err(Error::EmptyPlant);
    }
    kept.sort_by(|a, b| ordering_key(&a.feature.center, &b.feature.center));

    let components = kept
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let f = &c.feature;
            c.feature.shape.validate()?;
            let norm = f.direction.norm();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(Error::InvalidInput(format!("cluster {} has no direction", c.label)));
            }
            let normal = if f.normal.norm() > 0.0 {
                f.normal.normalize()
            } else {
                f.normal
            };
            Ok(ComponentFeature {
                id: i as u32 + 1,
                center: f.center,
                direction: f.direction / norm,
                normal,
                class: c.class,
                shape: f.shape,
                source_label: Some(c.label),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(DigitalTwin {
        frame: FrameDecl::default(),
        components,
        annotations: BTreeMap::new(),
        provenance,
    })
}

impl DigitalTwin {
    pub fn frame(&self) -> &FrameDecl {
        &self.frame
    }

    pub fn components(&self) -> &[ComponentFeature] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn component(&self, id: u32) -> Option<&ComponentFeature> {
        // ids are 1..=N in order
        let c = self.components.get((id as usize).checked_sub(1)?)?;
        (c.id == id).then_some(c)
    }

    /// Ids of leaf components, ascending.
    pub fn leaf_ids(&self) -> Vec<u32> {
        self.components
            .iter()
            .filter(|c| c.class.is_leaf())
            .map(|c| c.id)
            .collect()
    }

    pub fn annotations(&self) -> &BTreeMap<u32, Vec<AnnotationRecord>> {
        &self.annotations
    }

    pub fn annotations_for(&self, id: u32) -> &[AnnotationRecord] {
        self.annotations.get(&id).map_or(&[], Vec::as_slice)
    }

    /// Returns a copy of the twin with `record` appended under component `id`.
    pub fn attach_annotation(&self, id: u32, record: AnnotationRecord) -> Result<DigitalTwin> {
        if self.component(id).is_none() {
            return Err(Error::UnknownComponent(id));
        }
        let mut next = self.clone();
        next.annotations.entry(id).or_default().push(record);
        Ok(next)
    }

    pub fn with_provenance(&self, provenance: Provenance) -> DigitalTwin {
        DigitalTwin {
            provenance,
            ..self.clone()
        }
    }

    /// Checks ordering, id, class and annotation-key invariants.
    pub fn validate(&self) -> Result<()> {
        for (i, c) in self.components.iter().enumerate() {
            if c.id as usize != i + 1 {
                return Err(Error::InvalidInput(format!("component ids not 1..N at position {i}")));
            }
            if c.class.is_rejected() {
                return Err(Error::InvalidInput(format!("component {} has rejected class", c.id)));
            }
            if (c.direction.norm() - 1.0).abs() > UNIT_TOL {
                return Err(Error::InvalidInput(format!("component {} direction not unit", c.id)));
            }
            c.shape.validate()?;
        }
        for w in self.components.windows(2) {
            if ordering_key(&w[0].center, &w[1].center).is_gt() {
                return Err(Error::InvalidInput(format!(
                    "components {} and {} out of height order",
                    w[0].id, w[1].id
                )));
            }
        }
        if let Some(id) = self.annotations.keys().find(|id| self.component(**id).is_none()) {
            return Err(Error::UnknownComponent(*id));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = TwinFile::from(self);
        Ok(serde_json::to_string_pretty(&file)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<DigitalTwin> {
        let version: VersionProbe = serde_json::from_str(text)?;
        if version.version != TWIN_VERSION {
            return Err(Error::VersionMismatch {
                expected: TWIN_VERSION.into(),
                found: version.version,
            });
        }
        let file: TwinFile = serde_json::from_str(text)?;
        let twin = file.into_twin();
        twin.validate()?;
        Ok(twin)
    }

    /// Serializes the twin after checking that every annotation payload path
    /// resolves relative to `base_dir`.
    pub fn export(&self, base_dir: &Path) -> Result<String> {
        for records in self.annotations.values() {
            for path in records.iter().filter_map(|r| r.path.as_deref()) {
                if !base_dir.join(path).exists() {
                    return Err(Error::MissingPayload(path.to_string()));
                }
            }
        }
        self.to_json()
    }
}

#[derive(Deserialize)]
pub(crate) struct VersionProbe {
    pub version: String,
}

#[derive(Serialize, Deserialize)]
struct ComponentRecord {
    id: u32,
    center: [f64; 3],
    direction: [f64; 3],
    normal: [f64; 3],
    class: ComponentClass,
    beta: ShapeParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cluster_label: Option<i64>,
}

#[derive(Serialize, Deserialize)]
struct AnnotationEntry {
    component_id: u32,
    #[serde(flatten)]
    record: AnnotationRecord,
}

#[derive(Serialize, Deserialize)]
struct TwinFile {
    version: String,
    frame: FrameDecl,
    provenance: Provenance,
    components: Vec<ComponentRecord>,
    annotations: Vec<AnnotationEntry>,
}

impl From<&DigitalTwin> for TwinFile {
    fn from(t: &DigitalTwin) -> Self {
        TwinFile {
            version: TWIN_VERSION.into(),
            frame: t.frame.clone(),
            provenance: t.provenance.clone(),
            components: t
                .components
                .iter()
                .map(|c| ComponentRecord {
                    id: c.id,
                    center: c.center.coords.into(),
                    direction: c.direction.into(),
                    normal: c.normal.into(),
                    class: c.class,
                    beta: c.shape,
                    cluster_label: c.source_label,
                })
                .collect(),
            annotations: t
                .annotations
                .iter()
                .flat_map(|(id, records)| {
                    records.iter().map(move |r| AnnotationEntry {
                        component_id: *id,
                        record: r.clone(),
                    })
                })
                .collect(),
        }
    }
}

impl TwinFile {
    fn into_twin(self) -> DigitalTwin {
        let mut annotations: BTreeMap<u32, Vec<AnnotationRecord>> = BTreeMap::new();
        for a in self.annotations {
            annotations.entry(a.component_id).or_default().push(a.record);
        }
        DigitalTwin {
            frame: self.frame,
            provenance: self.provenance,
            components: self
                .components
                .into_iter()
                .map(|c| ComponentFeature {
                    id: c.id,
                    center: Point3::from(c.center),
                    direction: Vector3::from(c.direction),
                    normal: Vector3::from(c.normal),
                    class: c.class,
                    shape: c.beta,
                    source_label: c.cluster_label,
                })
                .collect(),
            annotations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn leaf(label: i64, center: [f64; 3]) -> ClassifiedCluster {
        ClassifiedCluster {
            label,
            class: ComponentClass::LeafTop,
            feature: PartialFeature {
                center: Point3::from(center),
                direction: Vector3::new(1.0, 0.0, 0.1).normalize(),
                normal: Vector3::z(),
                shape: ShapeParams {
                    area: 0.002,
                    length: 0.07,
                    width: 0.04,
                },
            },
        }
    }

    #[test]
    fn sorted_bottom_to_top() {
        let twin = build_twin(
            &[leaf(10, [0.0, 0.0, 0.30]), leaf(11, [0.0, 0.0, 0.10]), leaf(12, [0.0, 0.0, 0.20])],
            Provenance::default(),
        )
        .unwrap();
        let z: Vec<f64> = twin.components().iter().map(|c| c.center.z).collect();
        assert_eq!(z, vec![0.10, 0.20, 0.30]);
        let ids: Vec<u32> = twin.components().iter().map(|c| c.id).collect();
        assert_eq!(ids, vec![1, 2, 3]);
        assert_eq!(twin.component(1).unwrap().source_label, Some(11));
    }

    #[test]
    fn ties_broken_by_x_then_y() {
        let twin = build_twin(
            &[leaf(1, [0.2, 0.0, 0.1]), leaf(2, [0.1, 0.5, 0.1]), leaf(3, [0.1, 0.2, 0.1])],
            Provenance::default(),
        )
        .unwrap();
        let labels: Vec<_> = twin.components().iter().map(|c| c.source_label.unwrap()).collect();
        assert_eq!(labels, vec![3, 2, 1]);
    }

    #[test]
    fn rejected_classes_excluded_and_empty_errors() {
        let mut pot = leaf(1, [0.0, 0.0, 0.0]);
        pot.class = ComponentClass::Pot;
        let mut noise = leaf(2, [0.0, 0.0, 0.2]);
        noise.class = ComponentClass::Noise;
        assert!(matches!(
            build_twin(&[pot, noise], Provenance::default()),
            Err(Error::EmptyPlant)
        ));
        let twin = build_twin(&[pot, leaf(3, [0.0, 0.0, 0.2])], Provenance::default()).unwrap();
        assert_eq!(twin.len(), 1);
        assert_eq!(twin.leaf_ids(), vec![1]);
    }

    #[test]
    fn width_above_length_rejected() {
        let mut bad = leaf(1, [0.0, 0.0, 0.1]);
        bad.feature.shape.width = 0.1;
        assert!(build_twin(&[bad], Provenance::default()).is_err());
    }

    #[test]
    fn figure_one_leaf_round_trips() {
        let mut l = leaf(5, [0.05, -0.02, 0.272]);
        l.feature.shape = ShapeParams {
            area: 25.6e-4,
            length: 0.072,
            width: 0.05,
        };
        let twin = build_twin(&[l], Provenance::default()).unwrap();
        let back = DigitalTwin::from_json(&twin.to_json().unwrap()).unwrap();
        assert_eq!(back, twin);
        assert_eq!(back.component(1).unwrap().shape.area, 25.6e-4);
        assert_eq!(back.component(1).unwrap().center.z, 0.272);
    }

    #[test]
    fn attach_and_unknown_id() {
        let clusters: Vec<_> = (0..10).map(|i| leaf(i, [0.0, 0.0, 0.05 * i as f64])).collect();
        let twin = build_twin(&clusters, Provenance::default()).unwrap();
        let rec = AnnotationRecord::new(AnnotationKind::UndersideImage, 1).with_path("leaf4.png");
        let next = twin.attach_annotation(4, rec.clone()).unwrap();
        assert_eq!(next.annotations_for(4).len(), 1);
        assert_eq!(twin.annotations_for(4).len(), 0);
        assert_eq!(next.components(), twin.components());
        assert!(matches!(twin.attach_annotation(999, rec), Err(Error::UnknownComponent(999))));
    }

    #[test]
    fn export_checks_payload_paths() {
        let dir = tempfile::tempdir().unwrap();
        let twin = build_twin(&[leaf(0, [0.0, 0.0, 0.1])], Provenance::default()).unwrap();
        let twin = twin
            .attach_annotation(1, AnnotationRecord::new(AnnotationKind::UndersideImage, 0).with_path("u.png"))
            .unwrap();
        assert!(matches!(twin.export(dir.path()), Err(Error::MissingPayload(_))));
        std::fs::write(dir.path().join("u.png"), b"png").unwrap();
        assert!(twin.export(dir.path()).is_ok());
    }

    #[test]
    fn version_checked() {
        let twin = build_twin(&[leaf(0, [0.0, 0.0, 0.1])], Provenance::default()).unwrap();
        let text = twin.to_json().unwrap().replace("phytotwin/1", "phytotwin/9");
        assert!(matches!(DigitalTwin::from_json(&text), Err(Error::VersionMismatch { .. })));
    }
}
