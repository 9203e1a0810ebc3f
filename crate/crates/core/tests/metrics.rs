//! Property tests for leaf metrics and report aggregates.

use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};
use proptest::prelude::*;

use phytotwin::detect::Cluster;
use phytotwin::geom::{Frame, PointSet, RigidTransform};
use phytotwin::metrics::{leaf_metrics, LeafMetrics, PlantReport, ReportRow};

fn leaf() -> impl Strategy<Value = Cluster> {
    blade(40..500)
}

/// A thin, tilted, elongated elliptical blade from `raw` candidate points.
fn blade(raw: std::ops::Range<usize>) -> impl Strategy<Value = Cluster> {
    (
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64), raw),
        0.03..0.15f64,
        0.3..0.8f64,
        -1.0..1.0f64,
        0.05..0.5f64,
    )
        .prop_map(|(raw, length, aspect, tilt, height)| {
            let pose = RigidTransform::from_axis_angle(&Vector3::new(1.0, 0.4, 0.0), tilt, Vector3::new(0.02, -0.01, height));
            let pts = raw
                .into_iter()
                .filter(|(x, y, _)| x * x + y * y <= 1.0)
                .map(|(x, y, z)| pose.apply(&Point3::new(0.5 * length * x, 0.5 * length * aspect * y, 0.0005 * z)))
                .collect::<Vec<_>>();
            Cluster::new(1, PointSet::new(Frame::Plant, pts).unwrap()).unwrap()
        })
        .prop_filter("enough points survive", |c| c.len() >= 20)
}

fn moved(c: &Cluster, t: &RigidTransform) -> Cluster {
    Cluster::new(c.label, c.points.transformed(t)).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-12)
}

proptest! {
    #[test]
    fn turning_about_z_only_shifts_nothing_but_height(
        c in leaf(),
        angle in -PI..PI,
        shift in prop::array::uniform3(-0.5..0.5f64),
    ) {
        let m = leaf_metrics(&c).unwrap();
        let t = RigidTransform::from_axis_angle(&Vector3::z(), angle, Vector3::from(shift));
        let n = leaf_metrics(&moved(&c, &t)).unwrap();
        prop_assert!(close(m.area, n.area, 1e-9));
        prop_assert!(close(m.length, n.length, 1e-9));
        prop_assert!(close(m.width, n.width, 1e-9));
        prop_assert!((n.height - m.height - shift[2]).abs() <= 1e-12);
    }

    #[test]
    fn metrics_scale_with_the_cloud(c in leaf(), s in 0.1..10.0f64) {
        let m = leaf_metrics(&c).unwrap();
        let pts = c.points.points().iter().map(|p| Point3::from(p.coords * s)).collect();
        let n = leaf_metrics(&Cluster::new(1, PointSet::new(Frame::Plant, pts).unwrap()).unwrap()).unwrap();
        prop_assert!(close(n.area, m.area * s * s, 1e-9));
        prop_assert!(close(n.length, m.length * s, 1e-9));
        prop_assert!(close(n.width, m.width * s, 1e-9));
        prop_assert!(close(n.height, m.height * s, 1e-9));
    }

    /// The moment ellipse semi-axes are twice a standard deviation along box
    /// axes, and a standard deviation never exceeds half the extent.
    #[test]
    fn area_bounded_by_box(c in leaf()) {
        let m = leaf_metrics(&c).unwrap();
        prop_assert!(m.width <= m.length);
        prop_assert!(m.area > 0.0);
        prop_assert!(m.area <= PI * m.length * m.width * (1.0 + 1e-9));
    }

    /// For densely sampled elliptical blades the moment area stays near the
    /// ellipse inscribed in the box. Sparse samples shrink the box instead.
    #[test]
    fn elliptical_blades_stay_near_the_inscribed_ellipse(c in blade(2000..4000)) {
        let m = leaf_metrics(&c).unwrap();
        prop_assert!(m.area <= PI / 4.0 * m.length * m.width * 1.10, "{} vs {}", m.area, PI / 4.0 * m.length * m.width);
    }

    #[test]
    fn aggregates_are_population_statistics(
        values in prop::collection::vec(prop::array::uniform4(0.0..1.0f64), 1..30),
    ) {
        let rows: Vec<ReportRow> = values
            .iter()
            .enumerate()
            .map(|(i, v)| ReportRow {
                leaf_id: i as u32 + 1,
                metrics: Ok(LeafMetrics { height: v[0], area: v[1], length: v[2], width: v[3] }),
            })
            .collect();
        let flagged = ReportRow { leaf_id: 99, metrics: Err("degenerate".into()) };
        let report = PlantReport { plant_id: "p".into(), rows: [rows, vec![flagged]].concat() };
        let agg = report.aggregate().unwrap();
        let n = values.len() as f64;
        for k in 0..4 {
            let mean = values.iter().map(|v| v[k]).sum::<f64>() / n;
            let var = values.iter().map(|v| (v[k] - mean).powi(2)).sum::<f64>() / n;
            let got = [agg.mean.height, agg.mean.area, agg.mean.length, agg.mean.width][k];
            let std = [agg.std.height, agg.std.area, agg.std.length, agg.std.width][k];
            prop_assert!((got - mean).abs() <= 1e-12);
            prop_assert!((std - var.sqrt()).abs() <= 1e-12);
        }
        if values.len() == 1 {
            prop_assert_eq!(agg.std.area, 0.0);
        }
    }
}

/// A filled rectangle is the counterexample for the tighter bound. On an
/// n-by-n grid the moment ellipse over the inscribed one is (4/3)(n+1)/(n-1).
#[test]
fn filled_rectangle_exceeds_the_inscribed_ellipse() {
    let n = 200;
    let pts = (0..n * n)
        .map(|k| {
            let (i, j) = ((k % n) as f64, (k / n) as f64);
            Point3::new(0.1 * (i + 0.5) / n as f64, 0.05 * (j + 0.5) / n as f64, 0.3)
        })
        .collect();
    let m = leaf_metrics(&Cluster::new(1, PointSet::new(Frame::Plant, pts).unwrap()).unwrap()).unwrap();
    let ratio = m.area / (PI / 4.0 * m.length * m.width);
    let want = 4.0 / 3.0 * (n + 1) as f64 / (n - 1) as f64;
    assert!((ratio - want).abs() < 1e-9, "{ratio} vs {want}");
}

#[test]
fn all_flagged_rows_have_no_aggregate() {
    let report = PlantReport {
        plant_id: "p".into(),
        rows: vec![ReportRow {
            leaf_id: 1,
            metrics: Err("degenerate".into()),
        }],
    };
    assert!(report.aggregate().is_none());
    let csv = report.to_csv().unwrap();
    assert!(csv.contains("# leaf 1 flagged: degenerate"));
    assert!(csv.trim_end().ends_with("p,1,,,,"));
}

#[test]
fn csv_is_in_centimeters() {
    let m = LeafMetrics {
        height: 0.25,
        area: 0.0012,
        length: 0.08,
        width: 0.03,
    };
    let report = PlantReport {
        plant_id: "p".into(),
        rows: vec![ReportRow { leaf_id: 3, metrics: Ok(m) }],
    };
    let csv = report.to_csv().unwrap();
    assert!(csv.contains("p,3,25.0000,12.0000,8.0000,3.0000"), "{csv}");
    assert!(csv.contains("p,STD,0.0000,0.0000,0.0000,0.0000"), "{csv}");
}
