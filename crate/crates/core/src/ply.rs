//! ASCII PLY point clouds with a per-vertex `cluster_id`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::Point3;

use crate::detect::Cluster;
use crate::error::{Error, Result};
use crate::geom::{Frame, PointSet};

const REQUIRED: [&str; 4] = ["x", "y", "z", "cluster_id"];

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Parses an ASCII PLY document into clusters sorted by label.
///
/// The vertex element must declare `x`, `y`, `z` and `cluster_id`; other
/// vertex properties and other elements are skipped.
pub fn read_ply(text: &str) -> Result<Vec<Cluster>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    match lines.next() {
        Some((_, "ply")) => {}
        Some((n, _)) => return Err(parse_err(n, "missing 'ply' magic")),
        None => return Err(parse_err(1, "empty file")),
    }

    // (name, count, properties)
    let mut elements: Vec<(String, usize, Vec<String>)> = Vec::new();
    let mut header_done = false;
    let mut last_line = 1;
    for (n, line) in lines.by_ref() {
        last_line = n;
        let mut tok = line.split_whitespace();
        match tok.next() {
            None | Some("comment") | Some("obj_info") => {}
            Some("format") => {
                if tok.next() != Some("ascii") {
                    return Err(parse_err(n, "only 'format ascii 1.0' is supported"));
                }
            }
            Some("element") => {
                let name = tok.next().ok_or_else(|| parse_err(n, "element without name"))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| parse_err(n, "element without a valid count"))?;
                elements.push((name.to_string(), count, Vec::new()));
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(n, "property before any element"))?;
                let rest: Vec<&str> = tok.collect();
                let name = match rest.as_slice() {
                    ["list", _, _, name] => name,
                    [_, name] => name,
                    _ => return Err(parse_err(n, "malformed property line")),
                };
                el.2.push(name.to_string());
            }
            Some("end_header") => {
                header_done = true;
                break;
            }
            Some(other) => return Err(parse_err(n, format!("unknown header keyword '{other}'"))),
        }
    }
    if !header_done {
        return Err(parse_err(last_line, "missing end_header"));
    }

    let vertex_pos = elements
        .iter()
        .position(|e| e.0 == "vertex")
        .ok_or_else(|| parse_err(last_line, "no vertex element"))?;
    let props = &elements[vertex_pos].2;
    let mut idx = [0usize; 4];
    for (k, name) in REQUIRED.iter().enumerate() {
        idx[k] = props
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| parse_err(last_line, format!("vertex element lacks property '{name}'")))?;
    }

    // skip data of elements declared before the vertex element
    for (name, count, _) in &elements[..vertex_pos] {
        for _ in 0..*count {
            if lines.next().is_none() {
                return Err(parse_err(last_line, format!("truncated '{name}' data")));
            }
        }
    }

    let count = elements[vertex_pos].1;
    let mut groups: BTreeMap<i64, Vec<Point3<f64>>> = BTreeMap::new();
    for _ in 0..count {
        let (n, line) = lines
            .next()
            .ok_or_else(|| parse_err(last_line + 1, "fewer vertices than declared"))?;
        last_line = n;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < props.len() {
            return Err(parse_err(n, format!("expected {} values, got {}", props.len(), fields.len())));
        }
        let num = |k: usize| -> Result<f64> {
            let v: f64 = fields[idx[k]]
                .parse()
                .map_err(|_| parse_err(n, format!("invalid {} value '{}'", REQUIRED[k], fields[idx[k]])))?;
            if !v.is_finite() {
                return Err(parse_err(n, format!("non-finite {}", REQUIRED[k])));
            }
            Ok(v)
        };
        let p = Point3::new(num(0)?, num(1)?, num(2)?);
        let label: i64 = fields[idx[3]]
            .parse()
            .map_err(|_| parse_err(n, format!("invalid cluster_id '{}'", fields[idx[3]])))?;
        groups.entry(label).or_default().push(p);
    }

    groups
        .into_iter()
        .map(|(label, pts)| Cluster::new(label, PointSet::new(Frame::Plant, pts)?))
        .collect()
}

/// Writes clusters as ASCII PLY, clusters in the given order.
pub fn write_ply(clusters: &[Cluster]) -> String {
    let total: usize = clusters.iter().map(Cluster::len).sum();
    let mut out = String::with_capacity(total * 48 + 200);
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {total}");
    out.push_str(
        "property float x\nproperty float y\nproperty float z\nproperty int cluster_id\nend_header\n",
    );
    for c in clusters {
        for p in c.points.points() {
            let _ = writeln!(out, "{} {} {} {}", p.x, p.y, p.z, c.label);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "ply\nformat ascii 1.0\ncomment test\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nproperty int cluster_id\nend_header\n0 0 0 255 2\n1 0 0 0 1\n0.5 0.25 0.125 9 2\n";

    #[test]
    fn reads_clusters_with_extra_properties() {
        let clusters = read_ply(SAMPLE).unwrap();
        assert_eq!(clusters.len(), 2);
        assert_eq!(clusters[0].label, 1);
        assert_eq!(clusters[1].len(), 2);
        assert_eq!(clusters[1].points.points()[1], Point3::new(0.5, 0.25, 0.125));
    }

    #[test]
    fn missing_field_named() {
        let text = SAMPLE.replace("property int cluster_id\n", "");
        match read_ply(&text) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("cluster_id"), "{message}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_value_reports_line() {
        let text = SAMPLE.replace("1 0 0 0 1", "1 zz 0 0 1");
        match read_ply(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_data() {
        let text = SAMPLE.replace("element vertex 3", "element vertex 4");
        assert!(matches!(read_ply(&text), Err(Error::Parse { .. })));
        assert!(matches!(read_ply("plx\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn write_then_read_is_exact() {
        let clusters = read_ply(SAMPLE).unwrap();
        let again = read_ply(&write_ply(&clusters)).unwrap();
        assert_eq!(clusters, again);
    }
}
