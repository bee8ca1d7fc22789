//! ASCII PLY point clouds (vertex positions only).

use thiserror::Error;

use crate::geom::{PointCloud, Vec3};

#[derive(Debug, Error, PartialEq)]
pub enum PlyError {
    #[error("ply header: {0}")]
    Header(String),
    #[error("ply vertex {index}: {reason}")]
    Vertex { index: usize, reason: String },
}

/// Writes `x y z` per vertex with shortest round-trip float formatting.
pub fn write_ply(cloud: &PointCloud) -> String {
    let mut out = format!(
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
        cloud.len()
    );
    for p in &cloud.points {
        out.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
    }
    out
}

/// Reads an ASCII PLY whose first element is `vertex` with `x`, `y`, `z`
/// properties (other properties and later elements are ignored).
pub fn read_ply(text: &str) -> Result<PointCloud, PlyError> {
    let bad = |m: &str| PlyError::Header(m.to_string());
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(bad("missing `ply` magic"));
    }
    let mut count = None;
    let mut props: Vec<String> = Vec::new();
    let mut in_vertex = false;
    loop {
        let line = lines.next().ok_or_else(|| bad("missing end_header"))?.trim();
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["end_header"] => break,
            ["format", fmt, _] if *fmt != "ascii" => return Err(bad("only ascii format is supported")),
            ["element", "vertex", n] => {
                if count.is_some() {
                    return Err(bad("duplicate vertex element"));
                }
                count = Some(n.parse::<usize>().map_err(|_| bad("bad vertex count"))?);
                in_vertex = true;
            }
            ["element", ..] => in_vertex = false,
            ["property", "list", ..] if in_vertex => return Err(bad("list properties on vertices are not supported")),
            ["property", _, name] if in_vertex => props.push(name.to_string()),
            _ => {}
        }
    }
    let count = count.ok_or_else(|| bad("no vertex element"))?;
    let col = |name: &str| props.iter().position(|p| p == name).ok_or_else(|| bad(&format!("no `{name}` property")));
    let (xi, yi, zi) = (col("x")?, col("y")?, col("z")?);

    let mut points = Vec::with_capacity(count);
    for index in 0..count {
        let line = lines.next().ok_or(PlyError::Vertex { index, reason: "missing".into() })?;
        let values: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| PlyError::Vertex { index, reason: format!("{e}") })?;
        if values.len() != props.len() {
            return Err(PlyError::Vertex {
                index,
                reason: format!("{} values for {} properties", values.len(), props.len()),
            });
        }
        points.push(Vec3::new(values[xi], values[yi], values[zi]));
    }
    Ok(PointCloud::new(points))
}
